#include "vfl/lstm.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vfl/error.hpp"
#include "vfl/numeric.hpp"

namespace vfl {

LstmParams init_lstm_params(Index input_size, Index hidden_size, Rng& rng) {
  if (input_size < 1 || hidden_size < 1) {
    throw std::invalid_argument("init_lstm_params: sizes must be positive");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  LstmParams p;
  p.w_ih.resize(4 * hidden_size, input_size);
  p.w_hh.resize(4 * hidden_size, hidden_size);
  p.b.resize(4 * hidden_size);
  for (Index r = 0; r < p.w_ih.rows(); ++r)
    for (Index c = 0; c < p.w_ih.cols(); ++c) p.w_ih(r, c) = rng.uniform(-bound, bound);
  for (Index r = 0; r < p.w_hh.rows(); ++r)
    for (Index c = 0; c < p.w_hh.cols(); ++c) p.w_hh(r, c) = rng.uniform(-bound, bound);
  for (Index r = 0; r < p.b.size(); ++r) p.b[r] = rng.uniform(-bound, bound);
  return p;
}

LstmState zero_state(Index batch, Index hidden_size) {
  return {Matrix::Zero(batch, hidden_size), Matrix::Zero(batch, hidden_size)};
}

namespace {

void check_params(const LstmParams& p) {
  const Index h = p.hidden_size();
  if (p.w_ih.rows() != 4 * h || p.w_hh.rows() != 4 * h || p.b.size() != 4 * h) {
    throw ShapeError("lstm: parameter blocks disagree on hidden size");
  }
}

struct GateBlocks {
  Matrix i, f, g, o;  // post-nonlinearity, rows x H
};

GateBlocks gates_forward(const LstmParams& p, const Matrix& x_t, const Matrix& h_prev) {
  const Index h = p.hidden_size();
  Matrix z = x_t * p.w_ih.transpose();
  z.noalias() += h_prev * p.w_hh.transpose();
  z.rowwise() += p.b.transpose();
  GateBlocks gb;
  gb.i = sigmoid(z.middleCols(0, h));
  gb.f = sigmoid(z.middleCols(h, h));
  gb.g = tanh(z.middleCols(2 * h, h));
  gb.o = sigmoid(z.middleCols(3 * h, h));
  return gb;
}

}  // namespace

LstmState cell_forward(const LstmParams& p, const Matrix& x_t, const LstmState& state) {
  check_params(p);
  const Index h = p.hidden_size();
  if (x_t.cols() != p.input_size()) {
    std::ostringstream msg;
    msg << "cell_forward: input width " << x_t.cols() << " != " << p.input_size();
    throw ShapeError(msg.str());
  }
  if (state.h.rows() != x_t.rows() || state.h.cols() != h ||
      state.c.rows() != x_t.rows() || state.c.cols() != h) {
    throw ShapeError("cell_forward: state shape does not match batch/hidden size");
  }
  GateBlocks gb = gates_forward(p, x_t, state.h);
  LstmState next;
  next.c = gb.f.cwiseProduct(state.c) + gb.i.cwiseProduct(gb.g);
  next.h = gb.o.cwiseProduct(tanh(next.c));
  return next;
}

PackedBatch forward_packed(const LstmParams& p, const PackedBatch& input,
                           const LstmState& initial, LstmCache* cache) {
  check_params(p);
  const Index h = p.hidden_size();
  if (input.time_steps() == 0) {
    throw std::invalid_argument("forward_packed: empty packed batch");
  }
  if (input.dim() != p.input_size()) {
    std::ostringstream msg;
    msg << "forward_packed: input width " << input.dim() << " != " << p.input_size();
    throw ShapeError(msg.str());
  }
  const Index b0 = input.batch_sizes.front();
  if (initial.h.rows() < b0 || initial.c.rows() < b0 ||
      initial.h.cols() != h || initial.c.cols() != h) {
    std::ostringstream msg;
    msg << "forward_packed: initial state covers " << initial.h.rows()
        << " rows, first batch size is " << b0;
    throw ShapeError(msg.str());
  }

  Matrix h_state = initial.h.topRows(b0);
  Matrix c_state = initial.c.topRows(b0);

  PackedBatch out;
  out.data.resize(input.total_rows(), h);
  out.batch_sizes = input.batch_sizes;
  out.sort_order = input.sort_order;

  if (cache) {
    cache->steps.clear();
    cache->steps.reserve(static_cast<std::size_t>(input.time_steps()));
    cache->hidden = h;
  }

  Index offset = 0;
  for (Index t = 0; t < input.time_steps(); ++t) {
    const Index rows = input.batch_sizes[static_cast<std::size_t>(t)];
    const auto x_t = input.data.middleRows(offset, rows);
    const auto h_prev = h_state.topRows(rows);
    const auto c_prev = c_state.topRows(rows);

    GateBlocks gb = gates_forward(p, x_t, h_prev);
    Matrix c_new = gb.f.cwiseProduct(c_prev) + gb.i.cwiseProduct(gb.g);
    Matrix tanh_c = tanh(c_new);
    Matrix h_new = gb.o.cwiseProduct(tanh_c);

    out.data.middleRows(offset, rows) = h_new;
    if (cache) {
      LstmCache::Step step;
      step.offset = offset;
      step.c_prev = c_prev;
      step.h_prev = h_prev;
      step.i = std::move(gb.i);
      step.f = std::move(gb.f);
      step.g = std::move(gb.g);
      step.o = std::move(gb.o);
      step.tanh_c = std::move(tanh_c);
      cache->steps.push_back(std::move(step));
    }
    h_state.topRows(rows) = h_new;
    c_state.topRows(rows) = c_new;
    offset += rows;
  }
  return out;
}

PackedBatch forward_packed(const LstmParams& p, const PackedBatch& input, LstmCache* cache) {
  const Index b0 = input.batch_sizes.empty() ? 0 : input.batch_sizes.front();
  return forward_packed(p, input, zero_state(b0, p.hidden_size()), cache);
}

LstmBackwardResult backward_packed(const LstmParams& p, const PackedBatch& input,
                                   const LstmCache& cache, const Matrix& grad_outputs) {
  check_params(p);
  const Index h = p.hidden_size();
  const Index t_max = input.time_steps();
  if (cache.hidden != h || static_cast<Index>(cache.steps.size()) != t_max) {
    throw std::invalid_argument("backward_packed: cache does not match input/params");
  }
  if (grad_outputs.rows() != input.total_rows() || grad_outputs.cols() != h) {
    std::ostringstream msg;
    msg << "backward_packed: grad_outputs is " << grad_outputs.rows() << "x"
        << grad_outputs.cols() << ", expected " << input.total_rows() << "x" << h;
    throw ShapeError(msg.str());
  }

  const Index b0 = input.batch_sizes.front();
  Matrix dh_carry = Matrix::Zero(b0, h);
  Matrix dc_carry = Matrix::Zero(b0, h);

  LstmBackwardResult res;
  res.grad.w_ih = Matrix::Zero(4 * h, p.input_size());
  res.grad.w_hh = Matrix::Zero(4 * h, h);
  res.grad.b = Vector::Zero(4 * h);
  res.grad_inputs.resize(input.total_rows(), p.input_size());

  Matrix dz(b0, 4 * h);
  for (Index t = t_max - 1; t >= 0; --t) {
    const auto& s = cache.steps[static_cast<std::size_t>(t)];
    const Index rows = input.batch_sizes[static_cast<std::size_t>(t)];

    // rows of dh/dc_carry beyond this step's prefix are untouched zeros until
    // the step where the corresponding sequence is last active
    Matrix dh = grad_outputs.middleRows(s.offset, rows) + dh_carry.topRows(rows);
    Matrix dct = dh.cwiseProduct(s.o).cwiseProduct(
                     (1.0 - s.tanh_c.array().square()).matrix()) +
                 dc_carry.topRows(rows);

    auto dz_t = dz.topRows(rows);
    // d(pre-activation) for each gate
    dz_t.middleCols(0, h) = dct.cwiseProduct(s.g).cwiseProduct(s.i).cwiseProduct(
        (1.0 - s.i.array()).matrix());
    dz_t.middleCols(h, h) = dct.cwiseProduct(s.c_prev).cwiseProduct(s.f).cwiseProduct(
        (1.0 - s.f.array()).matrix());
    dz_t.middleCols(2 * h, h) =
        dct.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
    dz_t.middleCols(3 * h, h) = dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o).cwiseProduct(
        (1.0 - s.o.array()).matrix());

    const auto x_t = input.data.middleRows(s.offset, rows);
    res.grad.w_ih.noalias() += dz_t.transpose() * x_t;
    res.grad.w_hh.noalias() += dz_t.transpose() * s.h_prev;
    res.grad.b += dz_t.colwise().sum().transpose();

    res.grad_inputs.middleRows(s.offset, rows).noalias() = dz_t * p.w_ih;
    dh_carry.topRows(rows).noalias() = dz_t * p.w_hh;
    dc_carry.topRows(rows) = dct.cwiseProduct(s.f);
  }
  return res;
}

}  // namespace vfl
