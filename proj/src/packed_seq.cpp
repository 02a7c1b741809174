#include "vfl/packed_seq.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

void check_batch(const PaddedBatch& batch, const char* op) {
  if (batch.data.size() != batch.lengths.size()) {
    throw std::invalid_argument(std::string(op) + ": data/lengths size mismatch");
  }
  const Index t_max = batch.max_len();
  const Index dim = batch.dim();
  for (std::size_t i = 0; i < batch.data.size(); ++i) {
    if (batch.data[i].rows() != t_max || batch.data[i].cols() != dim) {
      throw std::invalid_argument(std::string(op) + ": ragged padded data");
    }
    if (batch.lengths[i] < 1 || batch.lengths[i] > t_max) {
      std::ostringstream msg;
      msg << op << ": length " << batch.lengths[i] << " outside [1, " << t_max
          << "] at index " << i;
      throw std::invalid_argument(msg.str());
    }
  }
}

void check_permutation(const std::vector<Index>& perm, Index n, const char* op) {
  if (static_cast<Index>(perm.size()) != n) {
    std::ostringstream msg;
    msg << op << ": permutation has " << perm.size() << " entries, batch has " << n;
    throw std::invalid_argument(msg.str());
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index j : perm) {
    if (j < 0 || j >= n || seen[static_cast<std::size_t>(j)]) {
      std::ostringstream msg;
      msg << op << ": sort_order is not a permutation of 0.." << (n - 1);
      throw std::invalid_argument(msg.str());
    }
    seen[static_cast<std::size_t>(j)] = true;
  }
}

}  // namespace

PaddedBatch pad_sequences(const std::vector<const FeatureSequence*>& seqs) {
  if (seqs.empty()) {
    throw std::invalid_argument("pad_sequences: empty batch");
  }
  Index t_max = 0;
  const Index dim = seqs.front()->frames.cols();
  for (const auto* s : seqs) {
    if (s->frames.rows() < 1) {
      throw std::invalid_argument("pad_sequences: sequence '" + s->video_id + "' has no frames");
    }
    if (s->frames.cols() != dim) {
      throw std::invalid_argument("pad_sequences: feature widths differ within batch");
    }
    t_max = std::max(t_max, s->frames.rows());
  }
  PaddedBatch out;
  out.data.reserve(seqs.size());
  out.lengths.reserve(seqs.size());
  for (const auto* s : seqs) {
    Matrix padded = Matrix::Zero(t_max, dim);
    padded.topRows(s->frames.rows()) = s->frames;
    out.data.push_back(std::move(padded));
    out.lengths.push_back(s->frames.rows());
  }
  return out;
}

std::pair<PaddedBatch, std::vector<Index>> sort_by_length(const PaddedBatch& batch) {
  const Index b = batch.size();
  if (b == 0) {
    throw std::invalid_argument("sort_by_length: empty batch");
  }
  check_batch(batch, "sort_by_length");
  std::vector<Index> order(static_cast<std::size_t>(b));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index lhs, Index rhs) {
    return batch.lengths[static_cast<std::size_t>(lhs)] >
           batch.lengths[static_cast<std::size_t>(rhs)];
  });
  PaddedBatch sorted;
  sorted.data.reserve(static_cast<std::size_t>(b));
  sorted.lengths.reserve(static_cast<std::size_t>(b));
  for (Index j : order) {
    sorted.data.push_back(batch.data[static_cast<std::size_t>(j)]);
    sorted.lengths.push_back(batch.lengths[static_cast<std::size_t>(j)]);
  }
  return {std::move(sorted), std::move(order)};
}

PackedBatch pack(const PaddedBatch& sorted, std::vector<Index> sort_order) {
  const Index b = sorted.size();
  if (b == 0) {
    throw std::invalid_argument("pack: empty batch");
  }
  check_batch(sorted, "pack");
  for (Index i = 1; i < b; ++i) {
    if (sorted.lengths[static_cast<std::size_t>(i)] >
        sorted.lengths[static_cast<std::size_t>(i - 1)]) {
      std::ostringstream msg;
      msg << "pack: lengths not non-increasing at index " << i;
      throw std::invalid_argument(msg.str());
    }
  }
  if (sort_order.empty()) {
    sort_order.resize(static_cast<std::size_t>(b));
    std::iota(sort_order.begin(), sort_order.end(), Index{0});
  }
  check_permutation(sort_order, b, "pack");

  const Index t_max = sorted.lengths.front();
  Index n_total = 0;
  for (Index len : sorted.lengths) n_total += len;

  PackedBatch packed;
  packed.data.resize(n_total, sorted.dim());
  packed.batch_sizes.reserve(static_cast<std::size_t>(t_max));
  packed.sort_order = std::move(sort_order);

  Index row = 0;
  for (Index t = 0; t < t_max; ++t) {
    Index active = 0;
    while (active < b && sorted.lengths[static_cast<std::size_t>(active)] > t) ++active;
    for (Index i = 0; i < active; ++i) {
      packed.data.row(row++) = sorted.data[static_cast<std::size_t>(i)].row(t);
    }
    packed.batch_sizes.push_back(active);
  }
  return packed;
}

PaddedBatch unpack(const PackedBatch& packed) {
  const Index t_max = packed.time_steps();
  if (t_max == 0 || packed.batch_sizes.front() == 0) {
    throw std::invalid_argument("unpack: empty packed batch");
  }
  Index sum = 0;
  for (Index t = 0; t < t_max; ++t) {
    const Index bs = packed.batch_sizes[static_cast<std::size_t>(t)];
    if (bs < 0 || (t > 0 && bs > packed.batch_sizes[static_cast<std::size_t>(t - 1)])) {
      throw std::invalid_argument("unpack: batch_sizes not non-increasing");
    }
    sum += bs;
  }
  if (sum != packed.data.rows()) {
    std::ostringstream msg;
    msg << "unpack: batch_sizes sum to " << sum << " but data has "
        << packed.data.rows() << " rows";
    throw std::invalid_argument(msg.str());
  }

  const Index b = packed.batch_sizes.front();
  PaddedBatch out;
  out.data.assign(static_cast<std::size_t>(b), Matrix::Zero(t_max, packed.dim()));
  out.lengths.assign(static_cast<std::size_t>(b), 0);
  for (Index i = 0; i < b; ++i) {
    Index len = 0;
    while (len < t_max && packed.batch_sizes[static_cast<std::size_t>(len)] > i) ++len;
    out.lengths[static_cast<std::size_t>(i)] = len;
  }
  Index row = 0;
  for (Index t = 0; t < t_max; ++t) {
    const Index active = packed.batch_sizes[static_cast<std::size_t>(t)];
    for (Index i = 0; i < active; ++i) {
      out.data[static_cast<std::size_t>(i)].row(t) = packed.data.row(row++);
    }
  }
  return out;
}

PaddedBatch restore_order(const PaddedBatch& batch, const std::vector<Index>& sort_order) {
  const Index b = batch.size();
  check_batch(batch, "restore_order");
  check_permutation(sort_order, b, "restore_order");
  PaddedBatch out;
  out.data.resize(static_cast<std::size_t>(b));
  out.lengths.resize(static_cast<std::size_t>(b));
  for (Index j = 0; j < b; ++j) {
    const auto dst = static_cast<std::size_t>(sort_order[static_cast<std::size_t>(j)]);
    out.data[dst] = batch.data[static_cast<std::size_t>(j)];
    out.lengths[dst] = batch.lengths[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace vfl
