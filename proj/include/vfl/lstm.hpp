#pragma once

#include <vector>

#include "vfl/packed_seq.hpp"
#include "vfl/rng.hpp"
#include "vfl/types.hpp"

namespace vfl {

// Gate blocks stack along the 4H axis in i, f, g, o order.
struct LstmParams {
  Matrix w_ih;  // 4H x D
  Matrix w_hh;  // 4H x H
  Vector b;     // 4H

  Index hidden_size() const { return w_hh.cols(); }
  Index input_size() const { return w_ih.cols(); }
};

struct LstmState {
  Matrix h;  // B x H
  Matrix c;  // B x H
};

// Weights uniform in [-1/sqrt(H), +1/sqrt(H)] so early gates stay unsaturated.
LstmParams init_lstm_params(Index input_size, Index hidden_size, Rng& rng);

LstmState zero_state(Index batch, Index hidden_size);

// One step over a B x D input slab:
//   z = x W_ih' + h W_hh' + b, split into (i,f,g,o)
//   c' = sigmoid(f) (.) c + sigmoid(i) (.) tanh(g)
//   h' = sigmoid(o) (.) tanh(c')
LstmState cell_forward(const LstmParams& p, const Matrix& x_t, const LstmState& state);

// Per-timestep activations captured during forward_packed, replayed by
// backward_packed. Gate matrices hold post-nonlinearity values.
struct LstmCache {
  struct Step {
    Index offset = 0;  // first packed row of this timestep
    Matrix i, f, g, o;  // rows x H
    Matrix c_prev, tanh_c, h_prev;
  };
  std::vector<Step> steps;
  Index hidden = 0;
};

// Runs the cell over the still-active prefix at every timestep; padding never
// enters the arithmetic. Output carries the input's batch_sizes and
// sort_order with D_out = H. The initial state must cover at least
// batch_sizes[0] rows.
PackedBatch forward_packed(const LstmParams& p, const PackedBatch& input,
                           const LstmState& initial, LstmCache* cache = nullptr);

// Zero initial state.
PackedBatch forward_packed(const LstmParams& p, const PackedBatch& input,
                           LstmCache* cache = nullptr);

struct LstmBackwardResult {
  LstmParams grad;     // gradients in parameter shapes
  Matrix grad_inputs;  // N_total x D, packed layout of the input
};

// Exact reverse-mode gradients through the same active-prefix schedule.
// grad_outputs is N_total x H in the packed layout of the forward output.
LstmBackwardResult backward_packed(const LstmParams& p, const PackedBatch& input,
                                   const LstmCache& cache, const Matrix& grad_outputs);

}  // namespace vfl
