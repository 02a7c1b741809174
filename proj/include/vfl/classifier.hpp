#pragma once

#include <string>

#include "vfl/lstm.hpp"
#include "vfl/packed_seq.hpp"
#include "vfl/types.hpp"

namespace vfl {

// Affine classification head, hidden vector -> class logits.
struct DenseParams {
  Matrix w;  // C x H
  Vector b;  // C

  Index classes() const { return w.rows(); }
  Index hidden_size() const { return w.cols(); }
};

DenseParams init_dense_params(Index classes, Index hidden_size, Rng& rng);

// How per-frame probabilities combine into one video decision.
enum class Aggregation { kAverage, kVote };

// Affine map per packed row; batch_sizes and sort_order pass through.
PackedBatch frame_logits(const DenseParams& p, const PackedBatch& hidden);

// Arithmetic mean of the frame probability rows.
Vector aggregate_average(const Matrix& frame_probs);

// Per-frame argmax votes as fractions; class ties resolve toward class 0 via
// the argmax tie rule.
Vector aggregate_vote(const Matrix& frame_probs);

struct VideoPrediction {
  std::string video_id;
  Matrix frame_probs;  // T x C, rows sum to 1
  Vector video_prob;   // C, sums to 1
  int predicted_class = 0;
  int true_label = 0;
};

// Single-sequence pipeline: packed LSTM forward, per-frame softmax,
// aggregation by rule.
VideoPrediction predict_video(const LstmParams& lstm, const DenseParams& head,
                              const FeatureSequence& seq, Aggregation rule);

}  // namespace vfl
