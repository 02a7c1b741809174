#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vfl/types.hpp"

namespace vfl {

// One video's spatial-feature sequence: T frames of D-dimensional features.
struct FeatureSequence {
  std::string video_id;
  int label = 0;  // 0 = benign, 1 = malignant
  Matrix frames;  // T x D
};

// Zero-padded batch: one T_max x D matrix per sequence; rows at or past the
// sequence's length are exactly zero.
struct PaddedBatch {
  std::vector<Matrix> data;    // B matrices, each T_max x D
  std::vector<Index> lengths;  // B frame counts, each >= 1

  Index size() const { return static_cast<Index>(lengths.size()); }
  Index max_len() const { return data.empty() ? 0 : data.front().rows(); }
  Index dim() const { return data.empty() ? 0 : data.front().cols(); }
};

// Column-tiled compressed batch. For each timestep t, data holds the frames
// of the first batch_sizes[t] sequences (the still-active prefix), so
// batch_sizes is non-increasing and sums to data.rows(). sort_order[j] is the
// original index of the sequence at sorted position j.
struct PackedBatch {
  Matrix data;                     // N_total x D
  std::vector<Index> batch_sizes;  // T_max entries
  std::vector<Index> sort_order;   // B entries

  Index total_rows() const { return data.rows(); }
  Index dim() const { return data.cols(); }
  Index time_steps() const { return static_cast<Index>(batch_sizes.size()); }
  Index batch() const { return static_cast<Index>(sort_order.size()); }
};

// Pads sequences to the batch's max length with zero rows.
PaddedBatch pad_sequences(const std::vector<const FeatureSequence*>& seqs);

// Stable sort by length, non-increasing. Returns the reordered batch and the
// permutation mapping sorted position -> original index.
std::pair<PaddedBatch, std::vector<Index>> sort_by_length(const PaddedBatch& batch);

// Compresses a length-sorted batch column-wise; sort_order is carried into
// the result (empty means identity). Throws std::invalid_argument when
// lengths are not non-increasing, naming the violating index.
PackedBatch pack(const PaddedBatch& sorted, std::vector<Index> sort_order = {});

// Inverse of pack followed by zero fill: every position past a sequence's
// length is exactly 0.
PaddedBatch unpack(const PackedBatch& packed);

// Undo sort_by_length: row j of `batch` returns to position sort_order[j].
PaddedBatch restore_order(const PaddedBatch& batch, const std::vector<Index>& sort_order);

}  // namespace vfl
