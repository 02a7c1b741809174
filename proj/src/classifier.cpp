#include "vfl/classifier.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vfl/error.hpp"
#include "vfl/numeric.hpp"

namespace vfl {

DenseParams init_dense_params(Index classes, Index hidden_size, Rng& rng) {
  if (classes < 2 || hidden_size < 1) {
    throw std::invalid_argument("init_dense_params: bad dimensions");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  DenseParams p;
  p.w.resize(classes, hidden_size);
  p.b.resize(classes);
  for (Index r = 0; r < classes; ++r)
    for (Index c = 0; c < hidden_size; ++c) p.w(r, c) = rng.uniform(-bound, bound);
  for (Index r = 0; r < classes; ++r) p.b[r] = rng.uniform(-bound, bound);
  return p;
}

PackedBatch frame_logits(const DenseParams& p, const PackedBatch& hidden) {
  if (hidden.dim() != p.hidden_size()) {
    std::ostringstream msg;
    msg << "frame_logits: hidden width " << hidden.dim() << " != " << p.hidden_size();
    throw ShapeError(msg.str());
  }
  PackedBatch out;
  out.data = hidden.data * p.w.transpose();
  out.data.rowwise() += p.b.transpose();
  out.batch_sizes = hidden.batch_sizes;
  out.sort_order = hidden.sort_order;
  return out;
}

Vector aggregate_average(const Matrix& frame_probs) {
  if (frame_probs.rows() == 0) {
    throw std::invalid_argument("aggregate_average: empty video");
  }
  return frame_probs.colwise().mean().transpose();
}

Vector aggregate_vote(const Matrix& frame_probs) {
  const Index t = frame_probs.rows();
  if (t == 0) {
    throw std::invalid_argument("aggregate_vote: empty video");
  }
  Vector fractions = Vector::Zero(frame_probs.cols());
  for (Index r = 0; r < t; ++r) {
    fractions[argmax(frame_probs.row(r).transpose())] += 1.0;
  }
  return fractions / static_cast<double>(t);
}

VideoPrediction predict_video(const LstmParams& lstm, const DenseParams& head,
                              const FeatureSequence& seq, Aggregation rule) {
  if (seq.frames.rows() < 1) {
    throw std::invalid_argument("predict_video: video '" + seq.video_id + "' has no frames");
  }
  PaddedBatch padded;
  padded.data.push_back(seq.frames);
  padded.lengths.push_back(seq.frames.rows());
  const PackedBatch hidden = forward_packed(lstm, pack(padded));
  const PackedBatch logits = frame_logits(head, hidden);

  VideoPrediction pred;
  pred.video_id = seq.video_id;
  pred.true_label = seq.label;
  pred.frame_probs.resize(logits.total_rows(), logits.dim());
  for (Index r = 0; r < logits.total_rows(); ++r) {
    pred.frame_probs.row(r) = softmax(logits.data.row(r).transpose()).transpose();
  }
  pred.video_prob = rule == Aggregation::kAverage ? aggregate_average(pred.frame_probs)
                                                  : aggregate_vote(pred.frame_probs);
  pred.predicted_class = static_cast<int>(argmax(pred.video_prob));
  return pred;
}

}  // namespace vfl
