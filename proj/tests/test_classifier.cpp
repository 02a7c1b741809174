#include <doctest.h>

#include <vector>

#include "oracles.hpp"
#include "vfl/classifier.hpp"
#include "vfl/error.hpp"
#include "vfl/numeric.hpp"
#include "vfl/packed_seq.hpp"
#include "vfl/rng.hpp"

using vfl::Aggregation;
using vfl::DenseParams;
using vfl::Index;
using vfl::Matrix;
using vfl::PackedBatch;
using vfl::PaddedBatch;
using vfl::Vector;

namespace {

PackedBatch packed_rows(const Matrix& rows) {
  PaddedBatch batch;
  batch.data.push_back(rows);
  batch.lengths.push_back(rows.rows());
  return vfl::pack(batch);
}

DenseParams zero_head(Index classes, Index hidden) {
  DenseParams p;
  p.w = Matrix::Zero(classes, hidden);
  p.b = Vector::Zero(classes);
  return p;
}

}  // namespace

TEST_CASE("frame_logits: zero parameters give uniform softmax rows") {
  vfl::Rng rng(51);
  const PackedBatch hidden = packed_rows(oracle::random_matrix(rng, 3, 4));
  const PackedBatch logits = vfl::frame_logits(zero_head(2, 4), hidden);
  for (Index r = 0; r < logits.total_rows(); ++r) {
    const Vector p = vfl::softmax(logits.data.row(r).transpose());
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("frame_logits: identity weights pass hidden through") {
  DenseParams p = zero_head(2, 2);
  p.w = Matrix::Identity(2, 2);
  vfl::Rng rng(52);
  const PackedBatch hidden = packed_rows(oracle::random_matrix(rng, 4, 2));
  const PackedBatch logits = vfl::frame_logits(p, hidden);
  CHECK(oracle::bits_equal(logits.data, hidden.data));
  CHECK(logits.batch_sizes == hidden.batch_sizes);
  CHECK(logits.sort_order == hidden.sort_order);
}

TEST_CASE("frame_logits: random case equals a row-by-row affine oracle") {
  vfl::Rng rng(53);
  DenseParams p;
  p.w = oracle::random_matrix(rng, 2, 5);
  p.b.resize(2);
  p.b << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
  const PackedBatch hidden = packed_rows(oracle::random_matrix(rng, 6, 5));
  const PackedBatch logits = vfl::frame_logits(p, hidden);
  for (Index r = 0; r < hidden.total_rows(); ++r) {
    for (Index c = 0; c < 2; ++c) {
      double want = p.b[c];
      for (Index k = 0; k < 5; ++k) want += p.w(c, k) * hidden.data(r, k);
      CHECK(logits.data(r, c) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("frame_logits: hidden width mismatch") {
  vfl::Rng rng(54);
  const PackedBatch hidden = packed_rows(oracle::random_matrix(rng, 2, 3));
  CHECK_THROWS_AS(vfl::frame_logits(zero_head(2, 4), hidden), vfl::ShapeError);
}

TEST_CASE("aggregate_average: basic cases") {
  Matrix single(1, 2);
  single << 0.3, 0.7;
  CHECK((vfl::aggregate_average(single) - single.row(0).transpose()).cwiseAbs().maxCoeff() ==
        0.0);

  Matrix opposed(2, 2);
  opposed << 1, 0, 0, 1;
  const Vector mean = vfl::aggregate_average(opposed);
  CHECK(mean[0] == doctest::Approx(0.5));
  CHECK(mean[1] == doctest::Approx(0.5));

  Matrix three(3, 2);
  three << 0.9, 0.1, 0.6, 0.4, 0.3, 0.7;
  const Vector avg = vfl::aggregate_average(three);
  CHECK(avg[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(avg[1] == doctest::Approx(0.4).epsilon(1e-12));

  CHECK_THROWS_AS(vfl::aggregate_average(Matrix(0, 2)), std::invalid_argument);
}

TEST_CASE("aggregate_vote: hand count, singleton, tie") {
  Matrix probs(3, 2);
  probs << 0.1, 0.9, 0.2, 0.8, 0.7, 0.3;  // votes 1, 1, 0
  const Vector frac = vfl::aggregate_vote(probs);
  CHECK(frac[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(frac[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(vfl::argmax(frac) == 1);

  Matrix single(1, 2);
  single << 0.4, 0.6;
  const Vector one = vfl::aggregate_vote(single);
  CHECK(one[1] == 1.0);

  Matrix tied(4, 2);
  tied << 0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8;  // 2 vs 2
  const Vector t = vfl::aggregate_vote(tied);
  CHECK(vfl::argmax(t) == 0);

  CHECK_THROWS_AS(vfl::aggregate_vote(Matrix(0, 2)), std::invalid_argument);
}

TEST_CASE("aggregators: invariant to frame order") {
  vfl::Rng rng(55);
  Matrix probs(5, 2);
  for (Index r = 0; r < 5; ++r) {
    const double p = rng.uniform(0.0, 1.0);
    probs(r, 0) = p;
    probs(r, 1) = 1.0 - p;
  }
  Matrix shuffled = probs;
  shuffled.row(0).swap(shuffled.row(3));
  shuffled.row(1).swap(shuffled.row(4));
  CHECK((vfl::aggregate_average(probs) - vfl::aggregate_average(shuffled))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((vfl::aggregate_vote(probs) - vfl::aggregate_vote(shuffled)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("aggregate_average: argmax equals argmax of summed probabilities") {
  vfl::Rng rng(56);
  for (int n = 0; n < 20; ++n) {
    const auto t = static_cast<Index>(1 + rng.below(8));
    Matrix probs(t, 2);
    for (Index r = 0; r < t; ++r) {
      const double p = rng.uniform(0.0, 1.0);
      probs(r, 0) = p;
      probs(r, 1) = 1.0 - p;
    }
    const Vector avg = vfl::aggregate_average(probs);
    const Vector sum = probs.colwise().sum().transpose();
    CHECK(vfl::argmax(avg) == vfl::argmax(sum));
  }
}

TEST_CASE("aggregate_average: invariant to duplicating every frame") {
  vfl::Rng rng(57);
  Matrix probs(4, 2);
  for (Index r = 0; r < 4; ++r) {
    const double p = rng.uniform(0.0, 1.0);
    probs(r, 0) = p;
    probs(r, 1) = 1.0 - p;
  }
  const int k = 3;
  Matrix repeated(4 * k, 2);
  for (Index r = 0; r < 4; ++r)
    for (int c = 0; c < k; ++c) repeated.row(r * k + c) = probs.row(r);
  CHECK((vfl::aggregate_average(repeated) - vfl::aggregate_average(probs))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("predict_video: zero weights give the uniform prediction") {
  vfl::Rng rng(58);
  vfl::LstmParams lstm;
  lstm.w_ih = Matrix::Zero(8, 3);
  lstm.w_hh = Matrix::Zero(8, 2);
  lstm.b = Vector::Zero(8);
  const DenseParams head = zero_head(2, 2);
  vfl::FeatureSequence seq{"v0", 1, oracle::random_matrix(rng, 4, 3)};
  const vfl::VideoPrediction pred = vfl::predict_video(lstm, head, seq, Aggregation::kAverage);
  CHECK(pred.video_prob[0] == doctest::Approx(0.5));
  CHECK(pred.video_prob[1] == doctest::Approx(0.5));
  CHECK(pred.predicted_class == 0);
  CHECK(pred.true_label == 1);
}

TEST_CASE("predict_video: composition of the individual operations") {
  vfl::Rng rng(59);
  vfl::LstmParams lstm = vfl::init_lstm_params(3, 4, rng);
  DenseParams head = vfl::init_dense_params(2, 4, rng);
  vfl::FeatureSequence seq{"v1", 0, oracle::random_matrix(rng, 3, 3)};

  const vfl::VideoPrediction pred = vfl::predict_video(lstm, head, seq, Aggregation::kAverage);

  PaddedBatch batch;
  batch.data.push_back(seq.frames);
  batch.lengths.push_back(3);
  const PackedBatch logits = vfl::frame_logits(head, vfl::forward_packed(lstm, vfl::pack(batch)));
  Matrix probs(3, 2);
  for (Index r = 0; r < 3; ++r)
    probs.row(r) = vfl::softmax(logits.data.row(r).transpose()).transpose();
  const Vector want = vfl::aggregate_average(probs);

  CHECK((pred.frame_probs - probs).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pred.video_prob - want).cwiseAbs().maxCoeff() == 0.0);
  for (Index r = 0; r < 3; ++r) {
    CHECK(pred.frame_probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(pred.video_prob.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predict_video: vote rule matches aggregate_vote") {
  vfl::Rng rng(60);
  vfl::LstmParams lstm = vfl::init_lstm_params(2, 3, rng);
  DenseParams head = vfl::init_dense_params(2, 3, rng);
  vfl::FeatureSequence seq{"v2", 1, oracle::random_matrix(rng, 5, 2)};
  const vfl::VideoPrediction pred = vfl::predict_video(lstm, head, seq, Aggregation::kVote);
  CHECK((pred.video_prob - vfl::aggregate_vote(pred.frame_probs)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(pred.predicted_class == vfl::argmax(pred.video_prob));
}
