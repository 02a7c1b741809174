#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vfl/classifier.hpp"
#include "vfl/lstm.hpp"
#include "vfl/rng.hpp"

namespace vfl {

struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 300;
  int batch_size = 32;
  int eval_every = 20;  // validation cadence in epochs
  int folds = 5;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::kAverage;
  Index hidden_size = 256;
};

// FNV-1a over the canonical field serialization; stored in checkpoints so a
// reload can be matched to the run that produced it.
std::uint64_t config_fingerprint(const TrainConfig& cfg);

// The full trainable set: recurrent cell plus classification head. Also used
// as the container for gradients and Adam moments, which share these shapes.
struct Model {
  LstmParams lstm;
  DenseParams head;
};

Model init_model(Index input_size, Index hidden_size, Index classes, Rng& rng);

struct CrossEntropyResult {
  double loss = 0.0;
  Vector grad_logits;  // softmax(logits) - one_hot(label)
};

// loss = -logits[label] + log sum exp(logits), evaluated with max
// subtraction.
CrossEntropyResult cross_entropy(const Vector& logits, int label);

struct AdamState {
  Model m, v;  // first/second moments, zero-initialized
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState init_adam(const Model& model);

// One bias-corrected Adam update over every trainable array.
void adam_step(Model& params, const Model& grads, AdamState& state, double lr);

// Mean per-frame cross-entropy over the batch (every frame carries its
// video's label); fills parameter gradients when grads is non-null.
double batch_loss_and_grads(const Model& model,
                            const std::vector<const FeatureSequence*>& batch,
                            Model* grads);

// Shuffle, chunk into batches of <= batch_size, one adam_step per batch.
// Returns the frame-weighted mean loss of the epoch.
double train_epoch(Model& model, AdamState& adam,
                   const std::vector<FeatureSequence>& dataset,
                   const TrainConfig& cfg, Rng& rng);

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Stratified by label: per-class shuffle, then round-robin with the start
// fold rotating between classes so totals stay within +-1.
std::vector<FoldSplit> kfold_split(const std::vector<FeatureSequence>& dataset,
                                   int folds, std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<VideoPrediction> predictions;
};

EvalResult evaluate(const Model& model,
                    const std::vector<const FeatureSequence*>& videos,
                    Aggregation rule);

struct FoldResult {
  int fold_index = 0;
  Model best_model;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<std::pair<int, double>> eval_history;  // (epoch, val accuracy)
  std::vector<VideoPrediction> val_predictions;      // from the best model
};

struct CrossvalResult {
  std::vector<FoldResult> folds;
  std::vector<VideoPrediction> pooled;  // fold val predictions, fold order
};

// Per fold: fresh seeded init, train epochs, validate every eval_every
// epochs (and at the final epoch), keep the checkpoint with the highest
// validation accuracy (earlier epoch wins ties). jobs > 1 trains folds on
// parallel threads; per-fold streams keep the result identical either way.
CrossvalResult train_crossval(const std::vector<FeatureSequence>& dataset,
                              const TrainConfig& cfg, int jobs = 1);

}  // namespace vfl
