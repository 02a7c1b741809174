#include "vfl/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "vfl/error.hpp"
#include "vfl/numeric.hpp"

namespace vfl {

namespace {

void check_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be > 0");
  if (cfg.epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (cfg.eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  if (cfg.folds < 2) throw std::invalid_argument("config: folds must be >= 2");
  if (cfg.hidden_size < 1) throw std::invalid_argument("config: hidden_size must be >= 1");
}

void fnv_mix(std::uint64_t& h, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffULL;
    h *= 0x100000001b3ULL;
  }
}

std::uint64_t double_bits(double d) {
  std::uint64_t u;
  static_assert(sizeof(u) == sizeof(d));
  std::memcpy(&u, &d, sizeof(u));
  return u;
}

template <typename Fn>
void zip_params(Model& a, const Model& b, Model& c, Model& d, Fn&& fn) {
  fn(a.lstm.w_ih, b.lstm.w_ih, c.lstm.w_ih, d.lstm.w_ih);
  fn(a.lstm.w_hh, b.lstm.w_hh, c.lstm.w_hh, d.lstm.w_hh);
  fn(a.lstm.b, b.lstm.b, c.lstm.b, d.lstm.b);
  fn(a.head.w, b.head.w, c.head.w, d.head.w);
  fn(a.head.b, b.head.b, c.head.b, d.head.b);
}

}  // namespace

std::uint64_t config_fingerprint(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, double_bits(cfg.learning_rate));
  fnv_mix(h, static_cast<std::uint64_t>(cfg.epochs));
  fnv_mix(h, static_cast<std::uint64_t>(cfg.batch_size));
  fnv_mix(h, static_cast<std::uint64_t>(cfg.eval_every));
  fnv_mix(h, static_cast<std::uint64_t>(cfg.folds));
  fnv_mix(h, cfg.seed);
  fnv_mix(h, cfg.aggregation == Aggregation::kAverage ? 0 : 1);
  fnv_mix(h, static_cast<std::uint64_t>(cfg.hidden_size));
  return h;
}

Model init_model(Index input_size, Index hidden_size, Index classes, Rng& rng) {
  Model m;
  m.lstm = init_lstm_params(input_size, hidden_size, rng);
  m.head = init_dense_params(classes, hidden_size, rng);
  return m;
}

CrossEntropyResult cross_entropy(const Vector& logits, int label) {
  const Index n = logits.size();
  if (label < 0 || label >= n) {
    std::ostringstream msg;
    msg << "cross_entropy: label " << label << " out of range for " << n << " logits";
    throw std::invalid_argument(msg.str());
  }
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  CrossEntropyResult res;
  res.loss = lse - logits[label];
  res.grad_logits = softmax(logits);
  res.grad_logits[label] -= 1.0;
  return res;
}

AdamState init_adam(const Model& model) {
  auto zeros_like = [](const Model& m) {
    Model z;
    z.lstm.w_ih = Matrix::Zero(m.lstm.w_ih.rows(), m.lstm.w_ih.cols());
    z.lstm.w_hh = Matrix::Zero(m.lstm.w_hh.rows(), m.lstm.w_hh.cols());
    z.lstm.b = Vector::Zero(m.lstm.b.size());
    z.head.w = Matrix::Zero(m.head.w.rows(), m.head.w.cols());
    z.head.b = Vector::Zero(m.head.b.size());
    return z;
  };
  AdamState st;
  st.m = zeros_like(model);
  st.v = zeros_like(model);
  return st;
}

void adam_step(Model& params, const Model& grads, AdamState& state, double lr) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
  zip_params(params, grads, state.m, state.v,
             [&](auto& theta, const auto& g, auto& m, auto& v) {
               if (theta.rows() != g.rows() || theta.cols() != g.cols()) {
                 throw ShapeError("adam_step: gradient shape does not match parameter");
               }
               m = b1 * m + (1.0 - b1) * g;
               v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
               theta.array() -=
                   lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
             });
}

double batch_loss_and_grads(const Model& model,
                            const std::vector<const FeatureSequence*>& batch,
                            Model* grads) {
  const PaddedBatch padded = pad_sequences(batch);
  auto [sorted, order] = sort_by_length(padded);
  const PackedBatch packed = pack(sorted, order);

  LstmCache cache;
  const PackedBatch hidden =
      forward_packed(model.lstm, packed, grads ? &cache : nullptr);
  const PackedBatch logits = frame_logits(model.head, hidden);

  const Index n = logits.total_rows();
  Matrix dlogits;
  if (grads) dlogits.setZero(n, logits.dim());

  double loss_sum = 0.0;
  Index row = 0;
  for (Index t = 0; t < logits.time_steps(); ++t) {
    const Index active = logits.batch_sizes[static_cast<std::size_t>(t)];
    for (Index i = 0; i < active; ++i, ++row) {
      const auto orig = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
      const CrossEntropyResult ce =
          cross_entropy(logits.data.row(row).transpose(), batch[orig]->label);
      loss_sum += ce.loss;
      if (grads) dlogits.row(row) = ce.grad_logits.transpose() / static_cast<double>(n);
    }
  }

  if (grads) {
    grads->head.w.noalias() = dlogits.transpose() * hidden.data;
    grads->head.b = dlogits.colwise().sum().transpose();
    const Matrix dhidden = dlogits * model.head.w;
    LstmBackwardResult back = backward_packed(model.lstm, packed, cache, dhidden);
    grads->lstm = std::move(back.grad);
  }
  return loss_sum / static_cast<double>(n);
}

double train_epoch(Model& model, AdamState& adam,
                   const std::vector<FeatureSequence>& dataset,
                   const TrainConfig& cfg, Rng& rng) {
  if (dataset.empty()) {
    throw std::invalid_argument("train_epoch: empty dataset");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train_epoch: batch_size must be >= 1");
  }
  std::vector<Index> order(dataset.size());
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);

  double loss_sum = 0.0;
  Index frames_total = 0;
  Model grads;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
    std::vector<const FeatureSequence*> batch;
    batch.reserve(end - start);
    Index frames = 0;
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(&dataset[static_cast<std::size_t>(order[k])]);
      frames += batch.back()->frames.rows();
    }
    const double mean_loss = batch_loss_and_grads(model, batch, &grads);
    adam_step(model, grads, adam, cfg.learning_rate);
    loss_sum += mean_loss * static_cast<double>(frames);
    frames_total += frames;
  }
  return loss_sum / static_cast<double>(frames_total);
}

std::vector<FoldSplit> kfold_split(const std::vector<FeatureSequence>& dataset,
                                   int folds, std::uint64_t seed) {
  const auto n = dataset.size();
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  if (n < static_cast<std::size_t>(folds)) {
    std::ostringstream msg;
    msg << "kfold_split: dataset of " << n << " videos is smaller than " << folds << " folds";
    throw std::invalid_argument(msg.str());
  }

  Rng rng(seed);
  std::vector<int> fold_of(n, -1);
  int next_start = 0;
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (dataset[i].label == label) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) {
      fold_of[members[j]] = (next_start + static_cast<int>(j)) % folds;
    }
    next_start = (next_start + static_cast<int>(members.size())) % folds;
  }

  std::vector<FoldSplit> splits(static_cast<std::size_t>(folds));
  for (int k = 0; k < folds; ++k) splits[static_cast<std::size_t>(k)].fold_index = k;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < folds; ++k) {
      auto& split = splits[static_cast<std::size_t>(k)];
      (fold_of[i] == k ? split.val_ids : split.train_ids).push_back(dataset[i].video_id);
    }
  }
  return splits;
}

EvalResult evaluate(const Model& model,
                    const std::vector<const FeatureSequence*>& videos,
                    Aggregation rule) {
  if (videos.empty()) {
    throw std::invalid_argument("evaluate: empty video set");
  }
  EvalResult res;
  res.predictions.reserve(videos.size());
  Index correct = 0;
  for (const auto* v : videos) {
    res.predictions.push_back(predict_video(model.lstm, model.head, *v, rule));
    if (res.predictions.back().predicted_class == v->label) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(videos.size());
  return res;
}

namespace {

FoldResult train_fold(const std::vector<FeatureSequence>& dataset,
                      const FoldSplit& split, const TrainConfig& cfg) {
  std::unordered_map<std::string, const FeatureSequence*> by_id;
  for (const auto& seq : dataset) by_id.emplace(seq.video_id, &seq);

  std::vector<FeatureSequence> train_set;
  train_set.reserve(split.train_ids.size());
  for (const auto& id : split.train_ids) train_set.push_back(*by_id.at(id));
  std::vector<const FeatureSequence*> val_set;
  val_set.reserve(split.val_ids.size());
  for (const auto& id : split.val_ids) val_set.push_back(by_id.at(id));

  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(split.fold_index)));
  Model model = init_model(dataset.front().frames.cols(), cfg.hidden_size, 2, rng);
  AdamState adam = init_adam(model);

  FoldResult res;
  res.fold_index = split.fold_index;
  res.best_val_accuracy = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    train_epoch(model, adam, train_set, cfg, rng);
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      EvalResult eval = evaluate(model, val_set, cfg.aggregation);
      res.eval_history.emplace_back(epoch, eval.accuracy);
      if (eval.accuracy > res.best_val_accuracy) {
        res.best_val_accuracy = eval.accuracy;
        res.best_epoch = epoch;
        res.best_model = model;
        res.val_predictions = std::move(eval.predictions);
      }
    }
  }
  return res;
}

}  // namespace

CrossvalResult train_crossval(const std::vector<FeatureSequence>& dataset,
                              const TrainConfig& cfg, int jobs) {
  check_config(cfg);
  const std::vector<FoldSplit> splits = kfold_split(dataset, cfg.folds, cfg.seed);

  CrossvalResult res;
  res.folds.resize(splits.size());

  if (jobs <= 1) {
    for (std::size_t k = 0; k < splits.size(); ++k) {
      res.folds[k] = train_fold(dataset, splits[k], cfg);
    }
  } else {
    std::vector<std::exception_ptr> errors(splits.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= splits.size()) return;
        try {
          res.folds[k] = train_fold(dataset, splits[k], cfg);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(splits.size()));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  for (const auto& fold : res.folds) {
    res.pooled.insert(res.pooled.end(), fold.val_predictions.begin(),
                      fold.val_predictions.end());
  }
  return res;
}

}  // namespace vfl
