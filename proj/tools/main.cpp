// vflstm: variable-frame sequence classification pipeline.
//
// Subcommands: synth (synthetic dataset), crossval (k-fold training),
// eval (checkpoint evaluation + reports), packcheck (packed-vs-sequential
// and gradient self-checks).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfl/classifier.hpp"
#include "vfl/data_io.hpp"
#include "vfl/lstm.hpp"
#include "vfl/metrics.hpp"
#include "vfl/npy.hpp"
#include "vfl/packed_seq.hpp"
#include "vfl/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

vfl::RankedPredictions ranked_from(const std::vector<vfl::VideoPrediction>& preds) {
  vfl::RankedPredictions ranked;
  ranked.reserve(preds.size());
  for (const auto& p : preds) {
    ranked.push_back({p.video_prob[1], p.true_label});
  }
  return ranked;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << content;
}

void write_report_pair(const fs::path& dir, const std::string& stem,
                       const vfl::MetricsReport& report, json& emitted_paths) {
  const fs::path txt = dir / (stem + ".txt");
  const fs::path js = dir / (stem + ".json");
  write_text(txt, vfl::to_keyvalue(report));
  write_text(js, vfl::to_json(report));
  emitted_paths.push_back(txt.string());
  emitted_paths.push_back(js.string());
}

std::optional<double> average_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

json fold_summary(const vfl::FoldResult& fold) {
  json j;
  j["fold"] = fold.fold_index;
  j["best_epoch"] = fold.best_epoch;
  j["best_val_accuracy"] = fold.best_val_accuracy;
  json history = json::array();
  for (const auto& [epoch, acc] : fold.eval_history) {
    history.push_back({{"epoch", epoch}, {"accuracy", acc}});
  }
  j["eval_history"] = std::move(history);
  return j;
}

vfl::Aggregation parse_aggregation(const std::string& name) {
  if (name == "average") return vfl::Aggregation::kAverage;
  if (name == "vote") return vfl::Aggregation::kVote;
  throw CLI::ValidationError("--aggregation must be 'average' or 'vote'");
}

int cmd_synth(const fs::path& out_dir, const vfl::SyntheticConfig& cfg) {
  const fs::path manifest = vfl::generate_synthetic(cfg, out_dir);
  std::cout << "manifest: " << manifest.string() << "\n"
            << "videos: " << (cfg.num_benign + cfg.num_malignant) << " ("
            << cfg.num_benign << " benign, " << cfg.num_malignant << " malignant)\n";
  return 0;
}

int cmd_crossval(const fs::path& manifest, const fs::path& out_dir,
                 const vfl::TrainConfig& cfg, double threshold, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<vfl::FeatureSequence> dataset = vfl::load_dataset(manifest);
  const vfl::CrossvalResult result = vfl::train_crossval(dataset, cfg, jobs);
  fs::create_directories(out_dir);

  json report;
  report["command"] = "crossval";
  report["config"] = {{"learning_rate", cfg.learning_rate},
                      {"epochs", cfg.epochs},
                      {"batch_size", cfg.batch_size},
                      {"eval_every", cfg.eval_every},
                      {"folds", cfg.folds},
                      {"seed", cfg.seed},
                      {"hidden_size", cfg.hidden_size},
                      {"aggregation",
                       cfg.aggregation == vfl::Aggregation::kAverage ? "average" : "vote"},
                      {"threshold", threshold},
                      {"jobs", jobs},
                      {"manifest", manifest.string()}};
  json paths = json::array();
  json folds = json::array();

  std::vector<std::optional<double>> acc, prec, sens, spec, f1, aucs, aps;
  vfl::ConfusionMatrix summed;
  for (const auto& fold : result.folds) {
    vfl::Checkpoint ckpt;
    ckpt.lstm = fold.best_model.lstm;
    ckpt.head = fold.best_model.head;
    ckpt.config_fingerprint = vfl::config_fingerprint(cfg);
    ckpt.fold_index = fold.fold_index;
    ckpt.best_val_accuracy = fold.best_val_accuracy;
    ckpt.epoch = fold.best_epoch;
    const fs::path ckpt_path = out_dir / ("fold_" + std::to_string(fold.fold_index) + ".ckpt");
    vfl::save_checkpoint(ckpt_path, ckpt);
    paths.push_back(ckpt_path.string());

    const vfl::MetricsReport fold_report =
        vfl::compute_report(ranked_from(fold.val_predictions), threshold);
    write_report_pair(out_dir, "metrics_fold_" + std::to_string(fold.fold_index),
                      fold_report, paths);
    acc.push_back(fold_report.accuracy);
    prec.push_back(fold_report.precision);
    sens.push_back(fold_report.sensitivity);
    spec.push_back(fold_report.specificity);
    f1.push_back(fold_report.f1);
    aucs.push_back(fold_report.auc);
    aps.push_back(fold_report.ap);
    summed.tp += fold_report.cm.tp;
    summed.tn += fold_report.cm.tn;
    summed.fp += fold_report.cm.fp;
    summed.fn += fold_report.cm.fn;

    folds.push_back(fold_summary(fold));
  }

  const vfl::RankedPredictions pooled = ranked_from(result.pooled);
  const vfl::MetricsReport pooled_report = vfl::compute_report(pooled, threshold);
  write_report_pair(out_dir, "metrics_pooled", pooled_report, paths);

  // per-fold-averaged scalars; counts are the across-fold sums
  vfl::MetricsReport foldavg;
  foldavg.cm = summed;
  foldavg.accuracy = average_defined(acc);
  foldavg.precision = average_defined(prec);
  foldavg.sensitivity = average_defined(sens);
  foldavg.specificity = average_defined(spec);
  foldavg.f1 = average_defined(f1);
  foldavg.auc = average_defined(aucs);
  foldavg.ap = average_defined(aps);
  write_report_pair(out_dir, "metrics_foldavg", foldavg, paths);

  try {
    vfl::write_curve_csv(out_dir / "pr_curve.csv", vfl::pr_curve(pooled));
    vfl::write_curve_csv(out_dir / "roc_curve.csv", vfl::roc_curve(pooled));
    paths.push_back((out_dir / "pr_curve.csv").string());
    paths.push_back((out_dir / "roc_curve.csv").string());
  } catch (const std::invalid_argument& e) {
    std::cerr << "note: curves skipped: " << e.what() << "\n";
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report["folds"] = std::move(folds);
  report["pooled_accuracy"] =
      pooled_report.accuracy ? json(*pooled_report.accuracy) : json(nullptr);
  report["outputs"] = std::move(paths);
  report["wall_time_seconds"] = wall;
  write_text(out_dir / "run_report.json", report.dump(2) + "\n");

  std::cout << "pooled accuracy: "
            << (pooled_report.accuracy ? *pooled_report.accuracy : 0.0) << "\n";
  for (const auto& fold : result.folds) {
    std::cout << "fold " << fold.fold_index << ": best epoch " << fold.best_epoch
              << ", val accuracy " << fold.best_val_accuracy << "\n";
  }
  std::cout << "outputs in " << out_dir.string() << " (" << wall << " s)\n";
  return 0;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& manifest, const fs::path& out_dir,
             double threshold, vfl::Aggregation rule) {
  const auto t0 = std::chrono::steady_clock::now();
  const vfl::Checkpoint ckpt = vfl::load_checkpoint(ckpt_path);
  const std::vector<vfl::FeatureSequence> dataset = vfl::load_dataset(manifest);
  if (!dataset.empty() && dataset.front().frames.cols() != ckpt.lstm.input_size()) {
    std::ostringstream msg;
    msg << "checkpoint expects " << ckpt.lstm.input_size()
        << "-dimensional features but " << manifest.string() << " provides "
        << dataset.front().frames.cols() << "-dimensional ones";
    throw std::runtime_error(msg.str());
  }
  fs::create_directories(out_dir);

  std::vector<vfl::VideoPrediction> predictions;
  predictions.reserve(dataset.size());
  for (const auto& seq : dataset) {
    predictions.push_back(vfl::predict_video(ckpt.lstm, ckpt.head, seq, rule));
  }
  const vfl::RankedPredictions ranked = ranked_from(predictions);
  const vfl::MetricsReport metrics = vfl::compute_report(ranked, threshold);

  json paths = json::array();
  write_report_pair(out_dir, "metrics", metrics, paths);

  {
    std::ostringstream os;
    os << "tp=" << metrics.cm.tp << " tn=" << metrics.cm.tn << " fp=" << metrics.cm.fp
       << " fn=" << metrics.cm.fn << "\n";
    try {
      const Eigen::Matrix2d norm = vfl::normalized_confusion(metrics.cm);
      os.precision(9);
      os << "normalized rows (actual negative, actual positive):\n"
         << norm(0, 0) << " " << norm(0, 1) << "\n"
         << norm(1, 0) << " " << norm(1, 1) << "\n";
    } catch (const std::invalid_argument&) {
      os << "normalized confusion undefined (an actual class is empty)\n";
    }
    write_text(out_dir / "confusion.txt", os.str());
    paths.push_back((out_dir / "confusion.txt").string());
  }

  try {
    vfl::write_curve_csv(out_dir / "pr_curve.csv", vfl::pr_curve(ranked));
    vfl::write_curve_csv(out_dir / "roc_curve.csv", vfl::roc_curve(ranked));
    paths.push_back((out_dir / "pr_curve.csv").string());
    paths.push_back((out_dir / "roc_curve.csv").string());
  } catch (const std::invalid_argument& e) {
    std::cerr << "note: curves skipped: " << e.what() << "\n";
  }

  {
    const vfl::ProbBuckets buckets = vfl::prob_distribution(ranked, threshold);
    std::ostringstream os;
    os.precision(9);
    os << "bucket,score\n";
    auto dump = [&os](const char* name, const std::vector<double>& scores) {
      for (double s : scores) os << name << ',' << s << '\n';
    };
    dump("tp", buckets.tp);
    dump("tn", buckets.tn);
    dump("fp", buckets.fp);
    dump("fn", buckets.fn);
    write_text(out_dir / "prob_distribution.csv", os.str());
    paths.push_back((out_dir / "prob_distribution.csv").string());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json report;
  report["command"] = "eval";
  report["checkpoint"] = ckpt_path.string();
  report["manifest"] = manifest.string();
  report["threshold"] = threshold;
  report["aggregation"] = rule == vfl::Aggregation::kAverage ? "average" : "vote";
  report["fold_index"] = ckpt.fold_index;
  report["checkpoint_epoch"] = ckpt.epoch;
  report["accuracy"] = metrics.accuracy ? json(*metrics.accuracy) : json(nullptr);
  report["outputs"] = std::move(paths);
  report["wall_time_seconds"] = wall;
  write_text(out_dir / "run_report.json", report.dump(2) + "\n");

  std::cout << "evaluated " << dataset.size() << " videos; accuracy "
            << (metrics.accuracy ? *metrics.accuracy : 0.0) << "\n"
            << "outputs in " << out_dir.string() << "\n";
  return 0;
}

struct PackcheckConfig {
  int instances = 100;
  int grad_instances = 20;
  int max_batch = 8;
  int max_len = 10;
  int dim = 8;
  int hidden = 6;
  std::uint64_t seed = 7;
  bool corrupt = false;
};

// Packed forward vs independent per-sequence loop, then full-model analytic
// gradients vs central finite differences.
int cmd_packcheck(const PackcheckConfig& pc) {
  vfl::Rng rng(pc.seed);
  const double fwd_tol = 1e-10;
  const double grad_tol = 1e-6;

  auto random_sequences = [&](bool mixed_lengths) {
    const int b = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(pc.max_batch)));
    std::vector<vfl::FeatureSequence> seqs;
    for (int i = 0; i < b; ++i) {
      const auto t =
          1 + static_cast<vfl::Index>(rng.below(static_cast<std::uint64_t>(pc.max_len)));
      vfl::FeatureSequence seq;
      seq.video_id = "s" + std::to_string(i);
      seq.label = static_cast<int>(rng.below(2));
      seq.frames.resize(t, pc.dim);
      for (vfl::Index r = 0; r < seq.frames.rows(); ++r)
        for (vfl::Index c = 0; c < seq.frames.cols(); ++c)
          seq.frames(r, c) = rng.uniform(-1.0, 1.0);
      seqs.push_back(std::move(seq));
    }
    if (mixed_lengths && seqs.size() > 1) {
      // the corrupt hook rewrites the schedule; equal lengths would make the
      // rewritten schedule coincide with the true one
      seqs[0].frames.conservativeResize(pc.max_len, pc.dim);
      for (vfl::Index r = 0; r < seqs[0].frames.rows(); ++r)
        for (vfl::Index c = 0; c < seqs[0].frames.cols(); ++c)
          seqs[0].frames(r, c) = rng.uniform(-1.0, 1.0);
      seqs[1].frames.conservativeResize(1, pc.dim);
    }
    return seqs;
  };

  double max_fwd_dev = 0.0;
  for (int n = 0; n < pc.instances; ++n) {
    const auto seqs = random_sequences(pc.corrupt && pc.max_len > 1);
    vfl::LstmParams params = vfl::init_lstm_params(pc.dim, pc.hidden, rng);

    std::vector<const vfl::FeatureSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    auto [sorted, order] = vfl::sort_by_length(vfl::pad_sequences(ptrs));
    vfl::PackedBatch packed = vfl::pack(sorted, order);
    if (pc.corrupt) {
      // test hook: replace the schedule with a greedy one of equal total
      std::vector<vfl::Index> bogus;
      vfl::Index left = packed.total_rows();
      const vfl::Index b0 = packed.batch_sizes.front();
      while (left > 0) {
        const vfl::Index take = std::min(b0, left);
        bogus.push_back(take);
        left -= take;
      }
      packed.batch_sizes = std::move(bogus);
    }
    const vfl::PackedBatch out = vfl::forward_packed(params, packed);

    // oracle: each sequence independently, one cell step per frame
    vfl::PaddedBatch expected;
    expected.data.resize(sorted.data.size());
    expected.lengths = sorted.lengths;
    for (std::size_t i = 0; i < sorted.data.size(); ++i) {
      const vfl::Index len = sorted.lengths[i];
      vfl::LstmState state = vfl::zero_state(1, pc.hidden);
      vfl::Matrix hs(len, pc.hidden);
      for (vfl::Index t = 0; t < len; ++t) {
        state = vfl::cell_forward(params, sorted.data[i].row(t), state);
        hs.row(t) = state.h.row(0);
      }
      expected.data[i] = hs;
    }

    const vfl::PaddedBatch got = vfl::unpack(out);
    for (std::size_t i = 0; i < expected.data.size(); ++i) {
      if (got.lengths[i] != expected.lengths[i]) {
        // a rewritten schedule redistributes rows across sequences
        max_fwd_dev = std::max(max_fwd_dev, 1.0);
        continue;
      }
      for (vfl::Index t = 0; t < expected.lengths[i]; ++t) {
        for (vfl::Index c = 0; c < pc.hidden; ++c) {
          const double ref = expected.data[i](t, c);
          const double dev = std::abs(got.data[i](t, c) - ref) / std::max(1.0, std::abs(ref));
          max_fwd_dev = std::max(max_fwd_dev, dev);
        }
      }
    }
  }
  std::cout << "forward: max deviation " << max_fwd_dev << " over " << pc.instances
            << " instances (tolerance " << fwd_tol << ")\n";

  double max_grad_dev = 0.0;
  for (int n = 0; n < pc.grad_instances; ++n) {
    const auto seqs = random_sequences(false);
    std::vector<const vfl::FeatureSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    vfl::Model model;
    model.lstm = vfl::init_lstm_params(pc.dim, pc.hidden, rng);
    model.head = vfl::init_dense_params(2, pc.hidden, rng);

    vfl::Model grads;
    vfl::batch_loss_and_grads(model, ptrs, &grads);

    const double step = 1e-5;
    auto check_block = [&](auto& theta, const auto& g) {
      for (vfl::Index k = 0; k < theta.size(); ++k) {
        double* entry = theta.data() + k;
        const double saved = *entry;
        *entry = saved + step;
        const double up = vfl::batch_loss_and_grads(model, ptrs, nullptr);
        *entry = saved - step;
        const double down = vfl::batch_loss_and_grads(model, ptrs, nullptr);
        *entry = saved;
        const double fd = (up - down) / (2.0 * step);
        const double analytic = *(g.data() + k);
        const double dev =
            std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        max_grad_dev = std::max(max_grad_dev, dev);
      }
    };
    check_block(model.lstm.w_ih, grads.lstm.w_ih);
    check_block(model.lstm.w_hh, grads.lstm.w_hh);
    check_block(model.lstm.b, grads.lstm.b);
    check_block(model.head.w, grads.head.w);
    check_block(model.head.b, grads.head.b);
  }
  std::cout << "gradients: max deviation " << max_grad_dev << " over " << pc.grad_instances
            << " instances (tolerance " << grad_tol << ")\n";

  const bool ok = max_fwd_dev < fwd_tol && max_grad_dev < grad_tol;
  std::cout << (ok ? "packcheck: PASS\n" : "packcheck: FAIL\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variable-frame LSTM sequence classification"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic feature dataset");
  std::string synth_out;
  vfl::SyntheticConfig synth_cfg;
  std::vector<vfl::Index> frames{synth_cfg.min_frames, synth_cfg.max_frames};
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--benign", synth_cfg.num_benign, "benign video count");
  synth->add_option("--malignant", synth_cfg.num_malignant, "malignant video count");
  synth->add_option("--frames", frames, "min and max frame count")->expected(2);
  synth->add_option("--dim", synth_cfg.feature_dim, "feature width");
  synth->add_option("--separation", synth_cfg.class_separation, "class mean separation");
  synth->add_option("--noise", synth_cfg.noise_scale, "noise standard deviation");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");

  // crossval
  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validated training");
  std::string cv_manifest, cv_out, cv_agg = "average";
  vfl::TrainConfig cv_cfg;
  cv_cfg.seed = 42;
  double cv_threshold = 0.5;
  int cv_jobs = 1;
  crossval->add_option("--manifest", cv_manifest, "dataset manifest CSV")->required();
  crossval->add_option("--out", cv_out, "output directory")->required();
  crossval->add_option("--lr", cv_cfg.learning_rate, "learning rate");
  crossval->add_option("--epochs", cv_cfg.epochs, "training epochs per fold");
  crossval->add_option("--batch-size", cv_cfg.batch_size, "videos per batch");
  crossval->add_option("--eval-every", cv_cfg.eval_every, "validation cadence in epochs");
  crossval->add_option("--folds", cv_cfg.folds, "cross-validation folds");
  crossval->add_option("--seed", cv_cfg.seed, "run seed");
  crossval->add_option("--hidden", cv_cfg.hidden_size, "LSTM hidden size");
  crossval->add_option("--aggregation", cv_agg, "average|vote");
  crossval->add_option("--threshold", cv_threshold, "report threshold");
  crossval->add_option("--jobs", cv_jobs, "folds trained in parallel");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string ev_ckpt, ev_manifest, ev_out, ev_agg = "average";
  double ev_threshold = 0.5;
  eval->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  eval->add_option("--manifest", ev_manifest, "dataset manifest CSV")->required();
  eval->add_option("--out", ev_out, "output directory")->required();
  eval->add_option("--threshold", ev_threshold, "decision threshold");
  eval->add_option("--aggregation", ev_agg, "average|vote");

  // packcheck
  auto* packcheck = app.add_subcommand("packcheck", "packed-batch self checks");
  PackcheckConfig pc;
  packcheck->add_option("--instances", pc.instances, "forward-check instances")
      ->check(CLI::PositiveNumber);
  packcheck->add_option("--grad-instances", pc.grad_instances, "gradient-check instances")
      ->check(CLI::NonNegativeNumber);
  packcheck->add_option("--max-batch", pc.max_batch, "max sequences per instance")
      ->check(CLI::PositiveNumber);
  packcheck->add_option("--max-len", pc.max_len, "max frames per sequence")
      ->check(CLI::PositiveNumber);
  packcheck->add_option("--dim", pc.dim, "feature width")->check(CLI::PositiveNumber);
  packcheck->add_option("--hidden", pc.hidden, "hidden size")->check(CLI::PositiveNumber);
  packcheck->add_option("--seed", pc.seed, "generator seed");
  packcheck->add_flag("--corrupt", pc.corrupt,
                      "self-test hook: corrupt the schedule, expect FAIL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth_cfg.min_frames = frames[0];
      synth_cfg.max_frames = frames[1];
      return cmd_synth(synth_out, synth_cfg);
    }
    if (crossval->parsed()) {
      cv_cfg.aggregation = parse_aggregation(cv_agg);
      return cmd_crossval(cv_manifest, cv_out, cv_cfg, cv_threshold, cv_jobs);
    }
    if (eval->parsed()) {
      return cmd_eval(ev_ckpt, ev_manifest, ev_out, ev_threshold, parse_aggregation(ev_agg));
    }
    if (packcheck->parsed()) {
      return cmd_packcheck(pc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
