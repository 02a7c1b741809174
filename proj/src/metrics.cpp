#include "vfl/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vfl {

namespace {

std::int64_t count_positives(const RankedPredictions& preds) {
  std::int64_t p = 0;
  for (const auto& sl : preds) p += sl.label == 1 ? 1 : 0;
  return p;
}

// (cum_tp, cum_fp, threshold) after each distinct-score group, descending.
struct SweepPoint {
  std::int64_t tp, fp;
  double threshold;
};

std::vector<SweepPoint> threshold_sweep(const RankedPredictions& preds) {
  RankedPredictions sorted = preds;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  std::vector<SweepPoint> sweep;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == s; ++i) {
      (sorted[i].label == 1 ? tp : fp) += 1;
    }
    sweep.push_back({tp, fp, s});
  }
  return sweep;
}

std::string format_sig9(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

ConfusionMatrix confusion_at_threshold(const RankedPredictions& preds, double threshold) {
  if (preds.empty()) {
    throw std::invalid_argument("confusion_at_threshold: empty predictions");
  }
  ConfusionMatrix cm;
  for (const auto& sl : preds) {
    const bool predicted_positive = sl.score > threshold;
    if (sl.label == 1) {
      (predicted_positive ? cm.tp : cm.fn) += 1;
    } else {
      (predicted_positive ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

std::optional<double> accuracy(const ConfusionMatrix& cm) {
  const auto denom = cm.total();
  if (denom == 0) return std::nullopt;
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(denom);
}

std::optional<double> precision(const ConfusionMatrix& cm) {
  const auto denom = cm.tp + cm.fp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

std::optional<double> sensitivity(const ConfusionMatrix& cm) {
  const auto denom = cm.tp + cm.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

std::optional<double> specificity(const ConfusionMatrix& cm) {
  const auto denom = cm.fp + cm.tn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(cm.tn) / static_cast<double>(denom);
}

std::optional<double> f1_score(const ConfusionMatrix& cm) {
  const auto prec = precision(cm);
  const auto sens = sensitivity(cm);
  if (!prec || !sens || *prec + *sens == 0.0) return std::nullopt;
  return 2.0 * *sens * *prec / (*sens + *prec);
}

std::vector<CurvePoint> pr_curve(const RankedPredictions& preds) {
  const std::int64_t positives = count_positives(preds);
  if (positives == 0) {
    throw std::invalid_argument("pr_curve: no positive labels");
  }
  std::vector<CurvePoint> points;
  for (const auto& sp : threshold_sweep(preds)) {
    const double recall = static_cast<double>(sp.tp) / static_cast<double>(positives);
    const double prec = static_cast<double>(sp.tp) / static_cast<double>(sp.tp + sp.fp);
    points.push_back({recall, prec, sp.threshold});
  }
  return points;
}

double average_precision(const RankedPredictions& preds) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& pt : pr_curve(preds)) {
    ap += (pt.x - prev_recall) * pt.y;
    prev_recall = pt.x;
  }
  return ap;
}

std::vector<CurvePoint> roc_curve(const RankedPredictions& preds) {
  const std::int64_t positives = count_positives(preds);
  const std::int64_t negatives = static_cast<std::int64_t>(preds.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc_curve: needs at least one positive and one negative");
  }
  std::vector<CurvePoint> points;
  points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  for (const auto& sp : threshold_sweep(preds)) {
    const double fpr = static_cast<double>(sp.fp) / static_cast<double>(negatives);
    const double tpr = static_cast<double>(sp.tp) / static_cast<double>(positives);
    points.push_back({fpr, tpr, sp.threshold});
  }
  return points;
}

double auc(const RankedPredictions& preds) {
  const std::vector<CurvePoint> points = roc_curve(preds);
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].x - points[i - 1].x) * (points[i].y + points[i - 1].y) / 2.0;
  }
  return area;
}

Eigen::Matrix2d normalized_confusion(const ConfusionMatrix& cm) {
  const auto neg = cm.tn + cm.fp;
  const auto pos = cm.fn + cm.tp;
  if (neg == 0 || pos == 0) {
    throw std::invalid_argument("normalized_confusion: a true-class row is empty");
  }
  Eigen::Matrix2d m;
  m(0, 0) = static_cast<double>(cm.tn) / static_cast<double>(neg);
  m(0, 1) = static_cast<double>(cm.fp) / static_cast<double>(neg);
  m(1, 0) = static_cast<double>(cm.fn) / static_cast<double>(pos);
  m(1, 1) = static_cast<double>(cm.tp) / static_cast<double>(pos);
  return m;
}

ProbBuckets prob_distribution(const RankedPredictions& preds, double threshold) {
  if (preds.empty()) {
    throw std::invalid_argument("prob_distribution: empty predictions");
  }
  ProbBuckets buckets;
  for (const auto& sl : preds) {
    const bool predicted_positive = sl.score > threshold;
    if (sl.label == 1) {
      (predicted_positive ? buckets.tp : buckets.fn).push_back(sl.score);
    } else {
      (predicted_positive ? buckets.fp : buckets.tn).push_back(sl.score);
    }
  }
  return buckets;
}

MetricsReport compute_report(const RankedPredictions& preds, double threshold) {
  MetricsReport report;
  report.cm = confusion_at_threshold(preds, threshold);
  report.accuracy = accuracy(report.cm);
  report.precision = precision(report.cm);
  report.sensitivity = sensitivity(report.cm);
  report.specificity = specificity(report.cm);
  report.f1 = f1_score(report.cm);
  const std::int64_t positives = count_positives(preds);
  const std::int64_t negatives = static_cast<std::int64_t>(preds.size()) - positives;
  if (positives > 0) report.ap = average_precision(preds);
  if (positives > 0 && negatives > 0) report.auc = auc(preds);
  return report;
}

std::string to_keyvalue(const MetricsReport& report) {
  auto field = [](const std::optional<double>& v) {
    return v ? format_sig9(*v) : std::string("undefined");
  };
  std::ostringstream os;
  os << "accuracy=" << field(report.accuracy) << '\n'
     << "precision=" << field(report.precision) << '\n'
     << "sensitivity=" << field(report.sensitivity) << '\n'
     << "specificity=" << field(report.specificity) << '\n'
     << "f1=" << field(report.f1) << '\n'
     << "auc=" << field(report.auc) << '\n'
     << "ap=" << field(report.ap) << '\n'
     << "tp=" << report.cm.tp << '\n'
     << "tn=" << report.cm.tn << '\n'
     << "fp=" << report.cm.fp << '\n'
     << "fn=" << report.cm.fn << '\n';
  return os.str();
}

std::string to_json(const MetricsReport& report) {
  nlohmann::json j;
  auto field = [&](const char* key, const std::optional<double>& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  field("accuracy", report.accuracy);
  field("precision", report.precision);
  field("sensitivity", report.sensitivity);
  field("specificity", report.specificity);
  field("f1", report.f1);
  field("auc", report.auc);
  field("ap", report.ap);
  j["tp"] = report.cm.tp;
  j["tn"] = report.cm.tn;
  j["fp"] = report.cm.fp;
  j["fn"] = report.cm.fn;
  return j.dump(2) + "\n";
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_curve_csv: cannot open " + path.string());
  }
  out << "x,y,threshold\n";
  for (const auto& pt : points) {
    out << format_sig9(pt.x) << ',' << format_sig9(pt.y) << ','
        << format_sig9(pt.threshold) << '\n';
  }
}

}  // namespace vfl
