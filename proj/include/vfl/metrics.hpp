#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vfl/types.hpp"

namespace vfl {

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
};

// Score is the predicted probability of the positive (malignant) class.
struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};
using RankedPredictions = std::vector<ScoredLabel>;

// Positive prediction iff score strictly exceeds the threshold.
ConfusionMatrix confusion_at_threshold(const RankedPredictions& preds, double threshold);

// Scalar metrics; nullopt when the denominator is zero.
std::optional<double> accuracy(const ConfusionMatrix& cm);
std::optional<double> precision(const ConfusionMatrix& cm);
std::optional<double> sensitivity(const ConfusionMatrix& cm);
std::optional<double> specificity(const ConfusionMatrix& cm);
std::optional<double> f1_score(const ConfusionMatrix& cm);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over every distinct score, descending, each point counting
// the predictions with score >= that threshold. x = recall, y = precision.
// Requires at least one positive.
std::vector<CurvePoint> pr_curve(const RankedPredictions& preds);

// Step-wise sum over the same sweep: AP = sum (R_k - R_{k-1}) * P_k.
double average_precision(const RankedPredictions& preds);

// x = false positive rate, y = true positive rate; anchored at (0,0) and
// ending at (1,1). Requires at least one positive and one negative.
std::vector<CurvePoint> roc_curve(const RankedPredictions& preds);

// Trapezoidal area under the ROC curve; equals the Mann-Whitney statistic
// with ties counted 0.5.
double auc(const RankedPredictions& preds);

// Row-normalized 2x2 matrix: row 0 = actual negatives [TN FP], row 1 =
// actual positives [FN TP], each divided by its row total.
Eigen::Matrix2d normalized_confusion(const ConfusionMatrix& cm);

// Scores split by confusion bucket at a threshold.
struct ProbBuckets {
  std::vector<double> tp, tn, fp, fn;
};
ProbBuckets prob_distribution(const RankedPredictions& preds, double threshold);

// Full scalar report for one prediction set at one threshold. auc/ap are
// nullopt when the set lacks a class.
struct MetricsReport {
  ConfusionMatrix cm;
  std::optional<double> accuracy, precision, sensitivity, specificity, f1;
  std::optional<double> auc, ap;
};

MetricsReport compute_report(const RankedPredictions& preds, double threshold);

// key=value lines, floats at 9 significant digits, "undefined" for nullopt.
std::string to_keyvalue(const MetricsReport& report);

// JSON object with the same keys; nullopt becomes null.
std::string to_json(const MetricsReport& report);

// CSV with header x,y,threshold and 9 significant digits per field.
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points);

}  // namespace vfl
