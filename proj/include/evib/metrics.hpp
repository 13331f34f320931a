#pragma once

// Evaluation: accuracy, ECE with reliability bins, NLL, OOD AUROC with the
// max-probability and inverse-uncertainty scores, and post-hoc zeta calibration.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evib {

struct ScoredPrediction {
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;
  std::size_t true_class = 0;
  std::optional<double> uncertainty_mass;  // absent for MAP models
  double sigma_sum = 0.0;
  bool is_ood = false;
};

struct BinStat {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;  // 0 for empty bins
  double mean_accuracy = 0.0;
};

struct NllResult {
  double value = 0.0;               // +inf when any true-class probability is zero
  std::size_t infinite_count = 0;  // samples with zero true-class probability
};

struct CalibrationReport {
  double accuracy = 0.0;
  double ece = 0.0;
  double nll = 0.0;
  std::size_t nll_infinite_count = 0;
  std::size_t bin_count = 15;
  std::vector<BinStat> bins;

  // {accuracy, ece, nll, bin_count, bins: [{lower, upper, count, mean_confidence, mean_accuracy}]}
  std::string to_json() const;
};

double accuracy(std::span<const ScoredPrediction> preds);
NllResult nll_metric(std::span<const ScoredPrediction> preds);

// Equal-width bins: [0, 1/B], then (i/B, (i+1)/B]. Confidence is max probability.
std::size_t ece_bin_index(double confidence, std::size_t bin_count);
CalibrationReport ece(std::span<const ScoredPrediction> preds, std::size_t bin_count = 15);

// Exact rank-based AUROC with ID as the positive class; ties count one half.
double auroc(std::span<const double> scores, const std::vector<bool>& id_flags);

double mp_score(const ScoredPrediction& pred);
// 1 / u = alpha0 / C
double um_score(const ScoredPrediction& pred);

struct ZetaAdjustment {
  std::vector<double> alpha;
  std::vector<double> probabilities;
  double uncertainty = 0.0;
};

// alpha_j <- alpha_j - zeta * sigma_j, u = C / (sum alpha - zeta * sum sigma).
// zeta > 0 for overconfident models, zeta < 0 for underconfident ones. Every
// adjusted alpha_j must stay above floor.
ZetaAdjustment posthoc_zeta_adjust(std::span<const double> alpha, std::span<const double> sigma,
                                   double zeta, double floor = 1.0);

// CSV: bin_lower,bin_upper,count,mean_confidence,mean_accuracy; empty bins
// leave both means blank.
void reliability_curve_export(const CalibrationReport& report, const std::filesystem::path& path);

}  // namespace evib
