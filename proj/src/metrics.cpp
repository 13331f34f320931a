#include "evib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evib/error.hpp"

namespace evib {
namespace {

void require_non_empty(std::span<const ScoredPrediction> preds, const char* fn) {
  if (preds.empty()) throw DomainError(std::string(fn) + ": empty prediction list");
}

double confidence_of(const ScoredPrediction& p) {
  return *std::max_element(p.probabilities.begin(), p.probabilities.end());
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double accuracy(std::span<const ScoredPrediction> preds) {
  require_non_empty(preds, "accuracy");
  std::size_t correct = 0;
  for (const auto& p : preds) correct += p.predicted_class == p.true_class ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

NllResult nll_metric(std::span<const ScoredPrediction> preds) {
  require_non_empty(preds, "nll");
  NllResult out;
  double total = 0.0;
  for (const auto& p : preds) {
    if (p.true_class >= p.probabilities.size()) throw DataError("nll: true class out of range");
    const double pt = p.probabilities[p.true_class];
    if (!(pt > 0.0)) {
      ++out.infinite_count;
      continue;
    }
    total -= std::log(pt);
  }
  out.value = out.infinite_count > 0 ? std::numeric_limits<double>::infinity()
                                     : total / static_cast<double>(preds.size());
  return out;
}

std::size_t ece_bin_index(double confidence, std::size_t bin_count) {
  const double b = static_cast<double>(bin_count);
  auto lower = [b](std::size_t i) { return static_cast<double>(i) / b; };
  auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(confidence * b) - 1.0));
  idx = std::min(idx, bin_count - 1);
  // Snap against the stored edges so floating-point rounding in confidence * B
  // cannot move a value across a boundary.
  while (idx > 0 && confidence <= lower(idx)) --idx;
  while (idx + 1 < bin_count && confidence > lower(idx + 1)) ++idx;
  return idx;
}

CalibrationReport ece(std::span<const ScoredPrediction> preds, std::size_t bin_count) {
  if (bin_count < 1) throw ConfigError("ece: bin_count must be at least 1");
  require_non_empty(preds, "ece");
  CalibrationReport report;
  report.bin_count = bin_count;
  report.bins.resize(bin_count);
  std::vector<double> conf_sum(bin_count, 0.0), acc_sum(bin_count, 0.0);
  for (const auto& p : preds) {
    const double conf = confidence_of(p);
    const std::size_t b = ece_bin_index(conf, bin_count);
    ++report.bins[b].count;
    conf_sum[b] += conf;
    acc_sum[b] += p.predicted_class == p.true_class ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(preds.size());
  double total = 0.0;
  for (std::size_t b = 0; b < bin_count; ++b) {
    BinStat& bin = report.bins[b];
    bin.lower = static_cast<double>(b) / static_cast<double>(bin_count);
    bin.upper = static_cast<double>(b + 1) / static_cast<double>(bin_count);
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / c;
    bin.mean_accuracy = acc_sum[b] / c;
    total += (c / n) * std::abs(bin.mean_accuracy - bin.mean_confidence);
  }
  report.ece = total;
  report.accuracy = accuracy(preds);
  const NllResult nll = nll_metric(preds);
  report.nll = nll.value;
  report.nll_infinite_count = nll.infinite_count;
  return report;
}

std::string CalibrationReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["accuracy"] = accuracy;
  doc["ece"] = ece;
  if (std::isfinite(nll)) {
    doc["nll"] = nll;
  } else {
    doc["nll"] = "inf";
    doc["nll_infinite_count"] = nll_infinite_count;
  }
  doc["bin_count"] = bin_count;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& b : bins) {
    nlohmann::ordered_json rec;
    rec["lower"] = b.lower;
    rec["upper"] = b.upper;
    rec["count"] = b.count;
    rec["mean_confidence"] = b.mean_confidence;
    rec["mean_accuracy"] = b.mean_accuracy;
    arr.push_back(std::move(rec));
  }
  doc["bins"] = std::move(arr);
  return doc.dump(2);
}

double auroc(std::span<const double> scores, const std::vector<bool>& id_flags) {
  if (scores.size() != id_flags.size()) throw DimensionError("auroc: scores and flags differ in length");
  const std::size_t n = scores.size();
  const auto n_id = static_cast<std::size_t>(std::count(id_flags.begin(), id_flags.end(), true));
  const std::size_t n_ood = n - n_id;
  if (n_id == 0 || n_ood == 0) {
    throw DomainError("auroc needs at least one ID and one OOD sample");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of mid-ranks of the positive (ID) class.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (id_flags[order[k]]) rank_sum += mid_rank;
    }
    i = j + 1;
  }
  const double pos = static_cast<double>(n_id);
  const double u = rank_sum - pos * (pos + 1.0) / 2.0;
  return u / (pos * static_cast<double>(n_ood));
}

double mp_score(const ScoredPrediction& pred) { return confidence_of(pred); }

double um_score(const ScoredPrediction& pred) {
  if (!pred.uncertainty_mass) throw DomainError("um_score: prediction carries no uncertainty mass");
  const double u = *pred.uncertainty_mass;
  if (!(u > 0.0)) throw DomainError("um_score: uncertainty mass must be positive");
  return 1.0 / u;
}

ZetaAdjustment posthoc_zeta_adjust(std::span<const double> alpha, std::span<const double> sigma,
                                   double zeta, double floor) {
  if (alpha.size() != sigma.size()) throw DimensionError("posthoc_zeta_adjust: length mismatch");
  ZetaAdjustment out;
  out.alpha.resize(alpha.size());
  double a0 = 0.0;
  if (zeta == 0.0) {
    out.alpha.assign(alpha.begin(), alpha.end());
    for (double a : alpha) a0 += a;
    for (double a : alpha) out.probabilities.push_back(a / a0);
    out.uncertainty = static_cast<double>(alpha.size()) / a0;
    return out;
  }
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    const double a = alpha[j] - zeta * sigma[j];
    if (!(a > floor)) {
      std::ostringstream msg;
      msg << "zeta adjustment overflow: alpha[" << j << "] = " << alpha[j] << " - " << zeta
          << " * " << sigma[j] << " = " << a << " is not above " << floor;
      throw DomainError(msg.str());
    }
    out.alpha[j] = a;
    a0 += a;
  }
  out.probabilities.resize(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j) out.probabilities[j] = out.alpha[j] / a0;
  out.uncertainty = static_cast<double>(alpha.size()) / a0;
  return out;
}

void reliability_curve_export(const CalibrationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "bin_lower,bin_upper,count,mean_confidence,mean_accuracy\n";
  for (const auto& b : report.bins) {
    out << format_real(b.lower) << ',' << format_real(b.upper) << ',' << b.count << ',';
    if (b.count > 0) out << format_real(b.mean_confidence) << ',' << format_real(b.mean_accuracy);
    else out << ',';
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace evib
