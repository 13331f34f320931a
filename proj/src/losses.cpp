#include "evib/losses.hpp"

#include <cmath>
#include <sstream>

#include "evib/error.hpp"
#include "evib/special_functions.hpp"

namespace evib {
namespace {

using ad::Var;

void check_targets(const Var& x, std::span<const OneHotTarget> targets, const char* fn) {
  if (targets.size() != x.rows()) {
    std::ostringstream msg;
    msg << fn << ": " << targets.size() << " targets for " << x.rows() << " rows";
    throw DimensionError(msg.str());
  }
  for (const auto& t : targets) {
    if (t.class_count() != x.cols()) {
      std::ostringstream msg;
      msg << fn << ": target over " << t.class_count() << " classes, input has " << x.cols();
      throw DimensionError(msg.str());
    }
  }
}

void check_positive(const Var& x, const char* fn, const char* what) {
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    if (!(x.value()[i] > 0.0)) {
      std::ostringstream msg;
      msg << fn << ": " << what << " must be positive, got " << x.value()[i] << " at index " << i;
      throw DomainError(msg.str());
    }
  }
}

Var digamma_node(const Var& x) {
  return ad::map_elementwise(x, [](double v) { return digamma(v); },
                             [](double v) { return trigamma(v); });
}

Var log_gamma_node(const Var& x) {
  return ad::map_elementwise(x, [](double v) { return log_gamma(v); },
                             [](double v) { return digamma(v); });
}

// [B, C] alpha -> [B, 1] alpha0 broadcast back to [B, C]
Var broadcast_alpha0(const Var& alpha) { return ad::broadcast_cols(ad::row_sum(alpha), alpha.cols()); }

Var mse_rows(const Var& alpha, const Tensor& y) {
  const Var a0 = broadcast_alpha0(alpha);
  const Var p = alpha / a0;
  const Var err = ad::square(Var::constant(y) - p);
  const Var var = (alpha * (a0 - alpha)) / (ad::square(a0) * ad::add_scalar(a0, 1.0));
  return ad::row_sum(err + var);
}

LossValue single(Var node, const char* name) {
  LossValue out{std::move(node), {}};
  out.components[name] = out.node.item();
  return out;
}

}  // namespace

Tensor one_hot_matrix(std::span<const OneHotTarget> targets, std::size_t class_count) {
  Tensor y(targets.size(), class_count, 0.0);
  for (std::size_t r = 0; r < targets.size(); ++r) y(r, targets[r].index()) = 1.0;
  return y;
}

LossValue bayes_risk_ce(const Var& alpha, std::span<const OneHotTarget> targets) {
  check_targets(alpha, targets, "bayes_risk_ce");
  check_positive(alpha, "bayes_risk_ce", "alpha");
  const Var y = Var::constant(one_hot_matrix(targets, alpha.cols()));
  const Var rows = ad::row_sum(y * (digamma_node(broadcast_alpha0(alpha)) - digamma_node(alpha)));
  return single(ad::mean(rows), "ce");
}

LossValue bayes_risk_mse(const Var& alpha, std::span<const OneHotTarget> targets) {
  check_targets(alpha, targets, "bayes_risk_mse");
  check_positive(alpha, "bayes_risk_mse", "alpha");
  return single(ad::mean(mse_rows(alpha, one_hot_matrix(targets, alpha.cols()))), "mse");
}

LossValue kl_regularizer(const Var& alpha, std::span<const OneHotTarget> targets) {
  check_targets(alpha, targets, "kl_regularizer");
  check_positive(alpha, "kl_regularizer", "alpha");
  const Tensor y = one_hot_matrix(targets, alpha.cols());
  Tensor keep(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) keep[i] = 1.0 - y[i];
  // Evidence removal: the target coordinate becomes exactly 1.
  const Var removed = alpha * Var::constant(keep) + Var::constant(y);
  const Var a0 = ad::row_sum(removed);
  const double log_gamma_c = log_gamma(static_cast<double>(alpha.cols()));
  const Var cross = ad::row_sum(
      ad::add_scalar(removed, -1.0) *
      (digamma_node(removed) - digamma_node(ad::broadcast_cols(a0, alpha.cols()))));
  const Var rows =
      ad::add_scalar(log_gamma_node(a0) - ad::row_sum(log_gamma_node(removed)), -log_gamma_c) +
      cross;
  return single(ad::mean(rows), "reg");
}

LossValue edl_total(const Var& alpha, std::span<const OneHotTarget> targets, double lambda,
                    BaseLoss base) {
  if (!(lambda >= 0.0)) throw ConfigError("edl_total: lambda must be >= 0");
  LossValue base_loss =
      base == BaseLoss::mse ? bayes_risk_mse(alpha, targets) : bayes_risk_ce(alpha, targets);
  LossValue reg = kl_regularizer(alpha, targets);
  LossValue out{base_loss.node + ad::scale(reg.node, lambda), base_loss.components};
  out.components["reg"] = reg.components.at("reg");
  return out;
}

LossValue gaussian_prior_kl(const Var& mu, const Var& sigma) {
  if (!mu.value().same_shape(sigma.value())) {
    throw DimensionError("gaussian_prior_kl: mu " + mu.value().shape_string() + " vs sigma " +
                         sigma.value().shape_string());
  }
  check_positive(sigma, "gaussian_prior_kl", "sigma");
  const Var inner = ad::add_scalar(ad::square(mu) + ad::square(sigma), -1.0) -
                    ad::scale(ad::log(sigma), 2.0);
  return single(ad::scale(ad::mean(ad::row_sum(inner)), 0.5), "ib_info");
}

LossValue ib_nll(const Var& alpha, std::span<const OneHotTarget> targets) {
  check_targets(alpha, targets, "ib_nll");
  check_positive(alpha, "ib_nll", "alpha");
  const Var y = Var::constant(one_hot_matrix(targets, alpha.cols()));
  const Var rows = ad::row_sum(y * (ad::log(broadcast_alpha0(alpha)) - ad::log(alpha)));
  return single(ad::mean(rows), "ib_nll");
}

LossValue ib_mse_with_noise(const Var& mu, const Var& sigma, std::span<const OneHotTarget> targets,
                            const Tensor& noise, double eta) {
  check_targets(mu, targets, "ib_mse");
  if (!mu.value().same_shape(sigma.value())) {
    throw DimensionError("ib_mse: mu " + mu.value().shape_string() + " vs sigma " +
                         sigma.value().shape_string());
  }
  check_positive(sigma, "ib_mse", "sigma");
  const std::size_t batch = mu.rows();
  if (batch == 0 || noise.cols() != mu.cols() || noise.rows() % batch != 0 ||
      noise.rows() == 0) {
    throw DimensionError("ib_mse: noise shape " + noise.shape_string() +
                         " incompatible with batch " + mu.value().shape_string());
  }
  const std::size_t samples = noise.rows() / batch;
  // Reparameterization: pre-evidence sample = mu + sigma * eps.
  const Var pre = ad::repeat_rows(mu, samples) + ad::repeat_rows(sigma, samples) * Var::constant(noise);
  const Var alpha = alpha_from_pre_evidence(pre, eta);
  const Tensor y = one_hot_matrix(targets, mu.cols());
  const Var y_rep = ad::repeat_rows(Var::constant(y), samples);
  return single(ad::mean(mse_rows(alpha, y_rep.value())), "ib_mse");
}

LossValue ib_mse_mc(const Var& mu, const Var& sigma, std::span<const OneHotTarget> targets,
                    std::size_t samples, Rng& rng, double eta) {
  if (samples < 1) throw ConfigError("ib_mse: K must be at least 1");
  const Tensor noise = sample_standard_normal(samples * mu.rows(), mu.cols(), rng);
  return ib_mse_with_noise(mu, sigma, targets, noise, eta);
}

LossValue ib_total(const Var& mu, const Var& sigma, std::span<const OneHotTarget> targets,
                   double beta, std::size_t samples, Rng& rng, double eta) {
  if (!(beta >= 0.0)) throw ConfigError("ib_total: beta must be >= 0");
  LossValue info = gaussian_prior_kl(mu, sigma);
  LossValue fit = ib_mse_mc(mu, sigma, targets, samples, rng, eta);
  LossValue out{fit.node + ad::scale(info.node, beta), fit.components};
  out.components["ib_info"] = info.components.at("ib_info");
  return out;
}

LossValue mle_nll(const Var& logits, std::span<const OneHotTarget> targets) {
  check_targets(logits, targets, "mle_nll");
  const Var y = Var::constant(one_hot_matrix(targets, logits.cols()));
  const Var rows = ad::row_sum(y * ad::log_softmax_rows(logits));
  return single(ad::negate(ad::mean(rows)), "mle_nll");
}

namespace reference {
namespace {
double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
void check_len(std::span<const double> v, const OneHotTarget& t) {
  if (v.size() != t.class_count()) throw DimensionError("reference loss: length mismatch");
}
}  // namespace

double bayes_risk_ce(std::span<const double> alpha, const OneHotTarget& target) {
  check_len(alpha, target);
  return digamma(sum_of(alpha)) - digamma(alpha[target.index()]);
}

double bayes_risk_mse(std::span<const double> alpha, const OneHotTarget& target) {
  check_len(alpha, target);
  const double a0 = sum_of(alpha);
  double total = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    const double y = j == target.index() ? 1.0 : 0.0;
    const double p = alpha[j] / a0;
    total += (y - p) * (y - p) + alpha[j] * (a0 - alpha[j]) / (a0 * a0 * (a0 + 1.0));
  }
  return total;
}

double kl_regularizer(std::span<const double> alpha, const OneHotTarget& target) {
  check_len(alpha, target);
  const std::vector<double> removed = evidence_removal(alpha, target);
  const std::vector<double> ones(alpha.size(), 1.0);
  return dirichlet_kl(removed, ones);
}

double gaussian_prior_kl(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw DimensionError("gaussian_prior_kl: length mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (!(sigma[j] > 0.0)) throw DomainError("gaussian_prior_kl: sigma must be positive");
    total += mu[j] * mu[j] + sigma[j] * sigma[j] - 1.0 - 2.0 * std::log(sigma[j]);
  }
  return 0.5 * total;
}

double ib_nll(std::span<const double> alpha, const OneHotTarget& target) {
  check_len(alpha, target);
  return std::log(sum_of(alpha)) - std::log(alpha[target.index()]);
}

double mle_nll(std::span<const double> logits, const OneHotTarget& target) {
  check_len(logits, target);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return mx + std::log(s) - logits[target.index()];
}

}  // namespace reference
}  // namespace evib
