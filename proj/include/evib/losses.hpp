#pragma once

// Training objectives as differentiable graph operations. Every loss takes a
// batch: alpha / logits / mu / sigma are [B, C] nodes and there is one target
// per row. Batch reduction is the mean over rows.
//
// Each loss has a plain scalar counterpart in evib::reference, evaluated
// directly from the closed form for oracle comparisons.

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "evib/autodiff.hpp"
#include "evib/evidential.hpp"
#include "evib/sampling.hpp"

namespace evib {

struct LossValue {
  ad::Var node;
  // Stable names: "mse", "ce", "reg", "ib_mse", "ib_info", "ib_nll", "mle_nll".
  std::map<std::string, double> components;

  double total() const { return node.item(); }
};

enum class BaseLoss { mse, ce };

Tensor one_hot_matrix(std::span<const OneHotTarget> targets, std::size_t class_count);

// sum_j y_j (psi(alpha0) - psi(alpha_j))
LossValue bayes_risk_ce(const ad::Var& alpha, std::span<const OneHotTarget> targets);
// sum_j (y_j - alpha_j/alpha0)^2 + alpha_j (alpha0 - alpha_j) / (alpha0^2 (alpha0 + 1))
LossValue bayes_risk_mse(const ad::Var& alpha, std::span<const OneHotTarget> targets);
// KL(Dir(y + (1 - y) alpha) || Dir(1))
LossValue kl_regularizer(const ad::Var& alpha, std::span<const OneHotTarget> targets);
// base + lambda * reg
LossValue edl_total(const ad::Var& alpha, std::span<const OneHotTarget> targets, double lambda,
                    BaseLoss base = BaseLoss::mse);

// Exact KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - 2 ln sigma).
LossValue gaussian_prior_kl(const ad::Var& mu, const ad::Var& sigma);
// sum_j y_j (ln alpha0 - ln alpha_j)
LossValue ib_nll(const ad::Var& alpha, std::span<const OneHotTarget> targets);

// K-sample reparameterized estimate of E_{z ~ N(mu, sigma^2)} [mse(softplus(z) + eta)].
// Draws a [K*B, C] noise matrix from rng; row k*B + b belongs to sample k of item b.
LossValue ib_mse_mc(const ad::Var& mu, const ad::Var& sigma,
                    std::span<const OneHotTarget> targets, std::size_t samples, Rng& rng,
                    double eta = 1.0);
// Same estimator with caller-supplied noise of shape [K*B, C].
LossValue ib_mse_with_noise(const ad::Var& mu, const ad::Var& sigma,
                            std::span<const OneHotTarget> targets, const Tensor& noise,
                            double eta = 1.0);
// ib_mse + beta * ib_info
LossValue ib_total(const ad::Var& mu, const ad::Var& sigma, std::span<const OneHotTarget> targets,
                   double beta, std::size_t samples, Rng& rng, double eta = 1.0);

// -log softmax(logits)_target, max-subtracted.
LossValue mle_nll(const ad::Var& logits, std::span<const OneHotTarget> targets);

namespace reference {
double bayes_risk_ce(std::span<const double> alpha, const OneHotTarget& target);
double bayes_risk_mse(std::span<const double> alpha, const OneHotTarget& target);
double kl_regularizer(std::span<const double> alpha, const OneHotTarget& target);
double gaussian_prior_kl(std::span<const double> mu, std::span<const double> sigma);
double ib_nll(std::span<const double> alpha, const OneHotTarget& target);
double mle_nll(std::span<const double> logits, const OneHotTarget& target);
}  // namespace reference

}  // namespace evib
