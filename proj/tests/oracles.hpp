#pragma once

// Independent reference computations for the tests. Sampling goes through the
// standard library distributions and log-densities through std::lgamma so that
// nothing here shares code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "evib/autodiff.hpp"
#include "evib/tensor.hpp"

namespace oracle {

struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;

  // Distance from x in standard errors.
  double z(double x) const { return std::abs(x - mean) / standard_error; }
};

// Running mean / variance (Welford).
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  Estimate estimate() const {
    const double var = m2_ / static_cast<double>(n_ - 1);
    return {mean_, std::sqrt(var / static_cast<double>(n_))};
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Gamma samplers for a fixed alpha, built once and reused across draws.
class DirichletSampler {
 public:
  explicit DirichletSampler(std::span<const double> alpha) {
    for (double a : alpha) gammas_.emplace_back(a, 1.0);
  }
  void draw(std::vector<double>& x, std::mt19937_64& rng) {
    x.resize(gammas_.size());
    double total = 0.0;
    for (std::size_t j = 0; j < gammas_.size(); ++j) {
      x[j] = gammas_[j](rng);
      total += x[j];
    }
    for (double& v : x) v /= total;
  }

 private:
  std::vector<std::gamma_distribution<double>> gammas_;
};

inline std::vector<double> draw_dirichlet(std::span<const double> alpha, std::mt19937_64& rng) {
  std::vector<double> x;
  DirichletSampler(alpha).draw(x, rng);
  return x;
}

inline double dirichlet_log_density(std::span<const double> x, std::span<const double> alpha) {
  double a0 = 0.0;
  double out = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    a0 += alpha[j];
    out += (alpha[j] - 1.0) * std::log(x[j]) - std::lgamma(alpha[j]);
  }
  return out + std::lgamma(a0);
}

struct DirichletRisks {
  Estimate ce;   // E[-log pi_y]
  Estimate mse;  // E[||y - pi||^2]
};

inline DirichletRisks dirichlet_risks_mc(std::span<const double> alpha, std::size_t y,
                                         std::size_t samples, std::mt19937_64& rng) {
  Accumulator ce;
  Accumulator mse;
  DirichletSampler sampler(alpha);
  std::vector<double> p;
  for (std::size_t s = 0; s < samples; ++s) {
    sampler.draw(p, rng);
    ce.add(-std::log(p[y]));
    double sq = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = (j == y ? 1.0 : 0.0) - p[j];
      sq += d * d;
    }
    mse.add(sq);
  }
  return {ce.estimate(), mse.estimate()};
}

// E_p[log p(x) - log q(x)] for Dirichlet p, q.
inline Estimate dirichlet_kl_mc(std::span<const double> p, std::span<const double> q,
                                std::size_t samples, std::mt19937_64& rng) {
  // log p(x) - log q(x) = sum (p_j - q_j) log x_j + log B(q) - log B(p)
  std::vector<double> unit(p.size(), 1.0);
  const double offset = dirichlet_log_density(unit, p) - dirichlet_log_density(unit, q);
  Accumulator acc;
  DirichletSampler sampler(p);
  std::vector<double> x;
  for (std::size_t s = 0; s < samples; ++s) {
    sampler.draw(x, rng);
    double ratio = offset;
    for (std::size_t j = 0; j < p.size(); ++j) ratio += (p[j] - q[j]) * std::log(x[j]);
    acc.add(ratio);
  }
  return acc.estimate();
}

// KL(N(mu, diag sigma^2) || N(0, I)) from log-density ratios.
inline Estimate gaussian_kl_mc(std::span<const double> mu, std::span<const double> sigma,
                               std::size_t samples, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Accumulator acc;
  for (std::size_t s = 0; s < samples; ++s) {
    double ratio = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double eps = normal(rng);
      const double z = mu[j] + sigma[j] * eps;
      ratio += -std::log(sigma[j]) - 0.5 * eps * eps + 0.5 * z * z;
    }
    acc.add(ratio);
  }
  return acc.estimate();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline evib::Tensor uniform_tensor(std::size_t rows, std::size_t cols, double lo, double hi,
                                   std::mt19937_64& rng) {
  evib::Tensor t(rows, cols);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Builds a scalar graph from leaf variables.
using GraphFn = std::function<evib::ad::Var(const std::vector<evib::ad::Var>&)>;

// Largest relative error between backward() and central differences (h = 1e-5)
// over every input coordinate.
inline double gradient_check(const GraphFn& fn, const std::vector<evib::Tensor>& inputs,
                             double h = 1e-5) {
  std::vector<evib::ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(evib::ad::Var::leaf(t));
  evib::ad::backward(fn(leaves));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      auto eval = [&](double delta) {
        std::vector<evib::ad::Var> shifted;
        for (std::size_t m = 0; m < inputs.size(); ++m) {
          evib::Tensor t = inputs[m];
          if (m == i) t[k] += delta;
          shifted.push_back(evib::ad::Var::constant(t));
        }
        return fn(shifted).item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      worst = std::max(worst, relative_error(leaves[i].grad()[k], numeric));
    }
  }
  return worst;
}

}  // namespace oracle
