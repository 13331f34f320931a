#include "evib/sampling.hpp"

#include <cmath>
#include <sstream>

#include "evib/error.hpp"

namespace evib {

double sample_standard_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

Tensor sample_standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out(rows, cols);
  for (auto& v : out.data()) v = normal(rng);
  return out;
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (shape < 1.0) {
    double u = uniform(rng);
    while (u == 0.0) u = uniform(rng);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    out[j] = sample_gamma(alpha[j], rng);
    total += out[j];
  }
  for (auto& v : out) v /= total;
  return out;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw DomainError("categorical over zero classes");
  double total = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] < 0.0) {
      std::ostringstream msg;
      msg << "negative probability " << probs[j] << " at index " << j;
      throw DomainError(msg.str());
    }
    total += probs[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("probabilities do not sum to 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cdf = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    cdf += probs[j];
    if (u < cdf) return j;
  }
  // u landed in the rounding slack above the last cumulative sum.
  for (std::size_t j = probs.size(); j-- > 0;) {
    if (probs[j] > 0.0) return j;
  }
  return probs.size() - 1;
}

}  // namespace evib
