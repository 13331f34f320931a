#include "evib/evidential.hpp"

#include <cmath>
#include <sstream>

#include "evib/error.hpp"
#include "evib/special_functions.hpp"

namespace evib {

namespace diagnostics {
namespace {
thread_local std::uint64_t g_calls = 0;
}
std::uint64_t evidential_call_count() { return g_calls; }
void reset_evidential_call_count() { g_calls = 0; }
void count_evidential_call() { ++g_calls; }
}  // namespace diagnostics

OneHotTarget::OneHotTarget(std::size_t index, std::size_t class_count)
    : index_(index), class_count_(class_count) {
  if (index >= class_count) {
    std::ostringstream msg;
    msg << "target index " << index << " out of range for " << class_count << " classes";
    throw DataError(msg.str());
  }
}

std::vector<double> OneHotTarget::vector() const {
  std::vector<double> y(class_count_, 0.0);
  y[index_] = 1.0;
  return y;
}

DirichletBelief::DirichletBelief(std::vector<double> alpha, double eta)
    : alpha_(std::move(alpha)), alpha0_(0.0), eta_(eta) {
  if (!(eta > 0.0)) throw DomainError("eta must be positive");
  if (alpha_.empty()) throw DomainError("Dirichlet concentration must be non-empty");
  for (std::size_t j = 0; j < alpha_.size(); ++j) {
    const double a = alpha_[j];
    if (!(a > 0.0) || !std::isfinite(a) || a < eta) {
      std::ostringstream msg;
      msg << "alpha[" << j << "] = " << a << " violates alpha > 0 and alpha >= eta (" << eta
          << ")";
      throw DomainError(msg.str());
    }
    alpha0_ += a;
  }
}

DirichletBelief alpha_from_pre_evidence(const PreEvidence& pre, double eta) {
  diagnostics::count_evidential_call();
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  std::vector<double> alpha(pre.values.size());
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (!std::isfinite(pre.values[j])) {
      std::ostringstream msg;
      msg << "non-finite pre-evidence at index " << j;
      throw DataError(msg.str());
    }
    alpha[j] = softplus(pre.values[j]) + eta;
  }
  return DirichletBelief(std::move(alpha), eta);
}

ad::Var alpha_from_pre_evidence(const ad::Var& pre, double eta) {
  diagnostics::count_evidential_call();
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  for (std::size_t i = 0; i < pre.value().size(); ++i) {
    if (!std::isfinite(pre.value()[i])) {
      std::ostringstream msg;
      msg << "non-finite pre-evidence at index " << i;
      throw NumericalError(msg.str());
    }
  }
  return ad::add_scalar(ad::softplus(pre), eta);
}

std::vector<double> expected_probabilities(const DirichletBelief& belief) {
  diagnostics::count_evidential_call();
  std::vector<double> p(belief.alpha().begin(), belief.alpha().end());
  for (auto& v : p) v /= belief.alpha0();
  return p;
}

BeliefMass belief_and_uncertainty(const DirichletBelief& belief) {
  diagnostics::count_evidential_call();
  BeliefMass mass;
  mass.beliefs.reserve(belief.class_count());
  for (double a : belief.alpha()) mass.beliefs.push_back((a - 1.0) / belief.alpha0());
  mass.uncertainty = static_cast<double>(belief.class_count()) / belief.alpha0();
  return mass;
}

std::vector<double> evidence_removal(std::span<const double> alpha, const OneHotTarget& target) {
  if (alpha.size() != target.class_count()) {
    throw DimensionError("evidence_removal: alpha length does not match target class count");
  }
  std::vector<double> out(alpha.begin(), alpha.end());
  out[target.index()] = 1.0;
  return out;
}

std::vector<double> evidence_removal(const DirichletBelief& belief, const OneHotTarget& target) {
  return evidence_removal(belief.alpha(), target);
}

double dirichlet_kl(std::span<const double> p_alpha, std::span<const double> q_alpha) {
  if (p_alpha.size() != q_alpha.size()) {
    std::ostringstream msg;
    msg << "dirichlet_kl: length mismatch " << p_alpha.size() << " vs " << q_alpha.size();
    throw DomainError(msg.str());
  }
  double p0 = 0.0, q0 = 0.0;
  for (std::size_t j = 0; j < p_alpha.size(); ++j) {
    if (!(p_alpha[j] > 0.0) || !(q_alpha[j] > 0.0)) {
      std::ostringstream msg;
      msg << "dirichlet_kl: non-positive concentration at index " << j;
      throw DomainError(msg.str());
    }
    p0 += p_alpha[j];
    q0 += q_alpha[j];
  }
  const double psi_p0 = digamma(p0);
  double kl = log_gamma(p0) - log_gamma(q0);
  for (std::size_t j = 0; j < p_alpha.size(); ++j) {
    kl += log_gamma(q_alpha[j]) - log_gamma(p_alpha[j]);
    kl += (p_alpha[j] - q_alpha[j]) * (digamma(p_alpha[j]) - psi_p0);
  }
  return kl;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

}  // namespace evib
