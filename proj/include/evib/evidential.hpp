#pragma once

// Dirichlet-side mathematics: evidence -> alpha -> expected probabilities,
// belief/uncertainty masses, evidence removal and the Dirichlet KL.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evib/autodiff.hpp"

namespace evib {

// Raw per-class model output before the softplus.
struct PreEvidence {
  std::vector<double> values;
};

class OneHotTarget {
 public:
  OneHotTarget(std::size_t index, std::size_t class_count);

  std::size_t index() const { return index_; }
  std::size_t class_count() const { return class_count_; }
  std::vector<double> vector() const;

 private:
  std::size_t index_;
  std::size_t class_count_;
};

class DirichletBelief {
 public:
  // Checks alpha_j > 0 and alpha_j >= eta.
  explicit DirichletBelief(std::vector<double> alpha, double eta = 1.0);

  std::span<const double> alpha() const { return alpha_; }
  double alpha0() const { return alpha0_; }
  double eta() const { return eta_; }
  std::size_t class_count() const { return alpha_.size(); }

 private:
  std::vector<double> alpha_;
  double alpha0_;
  double eta_;
};

struct BeliefMass {
  std::vector<double> beliefs;
  double uncertainty;
};

// alpha_j = softplus(pre_j) + eta
DirichletBelief alpha_from_pre_evidence(const PreEvidence& pre, double eta = 1.0);
// Same map on an autodiff node of shape [R, C].
ad::Var alpha_from_pre_evidence(const ad::Var& pre, double eta = 1.0);

std::vector<double> expected_probabilities(const DirichletBelief& belief);

// b_j = (alpha_j - 1) / alpha0, u = C / alpha0. Beliefs are not clamped when eta < 1.
BeliefMass belief_and_uncertainty(const DirichletBelief& belief);

// y + (1 - y) * alpha: the target coordinate is reset to 1.
std::vector<double> evidence_removal(const DirichletBelief& belief, const OneHotTarget& target);
std::vector<double> evidence_removal(std::span<const double> alpha, const OneHotTarget& target);

// KL(Dir(p) || Dir(q)) in closed form.
double dirichlet_kl(std::span<const double> p_alpha, std::span<const double> q_alpha);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

namespace diagnostics {
// Per-thread count of calls into the evidential math (special functions and
// alpha construction). Lets tests assert that a code path never touches it.
std::uint64_t evidential_call_count();
void reset_evidential_call_count();
void count_evidential_call();
}  // namespace diagnostics

}  // namespace evib
