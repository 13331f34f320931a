#pragma once

namespace evib {

// Overflow-safe softplus: max(x, 0) + log1p(exp(-|x|)).
double softplus(double x);
double sigmoid(double x);

// psi(x) for x > 0. Recurrence lift to x >= 6, then the asymptotic series.
double digamma(double x);
// psi'(x) for x > 0, same lift-then-series scheme.
double trigamma(double x);
// ln Gamma(x) for x > 0 (Lanczos, g = 7, 9 terms).
double log_gamma(double x);

}  // namespace evib
