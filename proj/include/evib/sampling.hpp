#pragma once

// Seeded samplers. These are Monte-Carlo oracles for the closed-form losses
// and the source of reparameterization noise.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "evib/tensor.hpp"

namespace evib {

using Rng = std::mt19937_64;

double sample_standard_normal(Rng& rng);
// rows x cols matrix of independent N(0, 1) draws, filled row-major.
Tensor sample_standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

// Marsaglia-Tsang for shape >= 1; shape < 1 uses Gamma(shape + 1) * U^(1/shape).
double sample_gamma(double shape, Rng& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);
// Inverse-CDF draw.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

}  // namespace evib
