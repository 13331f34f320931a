#include "evib/special_functions.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "evib/error.hpp"
#include "evib/evidential.hpp"

namespace evib {
namespace {

constexpr double kLiftThreshold = 10.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream msg;
    msg << fn << " requires a finite positive argument, got " << x;
    throw DomainError(msg.str());
  }
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double digamma(double x) {
  require_positive(x, "digamma");
  diagnostics::count_evidential_call();
  double shift = 0.0;
  while (x < kLiftThreshold) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // -sum B_2k / (2k x^2k), k = 1..7
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  diagnostics::count_evidential_call();
  double shift = 0.0;
  while (x < kLiftThreshold) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
  const double series =
      inv * inv2 *
      (1.0 / 6 -
       inv2 * (1.0 / 30 -
               inv2 * (1.0 / 42 -
                       inv2 * (1.0 / 30 -
                               inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * (7.0 / 6)))))));
  return shift + inv + 0.5 * inv2 + series;
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  diagnostics::count_evidential_call();
  static constexpr std::array<double, 9> kCoeff = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) {
    // lnG(x) = lnG(x + 1) - ln x
    return log_gamma(x + 1.0) - std::log(x);
  }
  const double z = x - 1.0;
  double a = kCoeff[0];
  const double t = z + kG + 0.5;
  for (std::size_t i = 1; i < kCoeff.size(); ++i) a += kCoeff[i] / (z + static_cast<double>(i));
  return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace evib
