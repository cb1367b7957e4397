#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eqte {

// Shape bounds used by the MLE. The lower bound is open.
inline constexpr double kXiLower = -0.5;
inline constexpr double kXiUpper = 2.0;
inline constexpr std::size_t kMinExceedances = 10;

struct GpdParams {
  double sigma = 1.0;
  double xi = 0.0;
};

struct GpdTailFit {
  std::vector<double> threshold_coefficients;
  GpdParams params;
  double exceedance_rate = 0.0;
  std::size_t n_exceedances = 0;
};

struct AdTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n_boot = 0;
  int n_failed = 0;
  GpdParams params;
};

// P(Y <= y | Y > u). Domain error for y < u; 1 beyond the upper endpoint.
double gpd_cdf(double y, double u, const GpdParams& params);

// u* + (sigma/xi)[(zeta/(1-tau))^xi - 1]. Domain error unless 1 - tau < zeta.
double gpd_tail_quantile(double tau, double u_star, const GpdParams& params, double zeta);

// Log-likelihood of positive exceedance magnitudes; -inf outside the support.
double gpd_loglik(std::span<const double> exceedances, const GpdParams& params);

// Gradient of gpd_loglik with respect to (sigma, xi).
std::array<double, 2> gpd_score(std::span<const double> exceedances, const GpdParams& params);

// Maximum likelihood with xi restricted to (-0.5, 2].
// Errors: InsufficientTail (< 10 values), DegenerateTail (all equal),
// InvalidArgument (nonpositive or non-finite values).
GpdParams fit_gpd_mle(std::span<const double> exceedances);

// Anderson-Darling A^2 of already transformed values z (any order).
double ad_statistic_uniform(std::span<const double> z);
double ad_statistic(std::span<const double> exceedances, const GpdParams& params);

// Parametric bootstrap p-value (1 + #{A*_b >= A}) / (B + 1) over the
// successful replicates. Replicate b draws from stream (seed, b).
AdTestResult ad_pvalue(std::span<const double> exceedances, int n_boot, std::uint64_t seed);

// n draws from GPD(sigma, xi) above 0.
template <class Rng>
std::vector<double> sample_gpd(std::size_t n, const GpdParams& params, Rng& rng);

}  // namespace eqte

#include <cmath>
#include <random>

namespace eqte {

template <class Rng>
std::vector<double> sample_gpd(std::size_t n, const GpdParams& params, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& y : out) {
    const double e = -std::log1p(-unif(rng));  // standard exponential
    y = std::abs(params.xi) <= 1e-8 ? params.sigma * e
                                     : params.sigma * std::expm1(params.xi * e) / params.xi;
  }
  return out;
}

}  // namespace eqte
