#include "eqte/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "eqte/error.hpp"
#include "eqte/parallel.hpp"
#include "eqte/rng.hpp"

namespace eqte {

namespace {

constexpr double kXiZero = 1e-8;
constexpr double kXiFloor = kXiLower + 1e-8;
constexpr double kSeries = 1e-3;

// log1p(x) / x
double log1p_ratio(double x) {
  if (x == 0.0) return 1.0;
  return std::log1p(x) / x;
}

// (log1p(x) - x/(1+x)) / x^2 and its derivative, with series near zero.
double f1(double x) {
  if (std::abs(x) < kSeries)
    return 0.5 + x * (-2.0 / 3 + x * (0.75 + x * (-0.8 + x * (5.0 / 6))));
  return (std::log1p(x) - x / (1.0 + x)) / (x * x);
}

double f1_prime(double x) {
  if (std::abs(x) < kSeries)
    return -2.0 / 3 + x * (1.5 + x * (-2.4 + x * (10.0 / 3 + x * (-30.0 / 7))));
  const double s = 1.0 + x;
  return 1.0 / (x * s * s) - 2.0 * std::log1p(x) / (x * x * x) + 2.0 / (x * x * s);
}

// Log-likelihood, gradient and Hessian in (phi = log sigma, xi) for data
// already divided by sigma's reference scale.
struct Local {
  double value = -std::numeric_limits<double>::infinity();
  double g_phi = 0, g_xi = 0;
  double h_pp = 0, h_px = 0, h_xx = 0;
};

Local evaluate(std::span<const double> y, double phi, double xi, bool derivatives) {
  Local out;
  const double sigma = std::exp(phi);
  const double n = static_cast<double>(y.size());
  double ll = -n * phi;
  double a_sum = 0, b_sum = 0, c_sum = 0, d_sum = 0, e_sum = 0;
  for (double v : y) {
    const double z = v / sigma;
    const double x = xi * z;
    if (!(x > -1.0)) return out;
    ll -= std::log1p(x) + z * log1p_ratio(x);
    if (!derivatives) continue;
    const double s = 1.0 + x;
    const double a = z / s;
    a_sum += a;
    b_sum += a * a;
    c_sum += a / s;
    d_sum += z * z * f1(x);
    e_sum += z * z * z * f1_prime(x);
  }
  out.value = ll;
  if (derivatives) {
    out.g_phi = -n + (1.0 + xi) * a_sum;
    out.g_xi = d_sum - a_sum;
    out.h_pp = -(1.0 + xi) * c_sum;
    out.h_px = a_sum - (1.0 + xi) * b_sum;
    out.h_xx = e_sum + b_sum;
  }
  return out;
}

struct Point {
  double phi, xi, value;
  bool interior_max;  // interior point with negative definite Hessian
};

bool feasible(double xi, double phi, double y_max) {
  return xi >= kXiFloor && xi <= kXiUpper && 1.0 + xi * y_max / std::exp(phi) > 0.0;
}

Point newton(std::span<const double> y, double y_max, double phi, double xi) {
  Local cur = evaluate(y, phi, xi, true);
  for (int iter = 0; iter < 200; ++iter) {
    const bool at_low = xi <= kXiFloor && cur.g_xi < 0.0;
    const bool at_high = xi >= kXiUpper && cur.g_xi > 0.0;
    double d_phi, d_xi;
    if (at_low || at_high) {
      // xi pinned at a bound: one-dimensional Newton in phi.
      const double h = std::min(cur.h_pp, -1e-12);
      d_phi = -cur.g_phi / h;
      d_xi = 0.0;
    } else {
      // Solve (-H + mu I) d = g; mu > 0 only when -H is not positive definite.
      double a = -cur.h_pp, b = -cur.h_px, c = -cur.h_xx;
      const double tr = a + c;
      const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
      const double lambda_min = 0.5 * tr - disc;
      const double scale = std::abs(a) + std::abs(b) + std::abs(c) + 1.0;
      const double mu = lambda_min > 1e-12 * scale ? 0.0 : -lambda_min + 1e-6 * scale;
      a += mu;
      c += mu;
      const double det = a * c - b * b;
      d_phi = (c * cur.g_phi - b * cur.g_xi) / det;
      d_xi = (a * cur.g_xi - b * cur.g_phi) / det;
    }

    bool moved = false;
    double t = 1.0;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const double np = phi + t * d_phi;
      const double nx = std::clamp(xi + t * d_xi, kXiFloor, kXiUpper);
      if (!feasible(nx, np, y_max)) continue;
      const Local trial = evaluate(y, np, nx, true);
      const double predicted = cur.g_phi * (np - phi) + cur.g_xi * (nx - xi);
      const bool ascent = trial.value >= cur.value + 1e-4 * predicted && trial.value >= cur.value;
      // Near the optimum the value change drowns in rounding; accept a
      // full step that still shrinks the gradient.
      const bool polish = k == 0 &&
                          trial.value >= cur.value - 1e-13 * (1.0 + std::abs(cur.value)) &&
                          std::hypot(trial.g_phi, trial.g_xi) < std::hypot(cur.g_phi, cur.g_xi);
      if (ascent || polish) {
        const double step = std::abs(np - phi) + std::abs(nx - xi);
        phi = np;
        xi = nx;
        cur = trial;
        moved = step > 1e-15;
        break;
      }
    }
    if (!moved) break;
    const double g_free = (xi <= kXiFloor && cur.g_xi < 0) || (xi >= kXiUpper && cur.g_xi > 0)
                              ? std::abs(cur.g_phi)
                              : std::hypot(cur.g_phi, cur.g_xi);
    if (g_free <= 1e-13 * static_cast<double>(y.size())) break;
  }
  const bool interior = xi > kXiFloor + 1e-6 && xi < kXiUpper - 1e-6 && cur.h_pp < 0.0 &&
                        cur.h_pp * cur.h_xx - cur.h_px * cur.h_px > 0.0 &&
                        std::hypot(cur.g_phi, cur.g_xi) <= 1e-8 * static_cast<double>(y.size());
  return {phi, xi, cur.value, interior};
}

void validate_exceedances(std::span<const double> y) {
  if (y.size() < kMinExceedances)
    fail(ErrorKind::kInsufficientTail, "GPD fit needs at least " +
                                           std::to_string(kMinExceedances) +
                                           " exceedances, got " + std::to_string(y.size()));
  for (double v : y)
    if (!std::isfinite(v) || v <= 0.0)
      fail(ErrorKind::kInvalidArgument, "exceedances must be positive and finite");
}

}  // namespace

double gpd_cdf(double y, double u, const GpdParams& params) {
  if (y < u) fail(ErrorKind::kDomain, "gpd_cdf: y below threshold");
  const double t = (y - u) / params.sigma;
  if (std::abs(params.xi) <= kXiZero) return -std::expm1(-t);
  const double x = params.xi * t;
  if (x <= -1.0) return 1.0;
  return -std::expm1(-std::log1p(x) / params.xi);
}

double gpd_tail_quantile(double tau, double u_star, const GpdParams& params, double zeta) {
  if (!(zeta > 0.0 && zeta < 1.0) || !(tau > 0.0 && tau < 1.0) || !(1.0 - tau <= zeta))
    fail(ErrorKind::kDomain, "gpd_tail_quantile: level " + std::to_string(tau) +
                                 " is not inside the tail (zeta = " + std::to_string(zeta) + ")");
  const double log_ratio = std::log(zeta / (1.0 - tau));
  if (std::abs(params.xi) <= kXiZero) return u_star + params.sigma * log_ratio;
  return u_star + params.sigma / params.xi * std::expm1(params.xi * log_ratio);
}

double gpd_loglik(std::span<const double> exceedances, const GpdParams& params) {
  if (!(params.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  return evaluate(exceedances, std::log(params.sigma), params.xi, false).value;
}

std::array<double, 2> gpd_score(std::span<const double> exceedances, const GpdParams& params) {
  const Local l = evaluate(exceedances, std::log(params.sigma), params.xi, true);
  return {l.g_phi / params.sigma, l.g_xi};
}

GpdParams fit_gpd_mle(std::span<const double> exceedances) {
  validate_exceedances(exceedances);
  const auto [lo, hi] = std::minmax_element(exceedances.begin(), exceedances.end());
  if (*lo == *hi) fail(ErrorKind::kDegenerateTail, "all exceedances are identical");

  const double n = static_cast<double>(exceedances.size());
  const double scale = std::accumulate(exceedances.begin(), exceedances.end(), 0.0) / n;
  std::vector<double> y(exceedances.begin(), exceedances.end());
  for (auto& v : y) v /= scale;
  const double y_max = *hi / scale;

  double var = 0.0;
  for (double v : y) var += (v - 1.0) * (v - 1.0);
  var /= n - 1.0;

  // Starting points: method of moments, exponential, heavy and light tails.
  const double xi_mom = std::clamp(0.5 * (1.0 - 1.0 / var), -0.45, 1.5);
  const double starts[][2] = {
      {0.5 * (1.0 / var + 1.0), xi_mom}, {1.0, 0.0}, {0.5, 0.5}, {1.3, -0.3}};

  // The remaining starts only run when the first one does not end at a
  // clean interior maximum.
  Point best{0.0, 0.0, -std::numeric_limits<double>::infinity(), false};
  for (const auto& s : starts) {
    double sigma = s[0], xi = s[1];
    if (xi < 0.0) sigma = std::max(sigma, -xi * y_max * 1.01);
    const Point p = newton(y, y_max, std::log(sigma), xi);
    if (p.value > best.value) best = p;
    if (best.interior_max) break;
  }
  if (!std::isfinite(best.value))
    fail(ErrorKind::kSolverFailure, "GPD likelihood maximization did not find a feasible point");
  return {std::exp(best.phi) * scale, best.xi};
}

double ad_statistic_uniform(std::span<const double> z) {
  if (z.empty()) fail(ErrorKind::kInvalidArgument, "A^2 of an empty sample");
  std::vector<double> s(z.begin(), z.end());
  for (auto& v : s) v = std::clamp(v, 1e-12, 1.0 - 1e-12);
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += (2.0 * i + 1.0) * (std::log(s[i]) + std::log1p(-s[n - 1 - i]));
  return -static_cast<double>(n) - acc / static_cast<double>(n);
}

double ad_statistic(std::span<const double> exceedances, const GpdParams& params) {
  std::vector<double> z(exceedances.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = gpd_cdf(exceedances[i], 0.0, params);
  return ad_statistic_uniform(z);
}

AdTestResult ad_pvalue(std::span<const double> exceedances, int n_boot, std::uint64_t seed) {
  if (n_boot < 99) fail(ErrorKind::kInvalidArgument, "A^2 bootstrap needs at least 99 replicates");
  AdTestResult result;
  result.params = fit_gpd_mle(exceedances);
  result.statistic = ad_statistic(exceedances, result.params);
  result.n_boot = n_boot;

  const std::size_t n = exceedances.size();
  std::vector<double> stats(n_boot, std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(n_boot), [&](std::size_t b) {
    Rng rng = make_stream(seed, b);
    const auto sample = sample_gpd(n, result.params, rng);
    try {
      stats[b] = ad_statistic(sample, fit_gpd_mle(sample));
    } catch (const Error&) {
    }
  });

  int exceed = 0, ok = 0;
  for (double a : stats) {
    if (std::isnan(a)) continue;
    ++ok;
    if (a >= result.statistic) ++exceed;
  }
  result.n_failed = n_boot - ok;
  if (result.n_failed * 10 > n_boot)
    fail(ErrorKind::kBootstrapFailure, "A^2 bootstrap: " + std::to_string(result.n_failed) +
                                           " of " + std::to_string(n_boot) +
                                           " refits failed (degenerate-tail)");
  result.p_value = (1.0 + exceed) / (ok + 1.0);
  return result;
}

}  // namespace eqte
