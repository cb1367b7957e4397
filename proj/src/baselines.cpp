#include "eqte/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "eqte/error.hpp"

namespace eqte {

namespace {

Eigen::MatrixXd design_matrix(const Design& d) {
  Eigen::MatrixXd x(d.n, d.p);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j < d.p; ++j) x(i, j) = d.rows[i * d.p + j];
  return x;
}

double logistic(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& d) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d(i) * eta(i) - softplus(eta(i));
  return ll;
}

bool perfectly_classified(const Eigen::VectorXd& eta, const Eigen::VectorXd& d) {
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    if ((d(i) > 0.5) != (eta(i) > 0.0)) return false;
  return true;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void require_arm(const Dataset& data, Estimand estimand) {
  data.require_both_arms(std::string(to_string(estimand)) + " baseline");
}

StepCdf weighted_arm_cdf(const Dataset& data, const std::vector<double>& weights) {
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (weights[i] > 0.0) points.emplace_back(data[i].outcome, weights[i]);
  if (points.empty()) fail(ErrorKind::kEstimandUndefined, "arm has no positive weight");
  return StepCdf::from_points(std::move(points));
}

Eigen::RowVectorXd or_row(const BoxCoxFit& fit, int treatment, std::span<const double> x) {
  const std::size_t m = x.size();
  Eigen::RowVectorXd row(fit.coefficients.size());
  row(0) = 1.0;
  row(1) = treatment;
  for (std::size_t k = 0; k < m; ++k) row(2 + k) = x[k];
  if (fit.interactions)
    for (std::size_t k = 0; k < m; ++k) row(2 + m + k) = treatment * x[k];
  return row;
}

}  // namespace

PropensityFit fit_propensity(const Dataset& data, const PropensityOptions& options) {
  data.require_both_arms("propensity model");
  if (!(options.clamp_low > 0.0 && options.clamp_low < options.clamp_high &&
        options.clamp_high < 1.0))
    fail(ErrorKind::kInvalidArgument, "propensity clamp bounds must satisfy 0 < low < high < 1");
  const Design design = Design::propensity_model(data);
  require_full_rank(design);
  const Eigen::MatrixXd x = design_matrix(design);
  const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(design.response.data(), design.n);

  // Start from the intercept-only MLE.
  const double frac = static_cast<double>(data.treated_count()) / data.size();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(design.p);
  gamma(0) = std::log(frac / (1.0 - frac));
  Eigen::VectorXd eta = x * gamma;
  double ll = log_likelihood(eta, d);

  PropensityFit out;
  bool converged = false;
  bool final_step = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    Eigen::VectorXd pi(design.n), w(design.n);
    for (std::size_t i = 0; i < design.n; ++i) {
      pi(i) = logistic(eta(i));
      w(i) = pi(i) * (1.0 - pi(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (d - pi);
    out.iterations = it;
    if (grad.norm() <= 1e-8 || final_step) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      if (perfectly_classified(eta, d))
        fail(ErrorKind::kSeparation, "treatment is perfectly separated by the covariates");
      fail(ErrorKind::kSolverFailure, "propensity Hessian is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd trial_gamma, trial_eta;
    double trial_ll = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
      trial_gamma = gamma + scale * step;
      trial_eta = x * trial_gamma;
      trial_ll = log_likelihood(trial_eta, d);
      if (trial_ll >= ll - 1e-12 * std::abs(ll)) break;
    }
    const double change = std::abs(trial_ll - ll);
    gamma = trial_gamma;
    eta = trial_eta;
    ll = trial_ll;
    // Small likelihood change: take one more step so the score is also tiny.
    if (change <= 1e-10) final_step = true;
  }
  if (perfectly_classified(eta, d))
    fail(ErrorKind::kSeparation, "treatment is perfectly separated by the covariates");
  if (!converged)
    fail(ErrorKind::kSolverFailure, "propensity model did not converge in " +
                                        std::to_string(options.max_iterations) + " iterations");

  out.gamma.assign(gamma.data(), gamma.data() + gamma.size());
  out.log_likelihood = ll;
  out.fitted.resize(design.n);
  out.clamped.resize(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    out.fitted[i] = logistic(eta(i));
    out.clamped[i] = std::clamp(out.fitted[i], options.clamp_low, options.clamp_high);
  }
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p) {
  if (values.size() != weights.size())
    fail(ErrorKind::kDimensionMismatch, "values and weights differ in length");
  std::vector<std::pair<double, double>> points;
  points.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) points.emplace_back(values[i], weights[i]);
  return invert_cdf(StepCdf::from_points(std::move(points)), p);
}

std::vector<double> arm_weights(const Dataset& data, const PropensityFit& propensity, int arm,
                                Estimand estimand) {
  if (propensity.clamped.size() != data.size())
    fail(ErrorKind::kDimensionMismatch, "propensity was fitted on different data");
  std::vector<double> w(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].treatment != arm) continue;
    const double pi = propensity.clamped[i];
    if (estimand == Estimand::kQte)
      w[i] = arm == 1 ? 1.0 / pi : 1.0 / (1.0 - pi);
    else
      w[i] = arm == 1 ? 1.0 : pi / (1.0 - pi);
  }
  return w;
}

std::vector<EffectEstimate> ipw_effects(const Dataset& data, const PropensityFit& propensity,
                                        std::span<const double> p_list, Estimand estimand) {
  require_arm(data, estimand);
  const StepCdf f1 = weighted_arm_cdf(data, arm_weights(data, propensity, 1, estimand));
  const StepCdf f0 = weighted_arm_cdf(data, arm_weights(data, propensity, 0, estimand));
  return effects_from_cdfs(f1, f0, p_list, estimand);
}

std::vector<EffectEstimate> firpo_effects(const Dataset& data, const PropensityFit& propensity,
                                          std::span<const double> p_list, Estimand estimand) {
  require_arm(data, estimand);
  const std::vector<double> y = data.outcomes();
  const std::vector<double> w1 = arm_weights(data, propensity, 1, estimand);
  const std::vector<double> w0 = arm_weights(data, propensity, 0, estimand);
  std::vector<EffectEstimate> out;
  for (double p : p_list) {
    EffectEstimate e;
    e.p = p;
    e.estimand = estimand;
    e.q1 = weighted_quantile(y, w1, p);
    e.q0 = weighted_quantile(y, w0, p);
    e.point = e.q1 - e.q0;
    out.push_back(e);
  }
  return out;
}

double box_cox(double y, double exponent) {
  if (!(y > 0.0)) fail(ErrorKind::kTransform, "Box-Cox transform needs positive values");
  if (exponent == 0.0) return std::log(y);
  return std::expm1(exponent * std::log(y)) / exponent;
}

double box_cox_inverse(double z, double exponent) {
  if (exponent == 0.0) return std::exp(z);
  const double base = 1.0 + exponent * z;
  if (!(base > 0.0)) fail(ErrorKind::kTransform, "value outside the Box-Cox range");
  return std::exp(std::log(base) / exponent);
}

double box_cox_shift(std::span<const double> y) {
  if (y.empty()) fail(ErrorKind::kEmptyInput, "no outcomes");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo > 0.0) return 0.0;
  return -*lo + 0.01 * (*hi - *lo);
}

BoxCoxFit fit_box_cox(const Dataset& data, const BoxCoxConfig& config) {
  if (config.exponent_grid.empty())
    fail(ErrorKind::kInvalidArgument, "empty Box-Cox exponent grid");
  Design design = Design::treatment_model(data);
  const std::size_t m = data.covariate_dim();
  if (config.interactions) {
    Design wide;
    wide.n = design.n;
    wide.p = design.p + m;
    wide.column_names = design.column_names;
    for (const auto& name : data.covariate_names()) wide.column_names.push_back("treatment:" + name);
    wide.response = design.response;
    wide.rows.reserve(wide.n * wide.p);
    for (std::size_t i = 0; i < design.n; ++i) {
      const double* r = design.row(i);
      wide.rows.insert(wide.rows.end(), r, r + design.p);
      for (std::size_t k = 0; k < m; ++k) wide.rows.push_back(r[1] * r[2 + k]);
    }
    design = std::move(wide);
  }
  require_full_rank(design);
  const Eigen::MatrixXd x = design_matrix(design);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const std::size_t n = design.n;

  BoxCoxFit fit;
  fit.shift = box_cox_shift(design.response);
  fit.interactions = config.interactions;
  fit.column_names = design.column_names;
  double sum_log = 0.0;
  for (double y : design.response) {
    const double shifted = y + fit.shift;
    if (!(shifted > 0.0))
      fail(ErrorKind::kTransform, "outcomes are not positive after the maximal shift");
    sum_log += std::log(shifted);
  }

  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_beta;
  double best_rss = 0.0;
  for (double lambda : config.exponent_grid) {
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z(i) = box_cox(design.response[i] + fit.shift, lambda);
    const Eigen::VectorXd beta = qr.solve(z);
    const double rss = (z - x * beta).squaredNorm();
    if (!std::isfinite(rss) || !(rss > 0.0)) continue;
    const double ll = -0.5 * n * std::log(rss / n) + (lambda - 1.0) * sum_log;
    if (ll > best) {
      best = ll;
      best_beta = beta;
      best_rss = rss;
      fit.exponent = lambda;
    }
  }
  if (!std::isfinite(best))
    fail(ErrorKind::kTransform, "no Box-Cox exponent gives a finite nondegenerate fit");
  if (n <= design.p) fail(ErrorKind::kSingularDesign, "no residual degrees of freedom");
  fit.profile_log_likelihood = best;
  fit.coefficients.assign(best_beta.data(), best_beta.data() + best_beta.size());
  fit.residual_sd = std::sqrt(best_rss / static_cast<double>(n - design.p));
  return fit;
}

double box_cox_mean(const BoxCoxFit& fit, int treatment, std::span<const double> covariates) {
  const std::size_t expected = 2 + covariates.size() * (fit.interactions ? 2 : 1);
  if (expected != fit.coefficients.size())
    fail(ErrorKind::kDimensionMismatch, "covariates do not match the Box-Cox model");
  const Eigen::RowVectorXd row = or_row(fit, treatment, covariates);
  return row.dot(Eigen::Map<const Eigen::VectorXd>(fit.coefficients.data(),
                                                   static_cast<Eigen::Index>(fit.coefficients.size())));
}

double box_cox_mixture_quantile(const BoxCoxFit& fit, std::span<const double> means, double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::kInvalidArgument, "probability must lie in (0,1)");
  if (means.empty()) fail(ErrorKind::kEmptyInput, "no units to average over");
  const double sd = fit.residual_sd;
  const double lambda = fit.exponent;
  auto mixture = [&](double z) {
    double s = 0.0;
    for (double mu : means) s += normal_cdf((z - mu) / sd);
    return s / static_cast<double>(means.size());
  };
  const auto [mn, mx] = std::minmax_element(means.begin(), means.end());
  double lo = *mn - 40.0 * sd;
  double hi = *mx + 40.0 * sd;
  // The transformed scale is bounded below (lambda > 0) or above (lambda < 0).
  if (lambda > 0.0) {
    const double edge = -1.0 / lambda;
    if (mixture(edge) >= p) return -fit.shift;
    lo = std::max(lo, edge);
  } else if (lambda < 0.0) {
    const double edge = -1.0 / lambda;
    if (mixture(edge) < p)
      fail(ErrorKind::kTransform, "requested quantile lies beyond the Box-Cox model's range");
    hi = std::min(hi, edge);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mixture(mid) >= p)
      hi = mid;
    else
      lo = mid;
  }
  return box_cox_inverse(hi, lambda) - fit.shift;
}

std::vector<EffectEstimate> or_effects(const Dataset& data, const BoxCoxFit& fit,
                                       std::span<const double> p_list, Estimand estimand) {
  require_arm(data, estimand);
  std::vector<double> mu1, mu0;
  for (const auto& r : data.records()) {
    if (estimand == Estimand::kQtt && r.treatment != 1) continue;
    mu1.push_back(box_cox_mean(fit, 1, r.covariates));
    mu0.push_back(box_cox_mean(fit, 0, r.covariates));
  }
  std::vector<EffectEstimate> out;
  for (double p : p_list) {
    EffectEstimate e;
    e.p = p;
    e.estimand = estimand;
    e.q1 = box_cox_mixture_quantile(fit, mu1, p);
    e.q0 = box_cox_mixture_quantile(fit, mu0, p);
    e.point = e.q1 - e.q0;
    out.push_back(e);
  }
  return out;
}

std::vector<EffectEstimate> or_boxcox_effects(const Dataset& data, std::span<const double> p_list,
                                              Estimand estimand, const BoxCoxConfig& config) {
  return or_effects(data, fit_box_cox(data, config), p_list, estimand);
}

}  // namespace eqte
