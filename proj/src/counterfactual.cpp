#include "eqte/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eqte/error.hpp"

namespace eqte {

std::string_view to_string(Estimand e) { return e == Estimand::kQte ? "QTE" : "QTT"; }

Estimand parse_estimand(std::string_view text) {
  if (text == "QTE" || text == "qte") return Estimand::kQte;
  if (text == "QTT" || text == "qtt") return Estimand::kQtt;
  fail(ErrorKind::kInvalidArgument, "unknown estimand '" + std::string(text) + "'");
}

StepCdf StepCdf::from_points(std::vector<std::pair<double, double>> points) {
  if (points.empty()) fail(ErrorKind::kEmptyInput, "distribution without support points");
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  StepCdf cdf;
  double total = 0.0;
  for (const auto& [value, mass] : points) {
    if (!(mass >= 0.0) || !std::isfinite(value))
      fail(ErrorKind::kInternal, "invalid support point in distribution");
    total += mass;
    if (!cdf.support.empty() && cdf.support.back() == value) {
      cdf.cum_mass.back() = total;
    } else {
      cdf.support.push_back(value);
      cdf.cum_mass.push_back(total);
    }
  }
  if (!(total > 0.0)) fail(ErrorKind::kInternal, "distribution has no mass");
  for (auto& c : cdf.cum_mass) c /= total;
  cdf.cum_mass.back() = 1.0;
  return cdf;
}

double StepCdf::operator()(double y) const {
  const auto it = std::upper_bound(support.begin(), support.end(), y);
  if (it == support.begin()) return 0.0;
  return cum_mass[static_cast<std::size_t>(it - support.begin()) - 1];
}

double invert_cdf(const StepCdf& cdf, double p) {
  if (!(p > 0.0 && p <= 1.0)) fail(ErrorKind::kInvalidArgument, "probability must lie in (0,1]");
  const double target = p - 1e-12;
  const auto it = std::lower_bound(cdf.cum_mass.begin(), cdf.cum_mass.end(), target);
  if (it == cdf.cum_mass.end())
    fail(ErrorKind::kInternal, "probability exceeds the mass of the distribution");
  return cdf.support[static_cast<std::size_t>(it - cdf.cum_mass.begin())];
}

void validate_levels_against_grid(std::span<const double> p_list, double tau_max) {
  if (p_list.empty()) fail(ErrorKind::kInvalidArgument, "no probability levels requested");
  for (double p : p_list)
    if (!(p > 0.0 && p <= tau_max))
      fail(ErrorKind::kInvalidArgument, "probability level " + std::to_string(p) +
                                            " outside (0, tau_max = " + std::to_string(tau_max) +
                                            "]");
}

ProposedFit fit_proposed(const Dataset& data, const TransitionSelection& selection,
                         const GridConfig& grid_config) {
  const ThresholdCandidate& chosen = selection.selected();
  ProposedFit fit;
  fit.grid = build_grid(chosen.level, grid_config.bulk_points, grid_config.extreme_points,
                        grid_config.tau_max);
  fit.n = data.size();
  fit.n_treated = data.treated_count();
  fit.covariate_dim = data.covariate_dim();

  const Design design = Design::treatment_model(data);
  if (chosen.coefficients.size() != design.p)
    fail(ErrorKind::kDimensionMismatch, "threshold coefficients do not match the design");

  const auto exceedances = positive_residuals(design, chosen.coefficients);
  fit.tail.threshold_coefficients = chosen.coefficients;
  fit.tail.n_exceedances = exceedances.size();
  fit.tail.exceedance_rate =
      static_cast<double>(exceedances.size()) / static_cast<double>(data.size());
  fit.tail.params = fit_gpd_mle(exceedances);
  if (fit.tail.params.xi <= 0.0)
    fit.warnings.push_back("fitted GPD shape is not positive; the tail is not heavy");

  const auto bulk_levels = fit.grid.bulk_levels();
  fit.bulk = fit_noncrossing_qr(design, bulk_levels);
  return fit;
}

std::vector<double> conditional_quantiles(const ProposedFit& fit, int treatment,
                                          std::span<const double> covariates) {
  if (covariates.size() != fit.covariate_dim)
    fail(ErrorKind::kDimensionMismatch, "covariate vector has length " +
                                            std::to_string(covariates.size()) + ", expected " +
                                            std::to_string(fit.covariate_dim));
  std::vector<double> q = predict_quantiles(fit.bulk, treatment, covariates);
  q.reserve(fit.grid.size());

  const auto& alpha = fit.tail.threshold_coefficients;
  double u_star = alpha[0] + treatment * alpha[1];
  for (std::size_t k = 0; k < covariates.size(); ++k) u_star += covariates[k] * alpha[k + 2];

  const double zeta = fit.tail.exceedance_rate;
  for (double tau : fit.grid.extreme_levels()) {
    // Levels at or below the pooled exceedance depth sit on the threshold.
    q.push_back(1.0 - tau < zeta ? gpd_tail_quantile(tau, u_star, fit.tail.params, zeta)
                                 : u_star);
  }
  std::sort(q.begin(), q.end());
  return q;
}

namespace {

StepCdf average_conditional(const ProposedFit& fit, const Dataset& data, int treatment,
                            bool treated_only) {
  const std::size_t units = treated_only ? data.treated_count() : data.size();
  if (units == 0) fail(ErrorKind::kEstimandUndefined, "no treated units to average over");
  const auto& w = fit.grid.weights;
  std::vector<std::pair<double, double>> points;
  points.reserve(units * w.size());
  for (const auto& rec : data.records()) {
    if (treated_only && rec.treatment != 1) continue;
    const auto q = conditional_quantiles(fit, treatment, rec.covariates);
    for (std::size_t j = 0; j < q.size(); ++j)
      points.emplace_back(q[j], w[j] / static_cast<double>(units));
  }
  return StepCdf::from_points(std::move(points));
}

}  // namespace

StepCdf marginal_cdf(const ProposedFit& fit, const Dataset& data, int treatment) {
  return average_conditional(fit, data, treatment, false);
}

StepCdf treated_cdf(const ProposedFit& fit, const Dataset& data, int treatment) {
  return average_conditional(fit, data, treatment, true);
}

std::vector<EffectEstimate> effects_from_cdfs(const StepCdf& f1, const StepCdf& f0,
                                              std::span<const double> p_list, Estimand estimand) {
  std::vector<EffectEstimate> out;
  out.reserve(p_list.size());
  for (double p : p_list) {
    EffectEstimate e;
    e.p = p;
    e.estimand = estimand;
    e.q1 = invert_cdf(f1, p);
    e.q0 = invert_cdf(f0, p);
    e.point = e.q1 - e.q0;
    out.push_back(e);
  }
  return out;
}

std::vector<EffectEstimate> estimate_effects(const ProposedFit& fit, const Dataset& data,
                                             std::span<const double> p_list, Estimand estimand) {
  validate_levels_against_grid(p_list, fit.grid.max_level());
  if (estimand == Estimand::kQte) {
    data.require_both_arms("QTE");
    return effects_from_cdfs(marginal_cdf(fit, data, 1), marginal_cdf(fit, data, 0), p_list,
                             estimand);
  }
  if (data.treated_count() == 0) fail(ErrorKind::kEstimandUndefined, "QTT: no treated units");
  return effects_from_cdfs(treated_cdf(fit, data, 1), treated_cdf(fit, data, 0), p_list,
                           estimand);
}

ProposedRun run_proposed(const Dataset& data, std::span<const double> p_list,
                         const ProposedOptions& options, bool want_qte, bool want_qtt) {
  validate_levels_against_grid(p_list, options.grid.tau_max);
  data.require_both_arms("proposed estimator");
  ProposedRun run;
  run.selection = select_transition(data, options.candidate_levels, options.selection);
  run.fit = fit_proposed(data, run.selection, options.grid);
  for (const auto& w : run.selection.warnings) run.fit.warnings.push_back(w);
  if (want_qte) run.qte = estimate_effects(run.fit, data, p_list, Estimand::kQte);
  if (want_qtt) run.qtt = estimate_effects(run.fit, data, p_list, Estimand::kQtt);
  return run;
}

}  // namespace eqte
