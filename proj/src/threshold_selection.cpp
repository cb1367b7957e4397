#include "eqte/threshold_selection.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eqte/error.hpp"
#include "eqte/parallel.hpp"
#include "eqte/quantile_regression.hpp"
#include "eqte/rng.hpp"

namespace eqte {

std::string_view to_string(Convention c) {
  return c == Convention::kPaperLiteral ? "paper-literal" : "first-accepted";
}

Convention parse_convention(std::string_view text) {
  if (text == "paper-literal") return Convention::kPaperLiteral;
  if (text == "first-accepted") return Convention::kFirstAccepted;
  fail(ErrorKind::kInvalidArgument,
       "unknown convention '" + std::string(text) + "' (paper-literal|first-accepted)");
}

std::vector<double> equally_spaced_levels(double lo, double hi, std::size_t count) {
  if (count == 0) fail(ErrorKind::kInvalidArgument, "candidate count must be positive");
  if (count == 1) return {lo};
  if (!(lo < hi)) fail(ErrorKind::kInvalidArgument, "candidate range must be increasing");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  out.back() = hi;
  return out;
}

std::vector<double> positive_residuals(const Design& design, std::span<const double> beta) {
  std::vector<double> out;
  for (std::size_t i = 0; i < design.n; ++i) {
    const auto row = design.row(i);
    double fit = 0.0, magnitude = std::abs(design.response[i]);
    for (std::size_t k = 0; k < design.p; ++k) {
      fit += row[k] * beta[k];
      magnitude += std::abs(row[k] * beta[k]);
    }
    // Rows interpolated by the fit carry rounding-level residuals; they are
    // on the threshold, not above it.
    const double r = design.response[i] - fit;
    if (r > 64.0 * std::numeric_limits<double>::epsilon() * magnitude) out.push_back(r);
  }
  return out;
}

std::vector<ThresholdCandidate> generate_candidates(const Design& design,
                                                    std::span<const double> levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0))
      fail(ErrorKind::kInvalidArgument, "candidate levels must lie in (0,1)");
    if (i > 0 && !(levels[i] > levels[i - 1]))
      fail(ErrorKind::kInvalidArgument, "candidate levels must be strictly increasing");
  }
  if (levels.empty()) fail(ErrorKind::kInvalidArgument, "no candidate levels");
  require_full_rank(design);

  std::vector<ThresholdCandidate> out(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto& c = out[i];
    c.level = levels[i];
    c.coefficients = fit_single_qr(design, levels[i]);
    c.n_exceedances = positive_residuals(design, c.coefficients).size();
    c.testable = c.n_exceedances >= kMinExceedances;
    if (!c.testable) c.note = "fewer than 10 exceedances";
  }
  return out;
}

std::size_t forward_stop(std::span<const double> p_values, double lambda) {
  std::size_t k_hat = 0;
  double sum = 0.0;
  for (std::size_t k = 1; k <= p_values.size(); ++k) {
    const double p = std::min(p_values[k - 1], 1.0 - 1e-15);
    sum -= std::log1p(-p);
    if (sum / static_cast<double>(k) <= lambda) k_hat = k;
  }
  return k_hat;
}

TransitionSelection select_transition(const Design& design, std::span<const double> levels,
                                      const SelectionOptions& options) {
  if (!(options.lambda > 0.0)) fail(ErrorKind::kInvalidArgument, "lambda must be positive");

  TransitionSelection sel;
  sel.lambda = options.lambda;
  sel.convention = options.convention;
  sel.candidates = generate_candidates(design, levels);

  parallel_for(sel.candidates.size(), [&](std::size_t i) {
    auto& c = sel.candidates[i];
    if (!c.testable) return;
    const auto exc = positive_residuals(design, c.coefficients);
    try {
      const AdTestResult r = ad_pvalue(exc, options.ad_bootstrap, derive_seed(options.seed, i));
      c.p_value = r.p_value;
      c.ad_statistic = r.statistic;
      c.params = r.params;
    } catch (const Error& e) {
      if (e.is_validation()) throw;
      c.testable = false;
      c.p_value = 0.0;
      c.note = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });

  bool any_testable = false;
  std::vector<double> p(sel.candidates.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = sel.candidates[i].p_value;
    any_testable = any_testable || sel.candidates[i].testable;
  }
  if (!any_testable)
    fail(ErrorKind::kSelectionFailure, "no candidate threshold has a testable tail");

  const std::size_t l = p.size();
  sel.k_hat = forward_stop(p, options.lambda);
  if (options.convention == Convention::kPaperLiteral) {
    sel.selected_index = sel.k_hat == 0 ? 0 : sel.k_hat - 1;
  } else if (sel.k_hat < l) {
    sel.selected_index = sel.k_hat;
  } else {
    sel.selected_index = l - 1;
    sel.warnings.push_back("every candidate threshold was rejected; using the last level");
  }
  // A level whose tail cannot be fitted cannot anchor the estimator; fall
  // back to the nearest lower level that can.
  if (!sel.candidates[sel.selected_index].testable) {
    std::size_t i = sel.selected_index;
    while (i > 0 && !sel.candidates[i].testable) --i;
    if (!sel.candidates[i].testable)
      while (!sel.candidates[i].testable) ++i;
    sel.warnings.push_back("selected level " + std::to_string(sel.candidates[sel.selected_index].level) +
                           " has no fittable tail; using " + std::to_string(sel.candidates[i].level));
    sel.selected_index = i;
  }
  sel.selected_level = sel.candidates[sel.selected_index].level;
  return sel;
}

TransitionSelection select_transition(const Dataset& data, std::span<const double> levels,
                                      const SelectionOptions& options) {
  return select_transition(Design::treatment_model(data), levels, options);
}

}  // namespace eqte
