#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqte/data_model.hpp"
#include "eqte/evt.hpp"
#include "eqte/quantile_regression.hpp"
#include "eqte/threshold_selection.hpp"

namespace eqte {

enum class Estimand { kQte, kQtt };

std::string_view to_string(Estimand e);
Estimand parse_estimand(std::string_view text);

struct GridConfig {
  std::size_t bulk_points = 75;
  std::size_t extreme_points = 25;
  double tau_max = 0.9995;
};

struct ProposedFit {
  ProbabilityGrid grid;
  QuantileFit bulk;
  GpdTailFit tail;
  std::size_t n = 0;
  std::size_t n_treated = 0;
  std::size_t covariate_dim = 0;
  std::vector<std::string> warnings;
};

// Discrete distribution: strictly increasing support with cumulative mass.
struct StepCdf {
  std::vector<double> support;
  std::vector<double> cum_mass;

  // Sorts (value, mass) pairs, merges exactly equal values and normalizes the
  // final cumulative mass to 1. Masses must be nonnegative with positive sum.
  static StepCdf from_points(std::vector<std::pair<double, double>> points);

  double operator()(double y) const;
};

struct EffectEstimate {
  double p = 0.0;
  Estimand estimand = Estimand::kQte;
  double point = 0.0;
  double q1 = 0.0;
  double q0 = 0.0;
};

ProposedFit fit_proposed(const Dataset& data, const TransitionSelection& selection,
                         const GridConfig& grid_config = {});

// J conditional quantiles, bulk then tail, sorted nondecreasing.
std::vector<double> conditional_quantiles(const ProposedFit& fit, int treatment,
                                          std::span<const double> covariates);

StepCdf marginal_cdf(const ProposedFit& fit, const Dataset& data, int treatment);
StepCdf treated_cdf(const ProposedFit& fit, const Dataset& data, int treatment);

// Smallest support point whose cumulative mass reaches p. Masses within 1e-12
// of p count as reaching it so that exact grid levels are not lost to
// rounding in the accumulation.
double invert_cdf(const StepCdf& cdf, double p);

std::vector<EffectEstimate> effects_from_cdfs(const StepCdf& f1, const StepCdf& f0,
                                              std::span<const double> p_list, Estimand estimand);

std::vector<EffectEstimate> estimate_effects(const ProposedFit& fit, const Dataset& data,
                                             std::span<const double> p_list, Estimand estimand);

// Threshold selection, fit and effects in one call.
struct ProposedOptions {
  std::vector<double> candidate_levels = equally_spaced_levels(0.75, 0.99, 10);
  SelectionOptions selection;
  GridConfig grid;
};

struct ProposedRun {
  TransitionSelection selection;
  ProposedFit fit;
  std::vector<EffectEstimate> qte;
  std::vector<EffectEstimate> qtt;
};

ProposedRun run_proposed(const Dataset& data, std::span<const double> p_list,
                         const ProposedOptions& options, bool want_qte = true,
                         bool want_qtt = true);

void validate_levels_against_grid(std::span<const double> p_list, double tau_max);

}  // namespace eqte
