#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eqte/counterfactual.hpp"
#include "eqte/data_model.hpp"

namespace eqte {

struct PropensityOptions {
  double clamp_low = 0.01;
  double clamp_high = 0.99;
  int max_iterations = 100;
};

struct PropensityFit {
  std::vector<double> gamma;    // intercept, then covariates
  std::vector<double> fitted;   // MLE probabilities
  std::vector<double> clamped;  // fitted, clamped for weighting
  int iterations = 0;
  double log_likelihood = 0.0;
};

// Logistic regression of D on (1, X) by damped Newton. Throws Separation
// when some hyperplane classifies every unit correctly (no finite MLE).
PropensityFit fit_propensity(const Dataset& data, const PropensityOptions& options = {});

// Smallest value whose normalized cumulative weight reaches p.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

// Per-arm unit weights. QTE: 1/pi (treated) and 1/(1-pi) (control). QTT:
// 1 (treated) and pi/(1-pi) (control). Units outside the arm get weight 0.
std::vector<double> arm_weights(const Dataset& data, const PropensityFit& propensity,
                                int arm, Estimand estimand);

std::vector<EffectEstimate> ipw_effects(const Dataset& data, const PropensityFit& propensity,
                                        std::span<const double> p_list, Estimand estimand);

// Minimizer of the weighted check loss, taken as the weighted quantile with
// the same tie rule, so it agrees with ipw_effects.
std::vector<EffectEstimate> firpo_effects(const Dataset& data, const PropensityFit& propensity,
                                          std::span<const double> p_list, Estimand estimand);

struct BoxCoxConfig {
  std::vector<double> exponent_grid = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  bool interactions = false;  // add treatment x covariate columns
};

struct BoxCoxFit {
  double exponent = 1.0;
  double shift = 0.0;
  std::vector<double> coefficients;
  std::vector<std::string> column_names;
  double residual_sd = 0.0;
  double profile_log_likelihood = 0.0;
  bool interactions = false;
};

double box_cox(double y, double exponent);
double box_cox_inverse(double z, double exponent);

// Shift applied before transforming: 0 when every outcome is positive,
// otherwise -min(y) plus 1% of the outcome range.
double box_cox_shift(std::span<const double> y);

BoxCoxFit fit_box_cox(const Dataset& data, const BoxCoxConfig& config = {});

// Model mean of the transformed outcome for one unit under treatment t.
double box_cox_mean(const BoxCoxFit& fit, int treatment, std::span<const double> covariates);

// Quantile of the averaged model CDF n^-1 sum_i Phi((h(y) - mu_i) / sd) on
// the original outcome scale, by bisection on the transformed scale.
double box_cox_mixture_quantile(const BoxCoxFit& fit, std::span<const double> means, double p);

std::vector<EffectEstimate> or_effects(const Dataset& data, const BoxCoxFit& fit,
                                       std::span<const double> p_list, Estimand estimand);

std::vector<EffectEstimate> or_boxcox_effects(const Dataset& data, std::span<const double> p_list,
                                              Estimand estimand, const BoxCoxConfig& config = {});

}  // namespace eqte
