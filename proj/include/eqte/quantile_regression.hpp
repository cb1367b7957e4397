#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eqte/data_model.hpp"

namespace eqte {

struct LpOptions {
  // Certified bound on (primal - dual) / max(1, |primal|).
  double gap_tolerance = 1e-8;
  int max_iterations = 200;
};

// Linear quantile regression coefficients at one or more levels.
// coefficients is row-major (levels x p); column 0 is the intercept and, for
// treatment-model designs, column 1 the treatment coefficient.
struct QuantileFit {
  std::vector<double> levels;
  std::size_t p = 0;
  std::vector<double> coefficients;
  std::vector<std::string> column_names;
  double objective_value = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;

  std::size_t level_count() const noexcept { return levels.size(); }
  std::span<const double> coef(std::size_t level) const {
    return {coefficients.data() + level * p, p};
  }
};

// Minimizer of sum_i rho_tau(y_i - w_i' beta). Intercept-only designs are
// canonicalized to the lower endpoint of the minimizer interval.
// Errors: SingularDesign, SolverFailure (message carries the gap).
std::vector<double> fit_single_qr(const Design& design, double tau,
                                  const LpOptions& options = {});
std::vector<double> fit_single_qr(const Dataset& data, double tau,
                                  const LpOptions& options = {});

// Joint fit over strictly increasing levels with w_i' beta(tau_{j+1}) >=
// w_i' beta(tau_j) imposed at every observed design row. With a single level
// this is exactly fit_single_qr.
QuantileFit fit_noncrossing_qr(const Design& design, std::span<const double> levels,
                               const LpOptions& options = {});
QuantileFit fit_noncrossing_qr(const Dataset& data, std::span<const double> levels,
                               const LpOptions& options = {});

// beta0(tau) + t * beta1(tau) + x' beta*(tau) for every level of a fit made on
// a treatment-model design.
std::vector<double> predict_quantiles(const QuantileFit& fit, int treatment,
                                      std::span<const double> covariates);

// sum_i rho_tau(y_i - w_i' beta).
double check_objective(const Design& design, std::span<const double> beta, double tau);

// Smallest consecutive-level gap w_i' (beta_{j+1} - beta_j) over all rows of
// the design; +inf for single-level fits.
double min_crossing_margin(const QuantileFit& fit, const Design& design);

}  // namespace eqte
