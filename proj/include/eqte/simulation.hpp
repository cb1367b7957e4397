#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "eqte/data_model.hpp"
#include "eqte/methods.hpp"

namespace eqte {

// Error law of the simulation design: N(0, sd 10) or Student-t(1) at unit scale.
enum class ErrorDist { kGaussianSd10, kStudentT1 };

std::string_view to_string(ErrorDist e);
// Accepts "gaussian" and "t1".
ErrorDist parse_error_dist(std::string_view text);

struct DgpConfig {
  std::size_t n = 1000;
  ErrorDist error = ErrorDist::kGaussianSd10;
  std::uint64_t seed = 0;
};

// X1 ~ N(15, sd 6), X2 ~ Exp(mean 2), X3 ~ N(1, 1).
double dgp_propensity(double x1, double x2, double x3);
double dgp_outcome(int treatment, double x1, double x2, double eps);

// Covariates x1, x2, x3; outcome y; treatment d.
Dataset generate_dgp(const DgpConfig& config);

struct TrueEffect {
  double p = 0.0;
  double qte = 0.0;
  double qtt = 0.0;
};

// Monte Carlo truth: both potential outcomes for draws units sharing one eps
// per unit. QTE uses every unit, QTT the units drawn into treatment. Quantiles
// are lower order statistics (smallest value with empirical mass >= p).
std::vector<TrueEffect> oracle_true_effects(std::span<const double> p_list, ErrorDist error,
                                            std::size_t draws, std::uint64_t seed);

double oracle_true_quantile(double p, Estimand estimand, ErrorDist error, std::size_t draws,
                            std::uint64_t seed);

struct CellStats {
  std::size_t n = 0;
  ErrorDist error = ErrorDist::kGaussianSd10;
  Estimand estimand = Estimand::kQte;
  double p = 0.0;
  Method method = Method::kProposed;
  double truth = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  bool failed = false;  // more than 20% of replicates failed
  double mean = 0.0;
  double relative_bias_pct = 0.0;
  double variance = 0.0;  // divisor R - 1
  double mse = 0.0;       // mean squared error about the truth
  double relative_variance = 0.0;
  double relative_mse = 0.0;
  std::vector<double> estimates;  // in replicate order
};

// Mean, RB, variance and MSE of one method's replicate estimates. Relative
// measures are filled in by relate_to().
CellStats aggregate_cell(std::span<const double> estimates, std::size_t n_failed, double truth);

// Sets RV and RMSE of cell relative to the reference (proposed) cell. NaN
// when either cell failed.
void relate_to(CellStats& cell, const CellStats& reference);

struct StudyConfig {
  std::vector<std::size_t> n_list = {1000};
  std::vector<ErrorDist> errors = {ErrorDist::kGaussianSd10};
  std::vector<double> p_list = {0.85, 0.9, 0.95, 0.995};
  std::vector<Method> methods = {Method::kProposed, Method::kOr, Method::kIpw, Method::kFirpo};
  std::vector<Estimand> estimands = {Estimand::kQte};
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  std::size_t oracle_draws = 10'000'000;
  MethodSettings settings;
};

struct StudyResult {
  StudyConfig config;
  std::vector<CellStats> cells;
  // One entry per error law, aligned with config.errors.
  std::vector<std::vector<TrueEffect>> truths;

  const CellStats* find(std::size_t n, ErrorDist error, Estimand estimand, double p,
                        Method method) const;
};

// Every replicate draws one dataset and runs every method on it, so methods
// are compared on the same samples.
StudyResult run_study(const StudyConfig& config);

void write_study_csv(const StudyResult& result, std::ostream& out);

// Layout of the paper's tables: Estimate, RB, RV, RMSE per method, with an
// empty TMLE row kept for alignment.
void write_study_table(const StudyResult& result, std::ostream& out);

}  // namespace eqte
