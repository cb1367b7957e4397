#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqte/data_model.hpp"
#include "eqte/evt.hpp"

namespace eqte {

enum class Convention { kPaperLiteral, kFirstAccepted };

std::string_view to_string(Convention c);
// Accepts "paper-literal" and "first-accepted".
Convention parse_convention(std::string_view text);

struct ThresholdCandidate {
  double level = 0.0;
  std::vector<double> coefficients;
  std::size_t n_exceedances = 0;
  // Untestable candidates (too few exceedances, or a tail that cannot be
  // fitted) carry p_value 0 and are treated as rejected.
  bool testable = false;
  double p_value = 0.0;
  double ad_statistic = 0.0;
  GpdParams params;
  std::string note;
};

struct TransitionSelection {
  std::vector<ThresholdCandidate> candidates;
  std::size_t k_hat = 0;
  std::size_t selected_index = 0;
  double selected_level = 0.0;
  double lambda = 0.05;
  Convention convention = Convention::kPaperLiteral;
  std::vector<std::string> warnings;

  const ThresholdCandidate& selected() const { return candidates[selected_index]; }
};

struct SelectionOptions {
  double lambda = 0.05;
  int ad_bootstrap = 500;
  std::uint64_t seed = 0;
  Convention convention = Convention::kPaperLiteral;
};

// count equally spaced levels from lo to hi inclusive.
std::vector<double> equally_spaced_levels(double lo, double hi, std::size_t count);

// Y_i - w_i' beta for rows strictly above the fit. Residuals at rounding
// level relative to |Y_i| + sum_k |w_ik beta_k| count as zero.
std::vector<double> positive_residuals(const Design& design, std::span<const double> beta);

// Threshold fits and exceedance counts; p-values left at zero.
std::vector<ThresholdCandidate> generate_candidates(const Design& design,
                                                    std::span<const double> levels);

// max{k : -(1/k) sum_{i<=k} log(1 - p_i) <= lambda}, 0 when no k qualifies.
std::size_t forward_stop(std::span<const double> p_values, double lambda);

TransitionSelection select_transition(const Design& design, std::span<const double> levels,
                                      const SelectionOptions& options);
TransitionSelection select_transition(const Dataset& data, std::span<const double> levels,
                                      const SelectionOptions& options);

}  // namespace eqte
