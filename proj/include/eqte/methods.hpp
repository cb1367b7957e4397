#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqte/baselines.hpp"
#include "eqte/counterfactual.hpp"

namespace eqte {

enum class Method { kProposed, kOr, kIpw, kFirpo };

std::string_view to_string(Method m);
// Accepts proposed, or, ipw, firpo (case-insensitive).
Method parse_method(std::string_view text);

struct MethodSettings {
  ProposedOptions proposed;
  PropensityOptions propensity;
  BoxCoxConfig box_cox;
  // Subsets of the dataset's covariates; empty means all of them.
  std::vector<std::string> outcome_covariates;
  std::vector<std::string> propensity_covariates;
};

struct MethodResult {
  std::vector<EffectEstimate> qte;
  std::vector<EffectEstimate> qtt;
  std::optional<TransitionSelection> selection;  // proposed only
  std::vector<std::string> warnings;
};

// One estimator on one dataset. The seed drives the only randomness (the A2
// bootstrap inside threshold selection).
MethodResult run_method(Method method, const Dataset& data, std::span<const double> p_list,
                        bool want_qte, bool want_qtt, const MethodSettings& settings,
                        std::uint64_t seed);

// Points flattened as [qte at each p..., qtt at each p...] for the bootstrap.
std::vector<double> flatten_points(const MethodResult& result);

}  // namespace eqte
