#include "eqte/methods.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "eqte/error.hpp"

namespace eqte {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kProposed: return "proposed";
    case Method::kOr: return "or";
    case Method::kIpw: return "ipw";
    case Method::kFirpo: return "firpo";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Method m : {Method::kProposed, Method::kOr, Method::kIpw, Method::kFirpo})
    if (lower == to_string(m)) return m;
  fail(ErrorKind::kInvalidArgument, "unknown method '" + std::string(text) +
                                        "' (expected proposed, or, ipw or firpo)");
}

namespace {

Dataset subset(const Dataset& data, const std::vector<std::string>& names) {
  return names.empty() ? data : data.select_covariates(names);
}

}  // namespace

MethodResult run_method(Method method, const Dataset& data, std::span<const double> p_list,
                        bool want_qte, bool want_qtt, const MethodSettings& settings,
                        std::uint64_t seed) {
  MethodResult out;
  const Dataset outcome_data = subset(data, settings.outcome_covariates);
  switch (method) {
    case Method::kProposed: {
      ProposedOptions options = settings.proposed;
      options.selection.seed = seed;
      ProposedRun run = run_proposed(outcome_data, p_list, options, want_qte, want_qtt);
      out.qte = std::move(run.qte);
      out.qtt = std::move(run.qtt);
      out.warnings = run.fit.warnings;
      out.selection = std::move(run.selection);
      break;
    }
    case Method::kOr: {
      validate_levels_against_grid(p_list, 1.0 - 1e-12);
      const BoxCoxFit fit = fit_box_cox(outcome_data, settings.box_cox);
      if (want_qte) out.qte = or_effects(outcome_data, fit, p_list, Estimand::kQte);
      if (want_qtt) out.qtt = or_effects(outcome_data, fit, p_list, Estimand::kQtt);
      break;
    }
    case Method::kIpw:
    case Method::kFirpo: {
      validate_levels_against_grid(p_list, 1.0);
      const PropensityFit prop =
          fit_propensity(subset(data, settings.propensity_covariates), settings.propensity);
      const auto effects = method == Method::kIpw ? ipw_effects : firpo_effects;
      if (want_qte) out.qte = effects(data, prop, p_list, Estimand::kQte);
      if (want_qtt) out.qtt = effects(data, prop, p_list, Estimand::kQtt);
      break;
    }
  }
  return out;
}

std::vector<double> flatten_points(const MethodResult& result) {
  std::vector<double> v;
  for (const auto& e : result.qte) v.push_back(e.point);
  for (const auto& e : result.qtt) v.push_back(e.point);
  return v;
}

}  // namespace eqte
