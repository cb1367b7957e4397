// eqte: command-line front end for extreme quantile treatment effects.
//
//   eqte threshold --data f.csv --outcome y --treatment d --covariates x1,x2
//   eqte estimate  --data f.csv ... --methods proposed,ipw --p 0.9,0.995
//   eqte simulate  --n 1000 --error gaussian,t1 --reps 200
//
// Exit codes: 0 success, 2 invalid input, 3 estimation failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "eqte/bootstrap.hpp"
#include "eqte/error.hpp"
#include "eqte/methods.hpp"
#include "eqte/parallel.hpp"
#include "eqte/rng.hpp"
#include "eqte/simulation.hpp"

#ifndef EQTE_VERSION
#define EQTE_VERSION "0.0.0"
#endif

namespace {

using json = nlohmann::ordered_json;
using namespace eqte;

constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

struct Options {
  std::string data_path;
  std::string outcome = "y";
  std::string treatment = "d";
  std::string covariates;
  std::string propensity_covariates;
  std::string methods = "proposed,or,ipw,firpo";
  std::string p_list = "0.85,0.9,0.95,0.995";
  std::string estimands = "qte,qtt";
  double lambda = 0.05;
  std::string candidates = "0.75:0.99:10";
  std::size_t bulk_points = 75;
  std::size_t extreme_points = 25;
  double tau_max = 0.9995;
  std::size_t bootstrap = 1000;
  std::size_t bootstrap_b = 0;
  double ci_level = 0.95;
  std::string ci_method = "percentile";
  int ad_bootstrap = 500;
  std::uint64_t seed = 0;
  std::string convention = "paper-literal";
  std::string out;
  bool interactions = false;
  double clamp_low = 0.01;
  double clamp_high = 0.99;
  // simulate
  std::string n_list = "1000";
  std::string errors = "gaussian,t1";
  std::size_t reps = 200;
  std::size_t oracle_draws = 10'000'000;
  std::string csv_path;
  std::string table_path;
};

std::vector<std::string> split(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kInvalidArgument, "cannot read " + what + " value '" + s + "'");
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split(text)) out.push_back(parse_double(s, "--p"));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "--p lists no probability levels");
  return out;
}

// "lo:hi:count" or an explicit comma-separated list.
std::vector<double> parse_candidates(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 3 && text.find(',') == std::string::npos) {
    const double count = parse_double(parts[2], "--candidates");
    if (count < 1 || count != std::floor(count))
      fail(ErrorKind::kInvalidArgument, "--candidates count must be a positive integer");
    return equally_spaced_levels(parse_double(parts[0], "--candidates"),
                                 parse_double(parts[1], "--candidates"),
                                 static_cast<std::size_t>(count));
  }
  std::vector<double> out;
  for (const auto& s : split(text)) out.push_back(parse_double(s, "--candidates"));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "--candidates lists no levels");
  return out;
}

MethodSettings method_settings(const Options& o) {
  MethodSettings s;
  s.proposed.candidate_levels = parse_candidates(o.candidates);
  s.proposed.selection.lambda = o.lambda;
  s.proposed.selection.ad_bootstrap = o.ad_bootstrap;
  s.proposed.selection.convention = parse_convention(o.convention);
  s.proposed.grid = {o.bulk_points, o.extreme_points, o.tau_max};
  s.propensity.clamp_low = o.clamp_low;
  s.propensity.clamp_high = o.clamp_high;
  s.box_cox.interactions = o.interactions;
  return s;
}

void validate_common(const Options& o) {
  if (!(o.lambda > 0.0)) fail(ErrorKind::kInvalidArgument, "--lambda must be positive");
  if (!(o.tau_max > 0.0 && o.tau_max < 1.0))
    fail(ErrorKind::kInvalidArgument, "--tau-max must lie in (0,1)");
  if (o.bulk_points < 1 || o.extreme_points < 1)
    fail(ErrorKind::kInvalidArgument, "grid point counts must be at least 1");
  if (o.ad_bootstrap < 1) fail(ErrorKind::kInvalidArgument, "--ad-bootstrap must be positive");
  if (!(0.0 < o.clamp_low && o.clamp_low < o.clamp_high && o.clamp_high < 1.0))
    fail(ErrorKind::kInvalidArgument, "--clamp bounds must satisfy 0 < low < high < 1");
  const auto levels = parse_candidates(o.candidates);
  for (double l : levels)
    if (!(l > 0.0 && l < o.tau_max))
      fail(ErrorKind::kInvalidArgument, "candidate levels must lie in (0, tau_max)");
  parse_convention(o.convention);
}

json base_report(const std::string& command, const Options& o) {
  json r;
  r["tool"] = "eqte";
  r["version"] = EQTE_VERSION;
  r["command"] = command;
  r["seed"] = o.seed;
  r["convention"] = std::string(to_string(parse_convention(o.convention)));
  return r;
}

json selection_config(const Options& o) {
  return {{"lambda", o.lambda},
          {"candidates", parse_candidates(o.candidates)},
          {"ad_bootstrap", o.ad_bootstrap},
          {"convention", std::string(to_string(parse_convention(o.convention)))},
          {"bulk_points", o.bulk_points},
          {"extreme_points", o.extreme_points},
          {"tau_max", o.tau_max}};
}

struct Loaded {
  Dataset data;
  std::vector<std::string> outcome_covariates;
  std::vector<std::string> propensity_covariates;
};

Loaded load(const Options& o) {
  if (o.data_path.empty()) fail(ErrorKind::kInvalidArgument, "--data is required");
  std::ifstream in(o.data_path);
  if (!in) fail(ErrorKind::kSchema, "cannot open data file '" + o.data_path + "'");
  std::vector<std::string> outcome_cov = split(o.covariates);
  std::vector<std::string> prop_cov =
      o.propensity_covariates.empty() ? outcome_cov : split(o.propensity_covariates);
  std::vector<std::string> all = outcome_cov;
  for (const auto& c : prop_cov)
    if (std::find(all.begin(), all.end(), c) == all.end()) all.push_back(c);
  try {
    Dataset data = ingest_csv(in, o.outcome, o.treatment, all);
    return {std::move(data), outcome_cov, prop_cov};
  } catch (const Error& e) {
    throw Error(e.kind(), o.data_path + ": " + e.what());
  }
}

json data_summary(const Options& o, const Loaded& l) {
  return {{"path", o.data_path},
          {"n", l.data.size()},
          {"treated", l.data.treated_count()},
          {"outcome", o.outcome},
          {"treatment", o.treatment},
          {"covariates", l.outcome_covariates},
          {"propensity_covariates", l.propensity_covariates}};
}

json selection_json(const TransitionSelection& sel) {
  json cands = json::array();
  for (const auto& c : sel.candidates) {
    json j = {{"level", c.level},
              {"n_exceedances", c.n_exceedances},
              {"testable", c.testable},
              {"p_value", c.p_value},
              {"ad_statistic", c.ad_statistic},
              {"sigma", c.params.sigma},
              {"xi", c.params.xi}};
    if (!c.note.empty()) j["note"] = c.note;
    cands.push_back(j);
  }
  return {{"k_hat", sel.k_hat},
          {"tau_u", sel.selected_level},
          {"lambda", sel.lambda},
          {"convention", std::string(to_string(sel.convention))},
          {"candidates", cands},
          {"warnings", sel.warnings}};
}

void emit(const json& report, const Options& o) {
  const std::string text = report.dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) fail(ErrorKind::kInvalidArgument, "cannot write '" + o.out + "'");
  f << text;
}

int cmd_threshold(const Options& o) {
  validate_common(o);
  const Loaded l = load(o);
  const MethodSettings s = method_settings(o);
  SelectionOptions sel_opt = s.proposed.selection;
  sel_opt.seed = o.seed;
  const Dataset data = l.data.select_covariates(l.outcome_covariates);
  data.require_both_arms("threshold selection");
  TransitionSelection sel;
  try {
    sel = select_transition(data, s.proposed.candidate_levels, sel_opt);
  } catch (const Error& e) {
    if (e.is_validation()) throw;
    std::cerr << "eqte: threshold selection failed (" << to_string(e.kind()) << "): " << e.what()
              << "\n";
    return kExitEstimation;
  }
  std::cerr << "level      exceed  p-value\n";
  for (const auto& c : sel.candidates) {
    char line[96];
    std::snprintf(line, sizeof line, "%-9.4f %7zu  %s\n", c.level, c.n_exceedances,
                  c.testable ? std::to_string(c.p_value).c_str() : "untestable");
    std::cerr << line;
  }
  std::cerr << "k_hat = " << sel.k_hat << ", tau_u = " << sel.selected_level << "\n";
  json r = base_report("threshold", o);
  r["config"] = selection_config(o);
  r["data"] = data_summary(o, l);
  r["selection"] = selection_json(sel);
  emit(r, o);
  return 0;
}

int cmd_estimate(const Options& o) {
  validate_common(o);
  std::vector<Method> methods;
  for (const auto& m : split(o.methods)) methods.push_back(parse_method(m));
  if (methods.empty()) fail(ErrorKind::kInvalidArgument, "--methods lists no method");
  const std::vector<double> p_list = parse_levels(o.p_list);
  validate_levels_against_grid(p_list, o.tau_max);
  bool want_qte = false, want_qtt = false;
  for (const auto& e : split(o.estimands)) {
    const Estimand est = parse_estimand(e);
    (est == Estimand::kQte ? want_qte : want_qtt) = true;
  }
  if (!want_qte && !want_qtt) fail(ErrorKind::kInvalidArgument, "--estimands lists nothing");
  if (o.bootstrap != 0 && o.bootstrap < 100)
    fail(ErrorKind::kInvalidArgument, "--bootstrap must be 0 or at least 100");
  if (!(o.ci_level > 0.0 && o.ci_level < 1.0))
    fail(ErrorKind::kInvalidArgument, "--ci-level must lie in (0,1)");
  const CiMethod ci = o.ci_method == "basic"        ? CiMethod::kBasic
                      : o.ci_method == "percentile" ? CiMethod::kPercentile
                                                    : (fail(ErrorKind::kInvalidArgument,
                                                            "--ci must be percentile or basic"),
                                                       CiMethod::kPercentile);

  const Loaded l = load(o);
  l.data.require_both_arms("estimation");
  const std::size_t n = l.data.size();
  const std::size_t b = o.bootstrap_b == 0 ? n : o.bootstrap_b;
  if (o.bootstrap > 0 && (b < 10 || b > n))
    fail(ErrorKind::kInvalidArgument, "--bootstrap-b must satisfy 10 <= b <= n");
  MethodSettings settings = method_settings(o);
  settings.outcome_covariates = l.outcome_covariates;
  settings.propensity_covariates = l.propensity_covariates;

  json r = base_report("estimate", o);
  json cfg = selection_config(o);
  cfg["methods"] = split(o.methods);
  cfg["p"] = p_list;
  cfg["estimands"] = split(o.estimands);
  cfg["bootstrap"] = o.bootstrap;
  cfg["bootstrap_b"] = o.bootstrap > 0 ? json(b) : json(nullptr);
  cfg["bootstrap_method"] = o.bootstrap > 0 && b != n ? "b_out_of_n" : "full";
  cfg["ci_level"] = o.ci_level;
  cfg["ci_method"] = std::string(to_string(ci));
  cfg["propensity_clamp"] = {o.clamp_low, o.clamp_high};
  cfg["or_interactions"] = o.interactions;
  cfg["threads"] = thread_count();
  r["config"] = cfg;
  r["data"] = data_summary(o, l);

  json results = json::array();
  json method_status = json::object();
  std::size_t succeeded = 0;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const Method m = methods[k];
    const std::string name(to_string(m));
    const std::uint64_t method_seed = derive_seed(o.seed, k);
    json status;
    MethodResult res;
    try {
      res = run_method(m, l.data, p_list, want_qte, want_qtt, settings, method_seed);
    } catch (const Error& e) {
      if (e.is_validation()) throw;
      status = {{"status", "failed"}, {"error_kind", std::string(to_string(e.kind()))},
                {"message", e.what()}};
      std::cerr << "eqte: " << name << " failed (" << to_string(e.kind()) << "): " << e.what()
                << "\n";
      for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
        if ((est == Estimand::kQte && !want_qte) || (est == Estimand::kQtt && !want_qtt)) continue;
        for (double p : p_list)
          results.push_back({{"method", name}, {"estimand", std::string(to_string(est))},
                             {"p", p}, {"status", "failed"},
                             {"error_kind", std::string(to_string(e.kind()))}});
      }
      method_status[name] = status;
      continue;
    }
    ++succeeded;
    status = {{"status", "ok"}, {"warnings", res.warnings}};
    if (res.selection) status["threshold"] = selection_json(*res.selection);

    std::vector<BootstrapSummary> boot;
    if (o.bootstrap > 0) {
      BootstrapConfig bc{o.bootstrap, derive_seed(method_seed, 0xB007), o.ci_level, ci};
      auto estimator = [&](const Dataset& d, std::uint64_t seed) {
        return flatten_points(run_method(m, d, p_list, want_qte, want_qtt, settings, seed));
      };
      try {
        boot = bootstrap_vector(l.data, estimator, b, bc);
        status["bootstrap_failed_replicates"] = boot.front().n_failed;
      } catch (const Error& e) {
        if (e.is_validation()) throw;
        status["bootstrap_error"] = {{"error_kind", std::string(to_string(e.kind()))},
                                     {"message", e.what()}};
        std::cerr << "eqte: " << name << " bootstrap failed: " << e.what() << "\n";
      }
    }
    std::size_t idx = 0;
    for (const auto* list : {&res.qte, &res.qtt}) {
      for (const auto& e : *list) {
        json cell = {{"method", name},
                     {"estimand", std::string(to_string(e.estimand))},
                     {"p", e.p},
                     {"status", "ok"},
                     {"estimate", e.point},
                     {"q1", e.q1},
                     {"q0", e.q0}};
        if (res.selection) cell["tau_u"] = res.selection->selected_level;
        if (!boot.empty()) {
          const BootstrapSummary& s = boot[idx];
          cell["se"] = s.se;
          cell["ci_low"] = s.ci_low;
          cell["ci_high"] = s.ci_high;
          cell["bias"] = s.bias;
          cell["bootstrap_replicates"] = s.replicates.size();
        }
        results.push_back(cell);
        ++idx;
      }
    }
    method_status[name] = status;
  }
  r["methods"] = method_status;
  r["results"] = results;
  emit(r, o);

  for (const auto& cell : results) {
    if (cell["status"] != "ok") continue;
    std::cerr << cell["method"].get<std::string>() << ' ' << cell["estimand"].get<std::string>()
              << " p=" << cell["p"].get<double>() << ": " << cell["estimate"].get<double>();
    if (cell.contains("se"))
      std::cerr << " (se " << cell["se"].get<double>() << ", CI " << cell["ci_low"].get<double>()
                << " .. " << cell["ci_high"].get<double>() << ")";
    std::cerr << "\n";
  }
  return succeeded > 0 ? 0 : kExitEstimation;
}

int cmd_simulate(const Options& o) {
  validate_common(o);
  if (o.reps < 50) fail(ErrorKind::kInvalidArgument, "--reps must be at least 50");
  StudyConfig cfg;
  cfg.n_list.clear();
  for (const auto& s : split(o.n_list)) {
    const double v = parse_double(s, "--n");
    if (v < 50 || v != std::floor(v)) fail(ErrorKind::kInvalidArgument, "--n values must be integers >= 50");
    cfg.n_list.push_back(static_cast<std::size_t>(v));
  }
  cfg.errors.clear();
  for (const auto& s : split(o.errors)) cfg.errors.push_back(parse_error_dist(s));
  cfg.p_list = parse_levels(o.p_list);
  validate_levels_against_grid(cfg.p_list, o.tau_max);
  cfg.methods.clear();
  for (const auto& m : split(o.methods)) cfg.methods.push_back(parse_method(m));
  cfg.estimands.clear();
  for (const auto& e : split(o.estimands)) cfg.estimands.push_back(parse_estimand(e));
  if (cfg.n_list.empty() || cfg.errors.empty() || cfg.methods.empty() || cfg.estimands.empty())
    fail(ErrorKind::kInvalidArgument, "simulation grid is empty");
  cfg.replicates = o.reps;
  cfg.seed = o.seed;
  cfg.oracle_draws = o.oracle_draws;
  cfg.settings = method_settings(o);
  // The outcome models use X1 and X2; the propensity model uses all three.
  cfg.settings.outcome_covariates = {"x1", "x2"};

  StudyResult result;
  try {
    result = run_study(cfg);
  } catch (const Error& e) {
    if (e.is_validation()) throw;
    std::cerr << "eqte: simulation failed (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitEstimation;
  }
  if (!o.csv_path.empty()) {
    std::ofstream f(o.csv_path, std::ios::binary);
    if (!f) fail(ErrorKind::kInvalidArgument, "cannot write '" + o.csv_path + "'");
    write_study_csv(result, f);
  }
  std::ostringstream table;
  write_study_table(result, table);
  if (!o.table_path.empty()) {
    std::ofstream f(o.table_path, std::ios::binary);
    if (!f) fail(ErrorKind::kInvalidArgument, "cannot write '" + o.table_path + "'");
    f << table.str();
  }
  std::cerr << table.str();

  json r = base_report("simulate", o);
  json c = selection_config(o);
  c["n"] = cfg.n_list;
  c["errors"] = split(o.errors);
  c["p"] = cfg.p_list;
  c["methods"] = split(o.methods);
  c["estimands"] = split(o.estimands);
  c["replicates"] = cfg.replicates;
  c["oracle_draws"] = cfg.oracle_draws;
  c["outcome_covariates"] = cfg.settings.outcome_covariates;
  c["dgp_reading"] = "X1 ~ N(15, sd 6); X2 ~ Exp(mean 2); X3 ~ N(1, 1); gaussian eps sd 10; "
                     "t1 eps unit scale; one eps per unit shared across potential outcomes";
  r["config"] = c;
  json truths = json::array();
  for (std::size_t ei = 0; ei < cfg.errors.size(); ++ei)
    for (const auto& t : result.truths[ei])
      truths.push_back({{"error", std::string(to_string(cfg.errors[ei]))},
                        {"p", t.p}, {"qte", t.qte}, {"qtt", t.qtt}});
  r["truths"] = truths;
  auto number = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  json cells = json::array();
  for (const auto& cell : result.cells)
    cells.push_back({{"n", cell.n},
                     {"error", std::string(to_string(cell.error))},
                     {"estimand", std::string(to_string(cell.estimand))},
                     {"p", cell.p},
                     {"method", std::string(to_string(cell.method))},
                     {"status", cell.failed ? "failed" : "ok"},
                     {"replicates", cell.n_ok},
                     {"failed_replicates", cell.n_failed},
                     {"truth", cell.truth},
                     {"mean", number(cell.mean)},
                     {"relative_bias_pct", number(cell.relative_bias_pct)},
                     {"variance", number(cell.variance)},
                     {"mse", number(cell.mse)},
                     {"relative_variance", number(cell.relative_variance)},
                     {"relative_mse", number(cell.relative_mse)}});
  r["cells"] = cells;
  emit(r, o);
  return 0;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--lambda", o.lambda, "ForwardStop false discovery level")->capture_default_str();
  app->add_option("--candidates", o.candidates, "candidate levels, lo:hi:count or a list")
      ->capture_default_str();
  app->add_option("--bulk-points", o.bulk_points, "bulk grid points")->capture_default_str();
  app->add_option("--extreme-points", o.extreme_points, "tail grid points")->capture_default_str();
  app->add_option("--tau-max", o.tau_max, "largest grid level")->capture_default_str();
  app->add_option("--ad-bootstrap", o.ad_bootstrap, "bootstrap size of each Anderson-Darling test")
      ->capture_default_str();
  app->add_option("--seed", o.seed, "random seed")->capture_default_str();
  app->add_option("--convention", o.convention, "paper-literal or first-accepted")
      ->capture_default_str();
  app->add_option("--out", o.out, "JSON report path (default stdout)");
}

void add_data(CLI::App* app, Options& o) {
  app->add_option("--data", o.data_path, "CSV file with a header row")->required();
  app->add_option("--outcome", o.outcome, "outcome column")->capture_default_str();
  app->add_option("--treatment", o.treatment, "0/1 treatment column")->capture_default_str();
  app->add_option("--covariates", o.covariates, "outcome model covariates, comma separated");
  app->add_option("--propensity-covariates", o.propensity_covariates,
                  "propensity covariates (default: --covariates)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme quantile treatment effects"};
  app.set_version_flag("--version", EQTE_VERSION);
  app.require_subcommand(1);
  Options o;

  CLI::App* threshold = app.add_subcommand("threshold", "select the bulk/tail transition level");
  add_data(threshold, o);
  add_common(threshold, o);

  CLI::App* estimate = app.add_subcommand("estimate", "estimate quantile treatment effects");
  add_data(estimate, o);
  add_common(estimate, o);
  estimate->add_option("--methods", o.methods, "proposed, or, ipw, firpo")->capture_default_str();
  estimate->add_option("--p", o.p_list, "probability levels")->capture_default_str();
  estimate->add_option("--estimands", o.estimands, "qte, qtt")->capture_default_str();
  estimate->add_option("--bootstrap", o.bootstrap, "bootstrap replicates (0 = none)")
      ->capture_default_str();
  estimate->add_option("--bootstrap-b", o.bootstrap_b, "subsample size (0 = full bootstrap)")
      ->capture_default_str();
  estimate->add_option("--ci-level", o.ci_level, "confidence level")->capture_default_str();
  estimate->add_option("--ci", o.ci_method, "percentile or basic")->capture_default_str();
  estimate->add_flag("--interactions", o.interactions, "treatment x covariate terms in OR");
  estimate->add_option("--clamp-low", o.clamp_low, "propensity clamp")->capture_default_str();
  estimate->add_option("--clamp-high", o.clamp_high, "propensity clamp")->capture_default_str();

  CLI::App* simulate = app.add_subcommand("simulate", "run the simulation study");
  add_common(simulate, o);
  simulate->add_option("--n", o.n_list, "sample sizes")->capture_default_str();
  simulate->add_option("--error", o.errors, "gaussian, t1")->capture_default_str();
  simulate->add_option("--reps", o.reps, "replicates per cell (>= 50)")->capture_default_str();
  simulate->add_option("--p", o.p_list, "probability levels")->capture_default_str();
  simulate->add_option("--methods", o.methods, "proposed, or, ipw, firpo")->capture_default_str();
  simulate->add_option("--estimands", o.estimands, "qte, qtt")->capture_default_str();
  simulate->add_option("--oracle-draws", o.oracle_draws, "Monte Carlo draws for the truth")
      ->capture_default_str();
  simulate->add_option("--csv", o.csv_path, "CSV table path");
  simulate->add_option("--table", o.table_path, "text table path");
  simulate->add_flag("--interactions", o.interactions, "treatment x covariate terms in OR");
  o.estimands = "qte,qtt";

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  try {
    if (*threshold) return cmd_threshold(o);
    if (*estimate) return cmd_estimate(o);
    return cmd_simulate(o);
  } catch (const Error& e) {
    std::cerr << "eqte: " << (e.is_validation() ? "invalid input" : "estimation failed") << " ("
              << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "eqte: " << e.what() << "\n";
    return kExitEstimation;
  }
}
