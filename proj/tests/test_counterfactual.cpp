#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "eqte/counterfactual.hpp"
#include "eqte/error.hpp"
#include "test_support.hpp"

using namespace eqte;

namespace {

// A fit assembled by hand: 1 covariate, coefficients chosen by the caller.
ProposedFit manual_fit(double treat_bulk, double treat_tail, double xi) {
  ProposedFit fit;
  fit.grid = build_grid(0.9, 9, 5, 0.999);
  fit.covariate_dim = 1;
  const auto bulk = fit.grid.bulk_levels();
  fit.bulk.levels.assign(bulk.begin(), bulk.end());
  fit.bulk.p = 3;
  for (double tau : fit.bulk.levels) {
    fit.bulk.coefficients.push_back(10.0 * tau);
    fit.bulk.coefficients.push_back(treat_bulk);
    fit.bulk.coefficients.push_back(1.0 + tau);
  }
  fit.tail.threshold_coefficients = {9.0, treat_tail, 1.9};
  fit.tail.params = {2.0, xi};
  fit.tail.exceedance_rate = 0.1;
  fit.tail.n_exceedances = 10;
  return fit;
}

Dataset covariate_free(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 1);
  std::normal_distribution<double> norm;
  std::exponential_distribution<double> expo(0.5);
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    const int d = i % 3 == 0 ? 1 : 0;
    recs.push_back({d ? 3.0 + expo(rng) : norm(rng), d, {}});
  }
  return Dataset(std::move(recs), {});
}

double empirical_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double k = std::ceil(static_cast<double>(v.size()) * p - 1e-9);
  return v[static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(v.size()))) - 1];
}

void check_valid(const StepCdf& cdf) {
  REQUIRE(!cdf.support.empty());
  CHECK(cdf.cum_mass.back() == 1.0);
  for (std::size_t i = 1; i < cdf.support.size(); ++i) {
    CHECK(cdf.support[i] > cdf.support[i - 1]);
    CHECK(cdf.cum_mass[i] >= cdf.cum_mass[i - 1]);
  }
  CHECK(cdf.cum_mass.front() >= 0.0);
}

ProposedOptions quick_options() {
  ProposedOptions opt;
  opt.selection.ad_bootstrap = 99;
  opt.selection.seed = 5;
  return opt;
}

}  // namespace

TEST_CASE("invert_cdf fixtures") {
  StepCdf cdf{{1, 2, 3}, {0.2, 0.5, 1.0}};
  CHECK(invert_cdf(cdf, 0.5) == 2.0);
  CHECK(invert_cdf(cdf, 0.51) == 3.0);
  CHECK(invert_cdf(cdf, 0.2) == 1.0);
  CHECK(invert_cdf(cdf, 0.01) == 1.0);
  CHECK(invert_cdf(cdf, 1.0) == 3.0);
  CHECK_THROWS_AS(invert_cdf(cdf, 0.0), Error);
}

TEST_CASE("StepCdf merges exact ties and normalizes") {
  const StepCdf cdf = StepCdf::from_points({{3.0, 0.25}, {1.0, 0.25}, {3.0, 0.25}, {2.0, 0.25}});
  CHECK(cdf.support == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(cdf.cum_mass == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(cdf(0.5) == 0.0);
  CHECK(cdf(2.0) == 0.5);
  CHECK(cdf(2.5) == 0.5);
}

TEST_CASE("conditional quantiles: sorted, zero effect, strict tail growth") {
  const ProposedFit fit = manual_fit(0.0, 0.0, 0.3);
  const std::vector<double> x = {0.7};
  const auto q0 = conditional_quantiles(fit, 0, x);
  const auto q1 = conditional_quantiles(fit, 1, x);
  CHECK(q0 == q1);
  CHECK(q0.size() == fit.grid.size());
  CHECK(std::is_sorted(q0.begin(), q0.end()));
  const std::size_t u = fit.grid.transition_index;
  for (std::size_t j = u; j < q0.size(); ++j) CHECK(q0[j] >= q0[u - 1]);
  CHECK(q0.back() > q0[u]);
  CHECK_THROWS_AS(conditional_quantiles(fit, 0, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("extreme levels shallower than the exceedance rate sit on the threshold") {
  ProposedFit fit = manual_fit(0.0, 0.0, 0.3);
  fit.tail.exceedance_rate = 0.05;  // 1 - tau exceeds zeta for the first extreme levels
  const std::vector<double> x = {0.0};
  const auto q = conditional_quantiles(fit, 0, x);
  CHECK(std::count(q.begin(), q.end(), 9.0) >= 1);
  CHECK(std::is_sorted(q.begin(), q.end()));
}

TEST_CASE("single-unit marginal distribution is that unit's quantiles") {
  const ProposedFit fit = manual_fit(2.0, 1.0, 0.2);
  const Dataset one({{0.0, 0, {0.4}}}, {"x"});
  const StepCdf cdf = marginal_cdf(fit, one, 1);
  const auto q = conditional_quantiles(fit, 1, std::vector<double>{0.4});
  check_valid(cdf);
  REQUIRE(cdf.support.size() == q.size());
  double cum = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    cum += fit.grid.weights[j];
    CHECK(cdf.support[j] == q[j]);
    CHECK(cdf.cum_mass[j] == doctest::Approx(cum).epsilon(1e-12));
  }
}

TEST_CASE("treated distribution: single treated unit, all treated, none treated") {
  const ProposedFit fit = manual_fit(2.0, 1.0, 0.2);
  const Dataset mixed({{0.0, 0, {0.4}}, {1.0, 1, {1.5}}, {2.0, 0, {-1.0}}}, {"x"});
  const StepCdf t = treated_cdf(fit, mixed, 0);
  const auto q = conditional_quantiles(fit, 0, std::vector<double>{1.5});
  CHECK(t.support == q);

  const Dataset all({{0.0, 1, {0.4}}, {1.0, 1, {1.5}}, {2.0, 1, {-1.0}}}, {"x"});
  for (int arm : {0, 1}) {
    const StepCdf a = treated_cdf(fit, all, arm);
    const StepCdf b = marginal_cdf(fit, all, arm);
    CHECK(a.support == b.support);
    CHECK(a.cum_mass == b.cum_mass);
  }

  const Dataset none({{0.0, 0, {0.4}}}, {"x"});
  try {
    treated_cdf(fit, none, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEstimandUndefined);
  }
}

TEST_CASE("dominating conditional quantiles give a dominated CDF") {
  const ProposedFit fit = manual_fit(1.5, 1.5, 0.25);
  const Dataset data = test::small_treatment_data(60, 3);
  const Dataset one_cov = data.select_covariates({"x1"});
  for (const auto& r : one_cov.records()) {
    const auto q0 = conditional_quantiles(fit, 0, r.covariates);
    const auto q1 = conditional_quantiles(fit, 1, r.covariates);
    for (std::size_t j = 0; j < q0.size(); ++j) REQUIRE(q1[j] >= q0[j]);
  }
  const StepCdf f1 = marginal_cdf(fit, one_cov, 1);
  const StepCdf f0 = marginal_cdf(fit, one_cov, 0);
  check_valid(f1);
  check_valid(f0);
  for (double y : f0.support) CHECK(f1(y) <= f0(y) + 1e-12);
  for (double y : f1.support) CHECK(f1(y) <= f0(y) + 1e-12);
}

TEST_CASE("fit_proposed refuses a tail with too few exceedances") {
  const Dataset data = test::small_treatment_data(50, 9);
  const Design design = Design::treatment_model(data);
  TransitionSelection sel;
  sel.candidates = generate_candidates(design, std::vector<double>{0.9});
  sel.selected_index = 0;
  sel.selected_level = 0.9;
  try {
    fit_proposed(data, sel);
    FAIL("expected insufficient tail");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientTail);
  }
}

TEST_CASE("effect levels beyond tau_max are rejected") {
  const Dataset data = test::small_treatment_data(400, 1);
  const std::vector<double> p = {0.9999};
  CHECK_THROWS_AS(run_proposed(data, p, quick_options()), Error);
}

TEST_CASE("proposed pipeline: valid CDFs, non-crossing bulk, equivariance") {
  // n * tau is never an integer on this grid, so each QR level has a unique
  // minimizer and the comparison is between well-defined points.
  const Dataset data = test::small_treatment_data(503, 12, true);
  const std::vector<double> p = {0.25, 0.5, 0.85, 0.9, 0.95, 0.995};
  const ProposedOptions opt = quick_options();
  const ProposedRun base = run_proposed(data, p, opt);
  CHECK(min_crossing_margin(base.fit.bulk, Design::treatment_model(data)) >= -1e-8);
  check_valid(marginal_cdf(base.fit, data, 0));
  check_valid(treated_cdf(base.fit, data, 1));
  CHECK(base.fit.bulk.level_count() == 75);
  CHECK(base.fit.grid.size() == 100);
  for (const auto& e : base.qte) CHECK(e.point == e.q1 - e.q0);

  for (const auto& [a, c] : {std::pair{1.0, 250.0}, std::pair{3.0, -4.0}, std::pair{0.01, 7.0}}) {
    const ProposedRun moved = run_proposed(data.affine_outcome(a, c), p, opt);
    CAPTURE(a);
    CAPTURE(c);
    REQUIRE(moved.selection.selected_index == base.selection.selected_index);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(moved.qte[i].point - a * base.qte[i].point) <=
            1e-6 * std::max(1.0, std::abs(a * base.qte[i].point)));
      CHECK(std::abs(moved.qtt[i].point - a * base.qtt[i].point) <=
            1e-6 * std::max(1.0, std::abs(a * base.qtt[i].point)));
    }
  }
}

TEST_CASE("null effect stays small") {
  Rng rng = make_stream(404, 0);
  std::normal_distribution<double> norm;
  std::bernoulli_distribution coin(0.5);
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 2000; ++i) recs.push_back({norm(rng), coin(rng) ? 1 : 0, {norm(rng)}});
  const Dataset data(std::move(recs), {"x"});
  const std::vector<double> p = {0.9};
  const ProposedRun run = run_proposed(data, p, quick_options(), true, false);
  const double iqr = 2.0 * 0.6744897501960817;
  CHECK(std::abs(run.qte[0].point) < 0.25 * iqr);
}

TEST_CASE("without covariates the estimator reproduces arm quantiles") {
  const Dataset data = covariate_free(1200, 3);
  std::vector<double> y1, y0;
  for (const auto& r : data.records()) (r.treatment ? y1 : y0).push_back(r.outcome);

  // dense bulk grid almost to tau_max, so the tail segment is negligible
  const std::vector<double> cand = {0.98};
  const Design design = Design::treatment_model(data);
  TransitionSelection sel;
  sel.candidates = generate_candidates(design, cand);
  sel.selected_index = 0;
  sel.selected_level = 0.98;
  GridConfig grid{200, 1, 0.985};
  const ProposedFit fit = fit_proposed(data, sel, grid);
  const double step = 0.98 / 200.0;
  const std::vector<double> p = {0.1, 0.25, 0.5, 0.75, 0.9};
  const auto eff = estimate_effects(fit, data, p, Estimand::kQte);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CAPTURE(p[i]);
    CHECK(eff[i].q1 >= empirical_quantile(y1, p[i] - step) - 1e-9);
    CHECK(eff[i].q1 <= empirical_quantile(y1, p[i] + step) + 1e-9);
    CHECK(eff[i].q0 >= empirical_quantile(y0, p[i] - step) - 1e-9);
    CHECK(eff[i].q0 <= empirical_quantile(y0, p[i] + step) + 1e-9);
  }
}

TEST_CASE("estimand names") {
  CHECK(to_string(Estimand::kQte) == "QTE");
  CHECK(parse_estimand("QTT") == Estimand::kQtt);
  CHECK_THROWS_AS(parse_estimand("ATE"), Error);
}
