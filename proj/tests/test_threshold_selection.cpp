#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "eqte/error.hpp"
#include "eqte/threshold_selection.hpp"
#include "test_support.hpp"

using namespace eqte;

namespace {

std::size_t brute_force_stop(const std::vector<double>& p, double lambda) {
  std::size_t best = 0;
  for (std::size_t k = 1; k <= p.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += -std::log(1.0 - std::min(p[i], 1.0 - 1e-15));
    if (s / static_cast<double>(k) <= lambda) best = k;
  }
  return best;
}

// Quantile function: uniform body on [0, 10] up to 0.95, GPD(2, 0.3) above.
double spliced_quantile(double u) {
  if (u <= 0.95) return 10.0 * u / 0.95;
  const double tail = (u - 0.95) / 0.05;
  return 10.0 + 2.0 / 0.3 * (std::pow(1.0 - tail, -0.3) - 1.0);
}

Design intercept_design(std::vector<double> y) { return Design::intercept_only(y); }

const std::vector<double> kDefaultLevels = equally_spaced_levels(0.75, 0.99, 10);

}  // namespace

TEST_CASE("forward_stop fixtures") {
  const std::vector<double> a = {0.001, 0.002, 0.9};
  CHECK(forward_stop(a, 0.05) == 2);
  const std::vector<double> b = {0.9, 0.9};
  CHECK(forward_stop(b, 0.05) == 0);
  const std::vector<double> c = {0.0, 0.0, 0.0};
  CHECK(forward_stop(c, 1e-9) == 3);
  const std::vector<double> d = {1.0, 1.0};
  CHECK(forward_stop(d, 1e9) == 2);
  CHECK(forward_stop(std::vector<double>{}, 0.05) == 0);
}

TEST_CASE("forward_stop equals a brute-force scan") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 15);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(len(rng));
    for (auto& v : p) {
      const double r = u(rng);
      v = r < 0.5 ? std::pow(u(rng), 6.0) : u(rng);  // mix of tiny and ordinary p-values
    }
    for (double lambda : {0.01, 0.05, 0.2, 1.0}) CHECK(forward_stop(p, lambda) == brute_force_stop(p, lambda));
  }
}

TEST_CASE("forward_stop is monotone in lambda") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(10);
    for (auto& v : p) v = u(rng) * u(rng);
    std::size_t prev = 0;
    for (double lambda = 0.001; lambda < 3.0; lambda *= 1.3) {
      const std::size_t k = forward_stop(p, lambda);
      CHECK(k >= prev);
      prev = k;
    }
  }
}

TEST_CASE("default candidate grid") {
  CHECK(kDefaultLevels.size() == 10);
  CHECK(kDefaultLevels.front() == 0.75);
  CHECK(kDefaultLevels.back() == 0.99);
  CHECK(kDefaultLevels[1] == doctest::Approx(0.75 + 0.24 / 9));
}

TEST_CASE("candidate exceedance counts track 1 - level") {
  const Dataset data = test::small_treatment_data(500, 19);
  const auto cands = generate_candidates(Design::treatment_model(data), kDefaultLevels);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double expected = 500.0 * (1.0 - cands[i].level);
    CHECK(std::abs(static_cast<double>(cands[i].n_exceedances) - expected) <=
          3.0 * std::sqrt(expected) + 4.0);
    if (i > 0) CHECK(cands[i].n_exceedances <= cands[i - 1].n_exceedances);
  }
  const std::vector<double> dup = {0.8, 0.8};
  CHECK_THROWS_AS(generate_candidates(Design::treatment_model(data), dup), Error);
}

TEST_CASE("intercept-only candidates are empirical quantiles") {
  std::vector<double> y(101);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> norm;
  for (auto& v : y) v = norm(rng);
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const auto cands = generate_candidates(intercept_design(y), kDefaultLevels);
  for (const auto& c : cands) {
    const auto k = static_cast<std::size_t>(std::ceil(101.0 * c.level - 1e-9));
    CHECK(c.coefficients[0] == sorted[k - 1]);
  }
}

TEST_CASE("pure GPD data selects the lowest candidate") {
  int lowest = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = make_stream(seed, 77);
    const auto y = sample_gpd(1000, {1.0, 0.2}, rng);
    SelectionOptions opt;
    opt.ad_bootstrap = 199;
    opt.seed = seed;
    for (Convention conv : {Convention::kPaperLiteral, Convention::kFirstAccepted}) {
      opt.convention = conv;
      const auto sel = select_transition(intercept_design(y), kDefaultLevels, opt);
      if (conv == Convention::kPaperLiteral && sel.k_hat == 0 && sel.selected_level == 0.75)
        ++lowest;
      if (sel.k_hat == 0) CHECK(sel.selected_level == 0.75);
    }
  }
  CHECK(lowest >= 8);
}

TEST_CASE("a tail that is GPD only high up moves the transition up") {
  int high = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng = make_stream(seed, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(2000);
    for (auto& v : y) v = spliced_quantile(u(rng));
    SelectionOptions opt;
    opt.ad_bootstrap = 199;
    opt.seed = seed;
    const auto sel = select_transition(intercept_design(y), kDefaultLevels, opt);
    if (sel.k_hat > 0 && sel.selected_level >= 0.90) ++high;
  }
  CHECK(high >= 3);
}

TEST_CASE("huge lambda rejects everything") {
  Rng rng = make_stream(4, 4);
  const auto y = sample_gpd(1500, {1.0, 0.2}, rng);
  SelectionOptions opt;
  opt.ad_bootstrap = 99;
  opt.lambda = 1e9;
  auto sel = select_transition(intercept_design(y), kDefaultLevels, opt);
  CHECK(sel.k_hat == 10);
  CHECK(sel.selected_level == 0.99);
  CHECK(sel.warnings.empty());

  opt.convention = Convention::kFirstAccepted;
  sel = select_transition(intercept_design(y), kDefaultLevels, opt);
  CHECK(sel.selected_level == 0.99);
  CHECK(sel.warnings.size() == 1);
}

TEST_CASE("an untestable selected level falls back to the highest fittable one") {
  Rng rng = make_stream(4, 6);
  const auto y = sample_gpd(400, {1.0, 0.2}, rng);
  SelectionOptions opt;
  opt.ad_bootstrap = 99;
  opt.lambda = 1e9;
  for (Convention c : {Convention::kPaperLiteral, Convention::kFirstAccepted}) {
    opt.convention = c;
    const auto sel = select_transition(intercept_design(y), kDefaultLevels, opt);
    CHECK(sel.k_hat == 10);
    CHECK_FALSE(sel.candidates.back().testable);
    CHECK(sel.selected().testable);
    CHECK(sel.selected_index == 8);
    CHECK_FALSE(sel.warnings.empty());
  }
}

TEST_CASE("first-accepted picks the level after the last rejection") {
  Rng rng = make_stream(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(2000);
  for (auto& v : y) v = spliced_quantile(u(rng));
  SelectionOptions opt;
  opt.ad_bootstrap = 199;
  const auto lit = select_transition(intercept_design(y), kDefaultLevels, opt);
  opt.convention = Convention::kFirstAccepted;
  const auto acc = select_transition(intercept_design(y), kDefaultLevels, opt);
  CHECK(lit.k_hat == acc.k_hat);
  REQUIRE(lit.k_hat >= 1);
  REQUIRE(lit.k_hat < 10);
  CHECK(acc.selected_index == lit.selected_index + 1);
}

TEST_CASE("selection is deterministic and validates input") {
  const Dataset data = test::small_treatment_data(400, 2, true);
  SelectionOptions opt;
  opt.ad_bootstrap = 99;
  opt.seed = 17;
  const auto a = select_transition(data, kDefaultLevels, opt);
  const auto b = select_transition(data, kDefaultLevels, opt);
  CHECK(a.k_hat == b.k_hat);
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].p_value == b.candidates[i].p_value);
    CHECK(a.candidates[i].coefficients == b.candidates[i].coefficients);
  }
  opt.lambda = 0.0;
  CHECK_THROWS_AS(select_transition(data, kDefaultLevels, opt), Error);
}

TEST_CASE("too few exceedances everywhere is a selection failure") {
  const Dataset data = test::small_treatment_data(30, 3);
  SelectionOptions opt;
  opt.ad_bootstrap = 99;
  try {
    select_transition(data, kDefaultLevels, opt);
    FAIL("expected selection failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSelectionFailure);
  }
}

TEST_CASE("convention names round trip") {
  CHECK(parse_convention("paper-literal") == Convention::kPaperLiteral);
  CHECK(parse_convention(to_string(Convention::kFirstAccepted)) == Convention::kFirstAccepted);
  CHECK_THROWS_AS(parse_convention("last"), Error);
}
