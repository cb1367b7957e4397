#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "eqte/baselines.hpp"
#include "eqte/error.hpp"
#include "test_support.hpp"

using namespace eqte;

namespace {

Dataset dgp_covariates(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 3);
  std::normal_distribution<double> x1d(15.0, 6.0), x3d(1.0, 1.0);
  std::exponential_distribution<double> x2d(0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = x1d(rng), x2 = x2d(rng), x3 = x3d(rng);
    const double pi = 1.0 / (1.0 + std::exp(-(-3.0 + 0.1 * x1 + 0.1 * x2 + 0.2 * x3)));
    recs.push_back({0.0, u(rng) < pi ? 1 : 0, {x1, x2, x3}});
  }
  return Dataset(std::move(recs), {"x1", "x2", "x3"});
}

double empirical_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double k = std::ceil(static_cast<double>(v.size()) * p - 1e-9);
  return v[static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(v.size()))) - 1];
}

// Brute force: evaluate the weighted check loss at every data value and keep
// the smallest value attaining the minimum.
double check_loss_argmin(const std::vector<double>& y, const std::vector<double>& w, double p) {
  auto loss = [&](double q) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - q;
      s += w[i] * r * (p - (r < 0.0 ? 1.0 : 0.0));
    }
    return s;
  };
  double best = INFINITY, arg = INFINITY;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const double l = loss(y[i]);
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    if (l < best - tol || (std::abs(l - best) <= tol && y[i] < arg)) {
      if (l < best - tol) arg = y[i];
      else arg = std::min(arg, y[i]);
      best = std::min(best, l);
    }
  }
  return arg;
}

Dataset gaussian_location(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 4);
  std::normal_distribution<double> norm;
  std::bernoulli_distribution coin(0.5);
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = norm(rng);
    const int d = coin(rng) ? 1 : 0;
    recs.push_back({100.0 + 3.0 * d + 2.0 * x + norm(rng), d, {x}});
  }
  return Dataset(std::move(recs), {"x"});
}

}  // namespace

TEST_CASE("intercept-only propensity equals the logit of the treated fraction") {
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 400; ++i) recs.push_back({double(i), i % 4 == 0 ? 1 : 0, {}});
  const PropensityFit fit = fit_propensity(Dataset(std::move(recs), {}));
  REQUIRE(fit.gamma.size() == 1);
  CHECK(fit.gamma[0] == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-12));
  CHECK(fit.gamma[0] == doctest::Approx(-1.098612).epsilon(1e-6));
}

TEST_CASE("propensity recovers the simulation model") {
  const Dataset data = dgp_covariates(5000, 7);
  const PropensityFit fit = fit_propensity(data);
  const double eta = fit.gamma[0] + 15.0 * fit.gamma[1] + 2.0 * fit.gamma[2] + 1.0 * fit.gamma[3];
  const double truth = 1.0 / (1.0 + std::exp(1.1));
  CHECK(truth == doctest::Approx(0.24974).epsilon(1e-4));
  CHECK(std::abs(1.0 / (1.0 + std::exp(-eta)) - truth) < 0.05);
}

TEST_CASE("propensity score equations hold at the fit") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset data = test::small_treatment_data(800, seed);
    const PropensityFit fit = fit_propensity(data);
    std::vector<double> score(fit.gamma.size(), 0.0);
    double mean_pi = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double r = data[i].treatment - fit.fitted[i];
      score[0] += r;
      for (std::size_t k = 0; k < data.covariate_dim(); ++k) score[k + 1] += r * data[i].covariates[k];
      mean_pi += fit.fitted[i];
    }
    double norm = 0.0;
    for (double s : score) norm += s * s;
    CHECK(std::sqrt(norm) <= 1e-8);
    CHECK(std::abs(mean_pi / data.size() - double(data.treated_count()) / data.size()) <= 1e-8);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(fit.clamped[i] >= 0.01);
      CHECK(fit.clamped[i] <= 0.99);
    }
  }
}

TEST_CASE("perfect separation is reported") {
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 60; ++i) {
    const double x = i / 60.0;
    recs.push_back({1.0, x > 0.5 ? 1 : 0, {x}});
  }
  try {
    fit_propensity(Dataset(std::move(recs), {"x"}));
    FAIL("expected separation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSeparation);
  }
}

TEST_CASE("weighted quantile with uniform weights is the empirical quantile") {
  CHECK(weighted_quantile(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 1, 1, 1}, 0.5) ==
        2.0);
  Rng rng = make_stream(11, 0);
  std::normal_distribution<double> norm;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v(37 + rep * 5);
    for (auto& x : v) x = norm(rng);
    const std::vector<double> w(v.size(), 2.5);
    for (double p = 0.01; p < 1.0; p += 0.01) CHECK(weighted_quantile(v, w, p) == empirical_quantile(v, p));
    CHECK(weighted_quantile(v, w, 1.0) == *std::max_element(v.begin(), v.end()));
  }
}

TEST_CASE("point mass weights return that unit at every level") {
  const std::vector<double> v{5, -1, 8, 3};
  const std::vector<double> w{0, 0, 1, 0};
  for (double p : {0.01, 0.5, 0.999}) CHECK(weighted_quantile(v, w, p) == 8.0);
}

TEST_CASE("firpo and ipw agree with the brute-force check-loss minimizer") {
  std::vector<double> levels;
  for (int k = 1; k < 100; ++k) levels.push_back(k / 100.0);
  levels.push_back(0.995);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Dataset data = test::small_treatment_data(30 + 3 * seed, 1000 + seed, seed % 2 == 0);
    const PropensityFit prop = fit_propensity(data);
    const std::vector<double> y = data.outcomes();
    for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
      const auto ipw = ipw_effects(data, prop, levels, est);
      const auto firpo = firpo_effects(data, prop, levels, est);
      const auto w1 = arm_weights(data, prop, 1, est);
      const auto w0 = arm_weights(data, prop, 0, est);
      for (std::size_t j = 0; j < levels.size(); ++j) {
        CHECK(ipw[j].point == firpo[j].point);
        CHECK(firpo[j].q1 == check_loss_argmin(y, w1, levels[j]));
        CHECK(firpo[j].q0 == check_loss_argmin(y, w0, levels[j]));
      }
    }
  }
}

TEST_CASE("constant propensity gives the raw quantile difference") {
  std::vector<ObservedRecord> recs;
  Rng rng = make_stream(5, 0);
  std::normal_distribution<double> norm;
  std::vector<double> y1, y0;
  for (int i = 0; i < 300; ++i) {
    const int d = i % 3 == 0;
    const double y = norm(rng) + 2.0 * d;
    (d ? y1 : y0).push_back(y);
    recs.push_back({y, d, {}});
  }
  const Dataset data(std::move(recs), {});
  const PropensityFit prop = fit_propensity(data);
  const std::vector<double> levels{0.1, 0.5, 0.85, 0.95};
  for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
    const auto eff = ipw_effects(data, prop, levels, est);
    for (std::size_t j = 0; j < levels.size(); ++j)
      CHECK(eff[j].point == empirical_quantile(y1, levels[j]) - empirical_quantile(y0, levels[j]));
  }
}

TEST_CASE("ipw and firpo effects are affine equivariant") {
  const Dataset data = test::small_treatment_data(400, 21, true);
  const PropensityFit prop = fit_propensity(data);
  const std::vector<double> levels{0.5, 0.85, 0.9, 0.95, 0.995};
  for (auto [a, c] : {std::pair{1.0, 1234.5}, std::pair{3.5, -7.0}, std::pair{0.02, 0.0}}) {
    const Dataset moved = data.affine_outcome(a, c);
    for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
      const auto base_ipw = ipw_effects(data, prop, levels, est);
      const auto ipw = ipw_effects(moved, prop, levels, est);
      const auto firpo = firpo_effects(moved, prop, levels, est);
      for (std::size_t j = 0; j < levels.size(); ++j) {
        const double expect = a * base_ipw[j].point;
        const double scale = 1e-6 * std::max(1.0, std::abs(a * base_ipw[j].q1) + std::abs(c));
        CHECK(std::abs(ipw[j].point - expect) <= scale);
        CHECK(std::abs(firpo[j].point - expect) <= scale);
        CHECK(std::abs(ipw[j].q1 - (a * base_ipw[j].q1 + c)) <= scale);
      }
    }
  }
}

TEST_CASE("box-cox transform round trip") {
  for (double lambda : {-2.0, -0.5, 0.0, 0.5, 1.0, 2.0})
    for (double y : {0.01, 0.7, 1.0, 13.0, 250.0})
      CHECK(box_cox_inverse(box_cox(y, lambda), lambda) == doctest::Approx(y).epsilon(1e-12));
  CHECK(box_cox(5.0, 1.0) == doctest::Approx(4.0));
  CHECK(box_cox(std::exp(2.0), 0.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(box_cox(0.0, 0.5), Error);
}

TEST_CASE("box-cox shift makes outcomes positive") {
  CHECK(box_cox_shift(std::vector<double>{1, 2, 3}) == 0.0);
  const double s = box_cox_shift(std::vector<double>{-4, 0, 6});
  CHECK(s == doctest::Approx(4.1));
}

TEST_CASE("mixture quantile of one unit is the transformed normal quantile") {
  BoxCoxFit fit;
  fit.residual_sd = 0.4;
  const double z975 = 1.959963984540054;
  for (double lambda : {0.0, 0.5, -0.5}) {
    fit.exponent = lambda;
    fit.shift = 2.0;
    const std::vector<double> mu{0.9};
    const double expect = box_cox_inverse(0.9 + 0.4 * z975, lambda) - 2.0;
    CHECK(box_cox_mixture_quantile(fit, mu, 0.975) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("identity exponent on a location-shift model gives a constant effect") {
  const Dataset data = gaussian_location(1500, 3);
  BoxCoxConfig config;
  config.exponent_grid = {1.0};
  const BoxCoxFit fit = fit_box_cox(data, config);
  CHECK(fit.shift == 0.0);
  CHECK(fit.exponent == 1.0);
  const std::vector<double> levels{0.1, 0.5, 0.85, 0.995};
  for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
    const auto eff = or_effects(data, fit, levels, est);
    for (const auto& e : eff) CHECK(e.point == doctest::Approx(fit.coefficients[1]).epsilon(1e-9));
  }
  CHECK(std::abs(fit.coefficients[1] - 3.0) < 0.2);
}

TEST_CASE("log-normal outcomes select the log transform") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 9; ++seed) {
    Rng rng = make_stream(seed, 9);
    std::normal_distribution<double> norm;
    std::bernoulli_distribution coin(0.4);
    std::vector<ObservedRecord> recs;
    for (int i = 0; i < 2000; ++i) {
      const double x = norm(rng);
      const int d = coin(rng);
      recs.push_back({std::exp(1.0 + 0.5 * d + 0.3 * x + 0.6 * norm(rng)), d, {x}});
    }
    if (fit_box_cox(Dataset(std::move(recs), {"x"})).exponent == 0.0) ++hits;
  }
  CHECK(hits >= 5);
}

TEST_CASE("interactions add treatment by covariate columns") {
  const Dataset data = gaussian_location(300, 8);
  BoxCoxConfig config;
  config.interactions = true;
  const BoxCoxFit fit = fit_box_cox(data, config);
  CHECK(fit.coefficients.size() == 4);
  CHECK(fit.column_names.back() == "treatment:x");
  const auto eff = or_effects(data, fit, std::vector<double>{0.5, 0.9}, Estimand::kQte);
  CHECK(std::isfinite(eff[1].point));
}

TEST_CASE("or handles nonpositive outcomes through the shift") {
  const Dataset data = test::small_treatment_data(500, 4);
  const BoxCoxFit fit = fit_box_cox(data);
  CHECK(fit.shift > 0.0);
  CHECK(fit.residual_sd > 0.0);
  const auto eff = or_boxcox_effects(data, std::vector<double>{0.5, 0.85}, Estimand::kQte);
  CHECK(std::isfinite(eff[0].point));
  CHECK(std::abs(eff[0].point - 2.0) < 1.0);
}

TEST_CASE("quantile beyond a negative exponent's range is a transform error") {
  BoxCoxFit fit;
  fit.residual_sd = 0.4;
  fit.exponent = -0.5;
  const std::vector<double> mu{1.9};
  try {
    box_cox_mixture_quantile(fit, mu, 0.9);
    FAIL("expected transform error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTransform);
  }
}
