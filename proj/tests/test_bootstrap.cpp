#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "eqte/bootstrap.hpp"
#include "eqte/error.hpp"
#include "test_support.hpp"

using namespace eqte;

namespace {

double sample_mean(const Dataset& d, std::uint64_t) {
  double s = 0.0;
  for (const auto& r : d.records()) s += r.outcome;
  return s / static_cast<double>(d.size());
}

Dataset normal_sample(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> norm(5.0, 2.0);
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) recs.push_back({norm(rng), int(i % 2), {}});
  return Dataset(std::move(recs), {});
}

}  // namespace

TEST_CASE("type-7 percentile fixture") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  BootstrapConfig cfg;
  const BootstrapSummary s = summarize_replicates(50.0, v, 0, cfg);
  CHECK(s.ci_low == doctest::Approx(3.475).epsilon(1e-12));
  CHECK(s.ci_high == doctest::Approx(97.525).epsilon(1e-12));
  CHECK(s.bias == doctest::Approx(0.5));
  CHECK(s.se == doctest::Approx(std::sqrt(100.0 * 101.0 / 12.0)).epsilon(1e-12));

  cfg.ci_method = CiMethod::kBasic;
  const BootstrapSummary basic = summarize_replicates(50.0, v, 0, cfg);
  CHECK(basic.ci_low == doctest::Approx(100.0 - 97.525));
  CHECK(basic.ci_high == doctest::Approx(100.0 - 3.475));
}

TEST_CASE("se does not depend on replicate order") {
  std::vector<double> v{3.1, -2.0, 7.7, 0.4, 1e-3, 12.0, 5.5};
  const auto a = summarize_replicates(1.0, v, 0, {});
  std::reverse(v.begin(), v.end());
  const auto b = summarize_replicates(1.0, v, 0, {});
  CHECK(a.se == b.se);
  CHECK(a.bias == b.bias);
}

TEST_CASE("default subsample size") {
  CHECK(default_subsample_size(1000) == 100);
  CHECK(default_subsample_size(8) == 4);
  CHECK(default_subsample_size(450) == 59);
}

TEST_CASE("identical rows collapse the bootstrap") {
  std::vector<ObservedRecord> recs(50, ObservedRecord{2.5, 1, {}});
  const BootstrapSummary s = full_bootstrap(Dataset(std::move(recs), {}), sample_mean, {100, 3});
  CHECK(s.se == 0.0);
  CHECK(s.ci_low == 2.5);
  CHECK(s.ci_high == 2.5);
  CHECK(s.bias == 0.0);
}

TEST_CASE("bootstrap is deterministic by seed") {
  const Dataset data = normal_sample(120, 4);
  BootstrapConfig cfg{200, 99};
  const auto a = full_bootstrap(data, sample_mean, cfg);
  const auto b = full_bootstrap(data, sample_mean, cfg);
  CHECK(a.replicates == b.replicates);
  CHECK(a.se == b.se);
  CHECK(a.ci_low == b.ci_low);
  cfg.seed = 100;
  const auto c = full_bootstrap(data, sample_mean, cfg);
  CHECK(c.replicates != a.replicates);
}

TEST_CASE("b = n reproduces the full bootstrap") {
  const Dataset data = normal_sample(80, 5);
  const BootstrapConfig cfg{150, 7};
  const auto full = full_bootstrap(data, sample_mean, cfg);
  const auto sub = b_out_of_n_bootstrap(data, sample_mean, 80, cfg);
  CHECK(full.replicates == sub.replicates);
  CHECK(full.se == sub.se);
  CHECK(full.ci_high == sub.ci_high);
  CHECK(sub.method == BootstrapMethod::kBOutOfN);
  CHECK(full.method == BootstrapMethod::kFull);
}

TEST_CASE("subsample preconditions") {
  const Dataset data = normal_sample(80, 5);
  CHECK_THROWS_AS(b_out_of_n_bootstrap(data, sample_mean, 5, {150, 1}), Error);
  CHECK_THROWS_AS(b_out_of_n_bootstrap(data, sample_mean, 81, {150, 1}), Error);
  CHECK_THROWS_AS(full_bootstrap(data, sample_mean, {99, 1}), Error);
}

TEST_CASE("smaller subsamples spread wider") {
  const Dataset data = normal_sample(1000, 6);
  const auto full = full_bootstrap(data, sample_mean, {400, 1});
  const auto sub = b_out_of_n_bootstrap(data, sample_mean, default_subsample_size(1000), {400, 1});
  CHECK(sub.b.value() == 100);
  CHECK(sub.se > 2.0 * full.se);
}

TEST_CASE("sample mean se is calibrated") {
  const Dataset data = normal_sample(200, 8);
  const auto y = data.outcomes();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 200.0;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double analytic = std::sqrt(ss / 199.0) / std::sqrt(200.0);
  const auto s = full_bootstrap(data, sample_mean, {2000, 12});
  CHECK(std::abs(s.se / analytic - 1.0) < 0.10);
  CHECK(s.ci_low < mean);
  CHECK(s.ci_high > mean);
}

TEST_CASE("too many failures raise a bootstrap failure") {
  const Dataset data = normal_sample(100, 9);
  // Fails whenever the resample holds fewer than 48 odd rows, about 1 in 3.
  auto fragile = [](const Dataset& d, std::uint64_t) {
    if (d.treated_count() < 48) fail(ErrorKind::kSolverFailure, "synthetic");
    return 1.0;
  };
  try {
    full_bootstrap(data, fragile, {200, 1});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBootstrapFailure);
    CHECK(std::string(e.what()).find("solver") != std::string::npos);
  }
  // Rare failures are dropped and counted.
  auto rare = [](const Dataset& d, std::uint64_t) {
    if (d.treated_count() < 38) fail(ErrorKind::kSolverFailure, "synthetic");
    return 1.0;
  };
  const auto s = full_bootstrap(data, rare, {200, 1});
  CHECK(s.replicates.size() + s.n_failed == 200);
}

TEST_CASE("estimator seeds differ across replicates") {
  const Dataset data = normal_sample(50, 10);
  auto seed_value = [](const Dataset&, std::uint64_t seed) { return double(seed % 1000003); };
  const auto s = full_bootstrap(data, seed_value, {100, 2});
  CHECK(s.point == double(2 % 1000003));
  CHECK(std::adjacent_find(s.replicates.begin(), s.replicates.end()) == s.replicates.end());
}
