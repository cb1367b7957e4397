#include "eqte/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "eqte/error.hpp"
#include "eqte/parallel.hpp"
#include "eqte/rng.hpp"

namespace eqte {

std::string_view to_string(BootstrapMethod m) {
  return m == BootstrapMethod::kFull ? "full" : "b_out_of_n";
}

std::string_view to_string(CiMethod m) { return m == CiMethod::kPercentile ? "percentile" : "basic"; }

double type7_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) fail(ErrorKind::kEmptyInput, "no values for a percentile");
  if (!(prob >= 0.0 && prob <= 1.0)) fail(ErrorKind::kInvalidArgument, "percentile outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::size_t default_subsample_size(std::size_t n) {
  // Integer search avoids pow() rounding at perfect cubes (n = 1000 gives 100).
  std::size_t b = static_cast<std::size_t>(std::pow(static_cast<double>(n), 2.0 / 3.0));
  while (b > 0 && (b - 1) * (b - 1) * (b - 1) >= n * n) --b;
  while (b * b * b < n * n) ++b;
  return b;
}

BootstrapSummary summarize_replicates(double point, std::vector<double> replicates,
                                      std::size_t n_failed, const BootstrapConfig& config) {
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0))
    fail(ErrorKind::kInvalidArgument, "confidence level must lie in (0,1)");
  if (replicates.empty()) fail(ErrorKind::kBootstrapFailure, "no successful bootstrap replicates");
  std::sort(replicates.begin(), replicates.end());
  BootstrapSummary s;
  s.point = point;
  s.n_failed = n_failed;
  s.seed = config.seed;
  s.ci_level = config.ci_level;
  s.ci_method = config.ci_method;
  const double m = static_cast<double>(replicates.size());
  double sum = 0.0;
  for (double r : replicates) sum += r;
  const double mean = sum / m;
  double ss = 0.0;
  for (double r : replicates) ss += (r - mean) * (r - mean);
  s.bias = mean - point;
  s.se = replicates.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  const double alpha = 1.0 - config.ci_level;
  const double lo = type7_quantile(replicates, alpha / 2.0);
  const double hi = type7_quantile(replicates, 1.0 - alpha / 2.0);
  if (config.ci_method == CiMethod::kPercentile) {
    s.ci_low = lo;
    s.ci_high = hi;
  } else {
    s.ci_low = 2.0 * point - hi;
    s.ci_high = 2.0 * point - lo;
  }
  s.replicates = std::move(replicates);
  return s;
}

std::vector<BootstrapSummary> bootstrap_vector(const Dataset& data, const VectorEstimator& estimator,
                                               std::size_t b, const BootstrapConfig& config) {
  const std::size_t n = data.size();
  if (config.replicates < 100)
    fail(ErrorKind::kInvalidArgument, "bootstrap needs at least 100 replicates");
  if (b < 10 || b > n)
    fail(ErrorKind::kInvalidArgument,
         "subsample size must satisfy 10 <= b <= n (b = " + std::to_string(b) + ")");
  const std::vector<double> point = estimator(data, config.seed);
  const std::size_t dim = point.size();

  const std::size_t nb = config.replicates;
  std::vector<std::vector<double>> values(nb);
  std::vector<std::optional<ErrorKind>> failures(nb);
  parallel_for(nb, [&](std::size_t j) {
    Rng rng = make_stream(config.seed, j);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(b);
    for (auto& r : rows) r = pick(rng);
    try {
      auto v = estimator(data.resample(rows), rng());
      if (v.size() != dim) fail(ErrorKind::kInternal, "estimator changed its output length");
      for (double x : v)
        if (!std::isfinite(x)) fail(ErrorKind::kInternal, "estimator returned a non-finite value");
      values[j] = std::move(v);
    } catch (const Error& e) {
      failures[j] = e.kind();
    }
  });

  std::size_t n_failed = 0;
  std::map<ErrorKind, std::size_t> by_kind;
  for (const auto& f : failures)
    if (f) {
      ++n_failed;
      ++by_kind[*f];
    }
  if (10 * n_failed > nb) {
    const auto dominant = std::max_element(by_kind.begin(), by_kind.end(), [](auto& a, auto& c) {
      return a.second < c.second;
    });
    fail(ErrorKind::kBootstrapFailure,
         std::to_string(n_failed) + " of " + std::to_string(nb) +
             " bootstrap replicates failed; most often: " + std::string(to_string(dominant->first)));
  }

  std::vector<BootstrapSummary> out;
  out.reserve(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    std::vector<double> reps;
    reps.reserve(nb - n_failed);
    for (std::size_t j = 0; j < nb; ++j)
      if (!failures[j]) reps.push_back(values[j][k]);
    BootstrapSummary s = summarize_replicates(point[k], std::move(reps), n_failed, config);
    s.method = b == n ? BootstrapMethod::kFull : BootstrapMethod::kBOutOfN;
    if (b != n) s.b = b;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

VectorEstimator lift(const ScalarEstimator& f) {
  return [f](const Dataset& d, std::uint64_t seed) { return std::vector<double>{f(d, seed)}; };
}

}  // namespace

BootstrapSummary full_bootstrap(const Dataset& data, const ScalarEstimator& estimator,
                                const BootstrapConfig& config) {
  return bootstrap_vector(data, lift(estimator), data.size(), config).front();
}

BootstrapSummary b_out_of_n_bootstrap(const Dataset& data, const ScalarEstimator& estimator,
                                      std::size_t b, const BootstrapConfig& config) {
  BootstrapSummary s = bootstrap_vector(data, lift(estimator), b, config).front();
  s.method = BootstrapMethod::kBOutOfN;
  s.b = b;
  return s;
}

}  // namespace eqte
