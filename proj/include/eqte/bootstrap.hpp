#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eqte/data_model.hpp"

namespace eqte {

enum class BootstrapMethod { kFull, kBOutOfN };
enum class CiMethod { kPercentile, kBasic };

std::string_view to_string(BootstrapMethod m);
std::string_view to_string(CiMethod m);

struct BootstrapSummary {
  double point = 0.0;
  std::vector<double> replicates;  // successful replicates, sorted
  std::size_t n_failed = 0;
  double bias = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  BootstrapMethod method = BootstrapMethod::kFull;
  std::optional<std::size_t> b;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  CiMethod ci_method = CiMethod::kPercentile;
};

struct BootstrapConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  CiMethod ci_method = CiMethod::kPercentile;
};

// An estimator maps a dataset to a vector of statistics. The seed is the only
// source of randomness it may use, so replicates are reproducible.
using VectorEstimator =
    std::function<std::vector<double>(const Dataset& data, std::uint64_t seed)>;
using ScalarEstimator = std::function<double(const Dataset& data, std::uint64_t seed)>;

// Percentile with linear interpolation between order statistics (type 7).
double type7_quantile(std::span<const double> sorted, double prob);

// Builds a summary from replicate values; they need not be sorted.
BootstrapSummary summarize_replicates(double point, std::vector<double> replicates,
                                      std::size_t n_failed, const BootstrapConfig& config);

std::size_t default_subsample_size(std::size_t n);

// Resamples of size b (b = n is the ordinary bootstrap). Replicate j draws its
// rows from stream j of config.seed and passes a seed derived from that stream
// to the estimator. Failed replicates (library errors) are dropped; more than
// 10% failures raise a bootstrap-failure error naming the commonest kind.
std::vector<BootstrapSummary> bootstrap_vector(const Dataset& data, const VectorEstimator& estimator,
                                               std::size_t b, const BootstrapConfig& config);

BootstrapSummary full_bootstrap(const Dataset& data, const ScalarEstimator& estimator,
                                const BootstrapConfig& config);

BootstrapSummary b_out_of_n_bootstrap(const Dataset& data, const ScalarEstimator& estimator,
                                      std::size_t b, const BootstrapConfig& config);

}  // namespace eqte
