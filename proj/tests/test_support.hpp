#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "eqte/data_model.hpp"
#include "eqte/rng.hpp"

namespace eqte::test {

inline Design linear_design(const std::vector<double>& x, const std::vector<double>& y) {
  Design d;
  d.n = x.size();
  d.p = 2;
  d.column_names = {"(intercept)", "x"};
  for (std::size_t i = 0; i < x.size(); ++i) {
    d.rows.push_back(1.0);
    d.rows.push_back(x[i]);
  }
  d.response = y;
  return d;
}

// y = 1 + 2 d + x1 - 0.5 x2 + (1 + 0.5 x1) * noise, treatment ~ Bernoulli(0.4).
inline Dataset small_treatment_data(std::size_t n, std::uint64_t seed,
                                    bool heavy_tail = false) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::cauchy_distribution<double> cauchy(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::bernoulli_distribution coin(0.4);
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = unif(rng);
    const double x2 = norm(rng);
    const int d = coin(rng) ? 1 : 0;
    const double e = heavy_tail ? cauchy(rng) : norm(rng);
    recs.push_back({1.0 + 2.0 * d + x1 - 0.5 * x2 + (1.0 + 0.5 * x1) * e, d, {x1, x2}});
  }
  return Dataset(std::move(recs), {"x1", "x2"});
}

}  // namespace eqte::test
