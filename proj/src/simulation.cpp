#include "eqte/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include "eqte/error.hpp"
#include "eqte/parallel.hpp"
#include "eqte/rng.hpp"

namespace eqte {

std::string_view to_string(ErrorDist e) {
  return e == ErrorDist::kGaussianSd10 ? "gaussian" : "t1";
}

ErrorDist parse_error_dist(std::string_view text) {
  if (text == "gaussian" || text == "normal") return ErrorDist::kGaussianSd10;
  if (text == "t1" || text == "t") return ErrorDist::kStudentT1;
  fail(ErrorKind::kInvalidArgument,
       "unknown error distribution '" + std::string(text) + "' (expected gaussian or t1)");
}

double dgp_propensity(double x1, double x2, double x3) {
  const double eta = -3.0 + 0.1 * x1 + 0.1 * x2 + 0.2 * x3;
  return 1.0 / (1.0 + std::exp(-eta));
}

double dgp_outcome(int treatment, double x1, double x2, double eps) {
  const double d = treatment;
  return 10.0 + 15.0 * d + x1 + 3.0 * x2 + 2.0 * x1 * d + (1.0 + 4.0 * x2 + 3.0 * d) * eps;
}

namespace {

struct Unit {
  double x1, x2, x3, eps;
  int d;
};

// Fixed draw order per unit so a stream reproduces the same units.
class UnitSampler {
 public:
  explicit UnitSampler(ErrorDist error) : error_(error) {}

  Unit draw(Rng& rng) {
    Unit u;
    u.x1 = x1_(rng);
    u.x2 = x2_(rng);
    u.x3 = x3_(rng);
    u.d = coin_(rng) < dgp_propensity(u.x1, u.x2, u.x3) ? 1 : 0;
    u.eps = error_ == ErrorDist::kGaussianSd10 ? gauss_(rng) : cauchy_(rng);
    return u;
  }

 private:
  ErrorDist error_;
  std::normal_distribution<double> x1_{15.0, 6.0};
  std::exponential_distribution<double> x2_{0.5};
  std::normal_distribution<double> x3_{1.0, 1.0};
  std::uniform_real_distribution<double> coin_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 10.0};
  std::student_t_distribution<double> cauchy_{1.0};
};

// Lower order statistic: smallest value whose empirical mass reaches p.
double order_quantile(std::vector<double>& v, double p) {
  if (v.empty()) fail(ErrorKind::kEmptyInput, "no draws for a quantile");
  const double n = static_cast<double>(v.size());
  auto k = static_cast<std::size_t>(std::ceil(n * p - 1e-9));
  k = std::clamp<std::size_t>(k, 1, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

std::string num(double x, int digits = 10) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string fixed(double x, int decimals) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

}  // namespace

Dataset generate_dgp(const DgpConfig& config) {
  if (config.n < 50) fail(ErrorKind::kInvalidArgument, "simulated datasets need n >= 50");
  Rng rng = make_stream(config.seed, 0);
  UnitSampler sampler(config.error);
  std::vector<ObservedRecord> recs;
  recs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const Unit u = sampler.draw(rng);
    recs.push_back({dgp_outcome(u.d, u.x1, u.x2, u.eps), u.d, {u.x1, u.x2, u.x3}});
  }
  return Dataset(std::move(recs), {"x1", "x2", "x3"});
}

std::vector<TrueEffect> oracle_true_effects(std::span<const double> p_list, ErrorDist error,
                                            std::size_t draws, std::uint64_t seed) {
  if (draws < 1'000'000) fail(ErrorKind::kInvalidArgument, "oracle needs at least 1e6 draws");
  for (double p : p_list)
    if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::kInvalidArgument, "oracle level outside (0,1)");
  constexpr std::size_t kBlock = 1 << 16;
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
  std::vector<double> y1(draws), y0(draws);
  std::vector<std::vector<double>> t1(blocks), t0(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng = make_stream(seed, b);
    UnitSampler sampler(error);
    const std::size_t end = std::min(draws, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Unit u = sampler.draw(rng);
      y1[i] = dgp_outcome(1, u.x1, u.x2, u.eps);
      y0[i] = dgp_outcome(0, u.x1, u.x2, u.eps);
      if (u.d == 1) {
        t1[b].push_back(y1[i]);
        t0[b].push_back(y0[i]);
      }
    }
  });
  std::vector<double> ty1, ty0;
  for (std::size_t b = 0; b < blocks; ++b) {
    ty1.insert(ty1.end(), t1[b].begin(), t1[b].end());
    ty0.insert(ty0.end(), t0[b].begin(), t0[b].end());
  }
  std::vector<TrueEffect> out;
  for (double p : p_list) {
    TrueEffect t;
    t.p = p;
    t.qte = order_quantile(y1, p) - order_quantile(y0, p);
    t.qtt = order_quantile(ty1, p) - order_quantile(ty0, p);
    out.push_back(t);
  }
  return out;
}

double oracle_true_quantile(double p, Estimand estimand, ErrorDist error, std::size_t draws,
                            std::uint64_t seed) {
  const double levels[] = {p};
  const TrueEffect t = oracle_true_effects(levels, error, draws, seed).front();
  return estimand == Estimand::kQte ? t.qte : t.qtt;
}

CellStats aggregate_cell(std::span<const double> estimates, std::size_t n_failed, double truth) {
  CellStats c;
  c.truth = truth;
  c.n_ok = estimates.size();
  c.n_failed = n_failed;
  c.estimates.assign(estimates.begin(), estimates.end());
  const std::size_t total = c.n_ok + n_failed;
  c.failed = c.n_ok == 0 || 5 * n_failed > total;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  c.relative_variance = c.relative_mse = nan;
  if (c.n_ok == 0) {
    c.mean = c.relative_bias_pct = c.variance = c.mse = nan;
    return c;
  }
  const double r = static_cast<double>(c.n_ok);
  double sum = 0.0, sq_err = 0.0;
  for (double e : estimates) {
    sum += e;
    sq_err += (e - truth) * (e - truth);
  }
  c.mean = sum / r;
  double ss = 0.0;
  for (double e : estimates) ss += (e - c.mean) * (e - c.mean);
  c.variance = c.n_ok > 1 ? ss / (r - 1.0) : 0.0;
  c.mse = sq_err / r;
  c.relative_bias_pct = 100.0 * (c.mean - truth) / truth;
  return c;
}

void relate_to(CellStats& cell, const CellStats& reference) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (cell.failed || reference.failed) {
    cell.relative_variance = cell.relative_mse = nan;
    return;
  }
  cell.relative_variance = cell.variance / reference.variance;
  cell.relative_mse = cell.mse / reference.mse;
}

const CellStats* StudyResult::find(std::size_t n, ErrorDist error, Estimand estimand, double p,
                                   Method method) const {
  for (const auto& c : cells)
    if (c.n == n && c.error == error && c.estimand == estimand && c.p == p && c.method == method)
      return &c;
  return nullptr;
}

StudyResult run_study(const StudyConfig& config) {
  if (config.replicates < 50)
    fail(ErrorKind::kInvalidArgument, "a study needs at least 50 replicates");
  if (config.methods.empty() || config.p_list.empty() || config.n_list.empty() ||
      config.errors.empty() || config.estimands.empty())
    fail(ErrorKind::kInvalidArgument, "study grid is empty");
  for (std::size_t n : config.n_list)
    if (n < 50) fail(ErrorKind::kInvalidArgument, "simulated datasets need n >= 50");
  const bool want_qte =
      std::find(config.estimands.begin(), config.estimands.end(), Estimand::kQte) !=
      config.estimands.end();
  const bool want_qtt =
      std::find(config.estimands.begin(), config.estimands.end(), Estimand::kQtt) !=
      config.estimands.end();

  StudyResult result;
  result.config = config;
  for (ErrorDist error : config.errors)
    result.truths.push_back(oracle_true_effects(
        config.p_list, error, config.oracle_draws,
        derive_seed(config.seed, 0x0AC1E000ULL + static_cast<std::uint64_t>(error))));

  const std::size_t m = config.methods.size();
  const std::size_t np = config.p_list.size();
  for (std::size_t n : config.n_list) {
    for (std::size_t ei = 0; ei < config.errors.size(); ++ei) {
      const ErrorDist error = config.errors[ei];
      const std::uint64_t cell_seed =
          derive_seed(derive_seed(config.seed, n), static_cast<std::uint64_t>(error) + 1);
      // estimates[r][method] holds flattened points, or nothing on failure.
      std::vector<std::vector<std::optional<std::vector<double>>>> estimates(
          config.replicates, std::vector<std::optional<std::vector<double>>>(m));
      parallel_for(config.replicates, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(cell_seed, r);
        const Dataset data = generate_dgp({n, error, rep_seed});
        for (std::size_t k = 0; k < m; ++k) {
          try {
            const MethodResult res = run_method(config.methods[k], data, config.p_list, want_qte,
                                                want_qtt, config.settings, derive_seed(rep_seed, 1));
            estimates[r][k] = flatten_points(res);
          } catch (const Error& e) {
            if (e.is_validation()) throw;
          }
        }
      });

      for (Estimand est : {Estimand::kQte, Estimand::kQtt}) {
        if ((est == Estimand::kQte && !want_qte) || (est == Estimand::kQtt && !want_qtt)) continue;
        const std::size_t offset = (est == Estimand::kQtt && want_qte) ? np : 0;
        for (std::size_t j = 0; j < np; ++j) {
          const TrueEffect& truth = result.truths[ei][j];
          const std::size_t first = result.cells.size();
          for (std::size_t k = 0; k < m; ++k) {
            std::vector<double> values;
            std::size_t failed = 0;
            for (std::size_t r = 0; r < config.replicates; ++r) {
              if (estimates[r][k])
                values.push_back((*estimates[r][k])[offset + j]);
              else
                ++failed;
            }
            CellStats c =
                aggregate_cell(values, failed, est == Estimand::kQte ? truth.qte : truth.qtt);
            c.n = n;
            c.error = error;
            c.estimand = est;
            c.p = config.p_list[j];
            c.method = config.methods[k];
            result.cells.push_back(std::move(c));
          }
          const CellStats* reference = nullptr;
          for (std::size_t k = first; k < result.cells.size(); ++k)
            if (result.cells[k].method == Method::kProposed) reference = &result.cells[k];
          if (!reference) continue;
          const CellStats ref = *reference;
          for (std::size_t k = first; k < result.cells.size(); ++k) relate_to(result.cells[k], ref);
        }
      }
    }
  }
  return result;
}

void write_study_csv(const StudyResult& result, std::ostream& out) {
  out << "n,error,estimand,p,method,truth,replicates,failed_replicates,status,mean,"
         "relative_bias_pct,variance,mse,relative_variance,relative_mse\n";
  for (const auto& c : result.cells) {
    out << c.n << ',' << to_string(c.error) << ',' << to_string(c.estimand) << ',' << num(c.p)
        << ',' << to_string(c.method) << ',' << num(c.truth) << ',' << c.n_ok << ','
        << c.n_failed << ',' << (c.failed ? "failed" : "ok") << ',' << num(c.mean) << ','
        << num(c.relative_bias_pct) << ',' << num(c.variance) << ',' << num(c.mse) << ','
        << num(c.relative_variance) << ',' << num(c.relative_mse) << '\n';
  }
}

void write_study_table(const StudyResult& result, std::ostream& out) {
  const StudyConfig& cfg = result.config;
  out << "# Simulation study: " << cfg.replicates << " replicates per cell, seed " << cfg.seed
      << ", oracle draws " << cfg.oracle_draws << "\n";
  out << "# X1 ~ N(15, sd 6); X2 ~ Exp(mean 2); X3 ~ N(1, 1); gaussian errors have sd 10;"
         " t1 errors have unit scale; one eps per unit shared by both potential outcomes\n";
  out << "# RB in percent of the truth; RV and RMSE relative to the proposed method\n";
  char line[160];
  for (Estimand est : cfg.estimands) {
    for (std::size_t ei = 0; ei < cfg.errors.size(); ++ei) {
      out << "\n" << (est == Estimand::kQte ? "QTE (population)" : "QTT (treated)")
          << ", error " << to_string(cfg.errors[ei]) << "\n";
      std::snprintf(line, sizeof line, "%-6s %-8s %-9s %12s %10s %12s %10s %9s\n", "p", "n",
                    "method", "estimate", "RB", "RV", "RMSE", "failed");
      out << line;
      for (std::size_t j = 0; j < cfg.p_list.size(); ++j) {
        const double p = cfg.p_list[j];
        const TrueEffect& t = result.truths[ei][j];
        out << "p = " << num(p, 6) << "  truth " << fixed(est == Estimand::kQte ? t.qte : t.qtt, 2)
            << "\n";
        for (std::size_t n : cfg.n_list) {
          auto row = [&](const std::string& name, const CellStats* c) {
            if (!c) {
              std::snprintf(line, sizeof line, "%-6s %-8zu %-9s %12s %10s %12s %10s %9s\n",
                            num(p, 6).c_str(), n, name.c_str(), "", "", "", "", "");
            } else {
              const std::string status = c->failed ? "FAILED" : std::to_string(c->n_failed);
              std::snprintf(line, sizeof line, "%-6s %-8zu %-9s %12s %10s %12s %10s %9s\n",
                            num(p, 6).c_str(), n, name.c_str(), fixed(c->mean, 2).c_str(),
                            fixed(c->relative_bias_pct, 2).c_str(),
                            fixed(c->relative_variance, 2).c_str(),
                            fixed(c->relative_mse, 2).c_str(), status.c_str());
            }
            out << line;
          };
          for (Method m : cfg.methods) {
            if (m == Method::kFirpo) row("TMLE", nullptr);
            row(std::string(to_string(m)), result.find(n, cfg.errors[ei], est, p, m));
          }
          if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::kFirpo) ==
              cfg.methods.end())
            row("TMLE", nullptr);
        }
      }
    }
  }
}

}  // namespace eqte
