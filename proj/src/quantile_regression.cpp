#include "eqte/quantile_regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "eqte/error.hpp"
#include "eqte/kernels.hpp"

namespace eqte {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void validate_levels(std::span<const double> levels) {
  if (levels.empty()) fail(ErrorKind::kInvalidArgument, "at least one quantile level is required");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (!(levels[j] > 0.0 && levels[j] < 1.0))
      fail(ErrorKind::kInvalidArgument, "quantile levels must lie in (0, 1)");
    if (j > 0 && !(levels[j] > levels[j - 1]))
      fail(ErrorKind::kInvalidArgument, "quantile levels must be strictly increasing");
  }
}

// One index per distinct design row, ascending.
std::vector<std::size_t> distinct_rows(const Design& d) {
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  const auto row = [&](std::size_t i) { return d.rows.begin() + static_cast<std::ptrdiff_t>(i * d.p); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return std::lexicographical_compare(row(l), row(l) + d.p, row(r), row(r) + d.p);
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < d.n; ++k)
    if (k == 0 || !std::equal(row(order[k]), row(order[k]) + d.p, row(order[k - 1])))
      out.push_back(order[k]);
  std::sort(out.begin(), out.end());
  return out;
}

bool has_intercept_column(const Design& d) {
  for (std::size_t i = 0; i < d.n; ++i)
    if (d.rows[i * d.p] != 1.0) return false;
  return true;
}

bool is_intercept_only(const Design& d) {
  return d.p == 1 && std::all_of(d.rows.begin(), d.rows.end(), [](double v) { return v == 1.0; });
}

// Block-tridiagonal symmetric positive definite system, p x p blocks.
class BlockTridiagonal {
 public:
  BlockTridiagonal(std::size_t blocks, std::size_t p)
      : p_(p), diag_(blocks, MatrixXd::Zero(p, p)),
        sub_(blocks > 0 ? blocks - 1 : 0, MatrixXd::Zero(p, p)) {}

  MatrixXd& diag(std::size_t j) { return diag_[j]; }
  MatrixXd& sub(std::size_t j) { return sub_[j]; }  // block (j+1, j)

  // Cholesky factorization; retries with a growing ridge when the blocks are
  // numerically indefinite (happens only very close to convergence).
  void factorize() {
    double ridge = 0.0;
    double scale = 0.0;
    for (const auto& d : diag_) scale = std::max(scale, d.diagonal().cwiseAbs().maxCoeff());
    if (!(scale > 0.0) || !std::isfinite(scale))
      fail(ErrorKind::kSolverFailure, "normal equations are degenerate");
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (try_factorize(ridge)) return;
      ridge = ridge == 0.0 ? scale * 1e-14 : ridge * 100.0;
    }
    fail(ErrorKind::kSolverFailure, "normal equations could not be factorized");
  }

  VectorXd solve(const VectorXd& b) const {
    const std::size_t blocks = chol_.size();
    VectorXd z(b.size());
    for (std::size_t j = 0; j < blocks; ++j) {
      VectorXd rhs = b.segment(j * p_, p_);
      if (j > 0) rhs -= low_[j - 1] * z.segment((j - 1) * p_, p_);
      z.segment(j * p_, p_) = chol_[j].matrixL().solve(rhs);
    }
    VectorXd x(b.size());
    for (std::size_t jj = blocks; jj-- > 0;) {
      VectorXd rhs = z.segment(jj * p_, p_);
      if (jj + 1 < blocks) rhs -= low_[jj].transpose() * x.segment((jj + 1) * p_, p_);
      x.segment(jj * p_, p_) = chol_[jj].matrixU().solve(rhs);
    }
    return x;
  }

 private:
  bool try_factorize(double ridge) {
    const std::size_t blocks = diag_.size();
    chol_.clear();
    low_.assign(sub_.size(), MatrixXd());
    for (std::size_t j = 0; j < blocks; ++j) {
      MatrixXd d = diag_[j];
      if (ridge > 0.0) d.diagonal().array() += ridge;
      if (j > 0) d.noalias() -= low_[j - 1] * low_[j - 1].transpose();
      Eigen::LLT<MatrixXd> llt(d);
      if (llt.info() != Eigen::Success) return false;
      if (j + 1 < blocks) {
        // L_{j+1,j} = M_{j+1,j} L_jj^{-T}
        MatrixXd t = llt.matrixL().solve(sub_[j].transpose());
        low_[j] = t.transpose();
      }
      chol_.push_back(std::move(llt));
    }
    return true;
  }

  std::size_t p_;
  std::vector<MatrixXd> diag_;
  std::vector<MatrixXd> sub_;
  std::vector<Eigen::LLT<MatrixXd>> chol_;
  std::vector<MatrixXd> low_;
};

// Primal-dual (Mehrotra predictor-corrector) interior point method applied to
// the dual of the stacked check-loss problem
//
//   min_beta  sum_j sum_i rho_{tau_j}(y_i - w_i' beta_j)
//   s.t.      w_i' (beta_{j+1} - beta_j) >= 0   for all rows i, j < L.
//
// Dual: max y'a  s.t.  A'a + C'mu = A'(1 - tau), 0 <= a <= 1, mu >= 0, where
// A stacks the design per level and C the non-crossing rows. The coefficients
// are the multipliers of the dual's equality constraints. Every normal-
// equation matrix is block tridiagonal in the levels.
class StackedQrSolver {
 public:
  // constraints[j] lists the rows i carrying w_i' (beta_{j+1} - beta_j) >= 0.
  StackedQrSolver(const Design& design, std::span<const double> taus,
                  const std::vector<std::vector<std::size_t>>& constraints,
                  const LpOptions& options)
      : d_(design), taus_(taus.begin(), taus.end()), opt_(options), n_(design.n), p_(design.p),
        L_(taus.size()), K_(n_ * L_), P_(p_ * L_), pair_start_(L_, 0) {
    for (std::size_t j = 0; j + 1 < L_; ++j) {
      pair_start_[j] = cons_row_.size();
      cons_row_.insert(cons_row_.end(), constraints[j].begin(), constraints[j].end());
    }
    if (L_ > 0) pair_start_[L_ - 1] = cons_row_.size();
    R_ = cons_row_.size();
  }

  QuantileFit solve();

  // Dual objective of the last solve; a certified lower bound on the optimum.
  double dual_objective() const { return dual_objective_; }

 private:
  // out_a[j*n+i] = w_i' v_j ; out_m[k] = w_i' (v_{j+1} - v_j) for constraint k
  // on row i between levels j and j+1.
  void apply_nt(const VectorXd& v, std::vector<double>& out_a, std::vector<double>& out_m) const {
    out_a.resize(K_);
    out_m.resize(R_);
    for (std::size_t j = 0; j < L_; ++j)
      kernels::row_dot(d_.rows.data(), n_, p_, v.data() + j * p_, out_a.data() + j * n_);
    for (std::size_t j = 0; j + 1 < L_; ++j)
      for (std::size_t k = pair_start_[j]; k < pair_start_[j + 1]; ++k) {
        const std::size_t at = j * n_ + cons_row_[k];
        out_m[k] = out_a[at + n_] - out_a[at];
      }
  }

  // Block j: W' (za_j - zm_j + zm_{j-1}).
  VectorXd apply_n(const std::vector<double>& za, const std::vector<double>& zm) const {
    VectorXd out(P_);
    const RowMajorMap w(d_.rows.data(), n_, p_);
    VectorXd u(n_);
    for (std::size_t j = 0; j < L_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) u[i] = za[j * n_ + i];
      if (j + 1 < L_)
        for (std::size_t k = pair_start_[j]; k < pair_start_[j + 1]; ++k) u[cons_row_[k]] -= zm[k];
      if (j > 0)
        for (std::size_t k = pair_start_[j - 1]; k < pair_start_[j]; ++k) u[cons_row_[k]] += zm[k];
      out.segment(j * p_, p_).noalias() = w.transpose() * u;
    }
    return out;
  }

  void assemble(const std::vector<double>& theta_a, const std::vector<double>& theta_m,
                BlockTridiagonal& m) const {
    std::vector<double> weights(n_);
    std::vector<double> block(p_ * p_);
    for (std::size_t j = 0; j < L_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) weights[i] = theta_a[j * n_ + i];
      if (j + 1 < L_)
        for (std::size_t k = pair_start_[j]; k < pair_start_[j + 1]; ++k)
          weights[cons_row_[k]] += theta_m[k];
      if (j > 0)
        for (std::size_t k = pair_start_[j - 1]; k < pair_start_[j]; ++k)
          weights[cons_row_[k]] += theta_m[k];
      std::fill(block.begin(), block.end(), 0.0);
      kernels::weighted_gram(d_.rows.data(), n_, p_, weights.data(), block.data());
      m.diag(j) = Eigen::Map<const MatrixXd>(block.data(), p_, p_);
      if (j + 1 < L_) {
        std::fill(weights.begin(), weights.end(), 0.0);
        for (std::size_t k = pair_start_[j]; k < pair_start_[j + 1]; ++k)
          weights[cons_row_[k]] = -theta_m[k];
        std::fill(block.begin(), block.end(), 0.0);
        kernels::weighted_gram(d_.rows.data(), n_, p_, weights.data(), block.data());
        m.sub(j) = Eigen::Map<const MatrixXd>(block.data(), p_, p_);
      }
    }
  }

  VectorXd initial_beta() const;

  const Design& d_;
  std::vector<double> taus_;
  LpOptions opt_;
  std::size_t n_, p_, L_, K_, P_, R_ = 0;
  std::vector<std::size_t> pair_start_;
  std::vector<std::size_t> cons_row_;
  double dual_objective_ = 0.0;
};

VectorXd StackedQrSolver::initial_beta() const {
  // Least squares, then per-level intercept shifts to the residual quantiles
  // so the start is already ordered across levels.
  const RowMajorMap w(d_.rows.data(), n_, p_);
  const Eigen::Map<const VectorXd> y(d_.response.data(), n_);
  VectorXd ls = w.colPivHouseholderQr().solve(y);
  VectorXd res = y - w * ls;
  std::vector<double> sorted(res.data(), res.data() + n_);
  std::sort(sorted.begin(), sorted.end());

  bool has_intercept = true;
  for (std::size_t i = 0; i < n_ && has_intercept; ++i) has_intercept = d_.rows[i * p_] == 1.0;

  VectorXd beta(P_);
  for (std::size_t j = 0; j < L_; ++j) {
    beta.segment(j * p_, p_) = ls;
    if (has_intercept) {
      const double pos = taus_[j] * static_cast<double>(n_ - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, n_ - 1);
      beta[j * p_] += sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    }
  }
  return beta;
}

double max_step(const std::vector<double>& x, const std::vector<double>& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k)
    if (dx[k] < 0.0) alpha = std::min(alpha, -x[k] / dx[k]);
  return alpha;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return kernels::dot(a.data(), b.data(), a.size());
}

QuantileFit StackedQrSolver::solve() {
  const std::vector<double>& y = d_.response;

  VectorXd rhs(P_);
  {
    VectorXd colsum = RowMajorMap(d_.rows.data(), n_, p_).colwise().sum().transpose();
    for (std::size_t j = 0; j < L_; ++j) rhs.segment(j * p_, p_) = (1.0 - taus_[j]) * colsum;
  }

  VectorXd beta = initial_beta();
  std::vector<double> fitted, margin;
  apply_nt(beta, fitted, margin);

  double scale = 0.0;
  for (std::size_t k = 0; k < K_; ++k) scale += std::abs(y[k % n_] - fitted[k]);
  scale = scale / static_cast<double>(K_);
  if (!(scale > 0.0)) scale = 1.0;
  const double delta = 1e-2 * scale;

  std::vector<double> a(K_), s(K_), ga(K_), wa(K_), mu(R_), gm(R_);
  for (std::size_t j = 0; j < L_; ++j) {
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t k = j * n_ + i;
      const double r = y[i] - fitted[k];
      a[k] = 1.0 - taus_[j];
      s[k] = taus_[j];
      wa[k] = std::max(r, 0.0) + delta;
      ga[k] = std::max(-r, 0.0) + delta;
    }
  }
  for (std::size_t j = 0; j + 1 < L_; ++j) {
    const double spacing = taus_[j + 1] - taus_[j];
    for (std::size_t k = pair_start_[j]; k < pair_start_[j + 1]; ++k) {
      gm[k] = std::max(margin[k], 0.0) + scale * spacing + delta;
      mu[k] = std::min(0.5 * spacing, 1e-2);
    }
  }

  const double pairs = static_cast<double>(2 * K_ + R_);
  const double rhs_norm = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  std::vector<double> res(K_), r_u(K_), r_da(K_), r_dm(R_);
  std::vector<double> theta_a(K_), theta_m(R_), rho_a(K_), rho_m(R_);
  std::vector<double> rzg_a(K_), rsw(K_), rzg_m(R_);
  std::vector<double> da(K_), ds(K_), dga(K_), dwa(K_), dmu(R_), dgm(R_);
  std::vector<double> da_aff, ds_aff, dga_aff, dwa_aff, dmu_aff, dgm_aff;
  std::vector<double> tmp_a, tmp_m, za(K_), zm(R_);
  BlockTridiagonal normal(L_, p_);

  double primal_obj = 0.0, dual_obj = 0.0, gap = std::numeric_limits<double>::infinity();
  int iter = 0;
  struct Snapshot {
    double merit = std::numeric_limits<double>::infinity();
    VectorXd beta;
    double primal = 0.0, dual = 0.0, gap = 0.0;
  } best;
  const double internal_tol = std::min(1e-11, opt_.gap_tolerance * 1e-3);

  auto evaluate = [&] {
    apply_nt(beta, fitted, margin);
    primal_obj = 0.0;
    dual_obj = 0.0;
    for (std::size_t j = 0; j < L_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t k = j * n_ + i;
        res[k] = y[i] - fitted[k];
        dual_obj += y[i] * (a[k] - (1.0 - taus_[j]));
      }
      primal_obj += kernels::check_loss(res.data() + j * n_, n_, taus_[j]);
    }
    gap = (primal_obj - dual_obj) / std::max(1.0, std::abs(primal_obj));
  };

  // Solves the reduced Newton system for the given complementarity targets.
  auto direction = [&](const VectorXd& r_p) {
    for (std::size_t k = 0; k < K_; ++k) {
      rho_a[k] = r_da[k] - rzg_a[k] / a[k] + (rsw[k] - wa[k] * r_u[k]) / s[k];
      za[k] = theta_a[k] * rho_a[k];
    }
    for (std::size_t k = 0; k < R_; ++k) {
      rho_m[k] = r_dm[k] - rzg_m[k] / mu[k];
      zm[k] = theta_m[k] * rho_m[k];
    }
    const VectorXd dbeta = normal.solve(-(r_p + apply_n(za, zm)));
    apply_nt(dbeta, tmp_a, tmp_m);
    for (std::size_t k = 0; k < K_; ++k) {
      da[k] = -theta_a[k] * (tmp_a[k] + rho_a[k]);
      ds[k] = r_u[k] - da[k];
      dga[k] = (rzg_a[k] - ga[k] * da[k]) / a[k];
      dwa[k] = (rsw[k] - wa[k] * ds[k]) / s[k];
    }
    for (std::size_t k = 0; k < R_; ++k) {
      dmu[k] = -theta_m[k] * (tmp_m[k] + rho_m[k]);
      dgm[k] = (rzg_m[k] - gm[k] * dmu[k]) / mu[k];
    }
    return dbeta;
  };

  for (; iter < opt_.max_iterations; ++iter) {
    evaluate();
    const VectorXd r_p = rhs - apply_n(a, mu);
    double infeas = r_p.lpNorm<Eigen::Infinity>() / rhs_norm;
    for (std::size_t k = 0; k < K_; ++k) {
      r_u[k] = 1.0 - a[k] - s[k];
      r_da[k] = wa[k] - ga[k] - res[k];
      infeas = std::max(infeas, std::abs(r_u[k]));
    }
    double dual_infeas = 0.0;
    for (std::size_t k = 0; k < R_; ++k) {
      r_dm[k] = margin[k] - gm[k];
      dual_infeas = std::max(dual_infeas, std::abs(r_dm[k]));
    }
    for (std::size_t k = 0; k < K_; ++k) dual_infeas = std::max(dual_infeas, std::abs(r_da[k]));
    dual_infeas /= (1.0 + scale);

    if (gap >= 0.0 && gap <= internal_tol && infeas <= 1e-10 && dual_infeas <= 1e-9) break;

    // Degenerate problems can stall just short of the strict tolerances and
    // then lose accuracy, so the best certified iterate is kept.
    const double merit = std::max({std::abs(gap), infeas, dual_infeas});
    if (std::abs(gap) <= opt_.gap_tolerance && infeas <= 1e-8 && dual_infeas <= 1e-8 &&
        merit < best.merit) {
      best = {merit, beta, primal_obj, dual_obj, gap};
    }
    const double complementarity = (dot(a, ga) + dot(s, wa) + dot(mu, gm)) / pairs;
    if (!(complementarity > 1e-30 * scale)) break;

    for (std::size_t k = 0; k < K_; ++k) theta_a[k] = 1.0 / (ga[k] / a[k] + wa[k] / s[k]);
    for (std::size_t k = 0; k < R_; ++k) theta_m[k] = mu[k] / gm[k];
    assemble(theta_a, theta_m, normal);
    try {
      normal.factorize();
    } catch (const Error&) {
      if (!std::isfinite(best.merit)) throw;
      break;
    }

    // Predictor.
    for (std::size_t k = 0; k < K_; ++k) {
      rzg_a[k] = -a[k] * ga[k];
      rsw[k] = -s[k] * wa[k];
    }
    for (std::size_t k = 0; k < R_; ++k) rzg_m[k] = -mu[k] * gm[k];
    VectorXd dbeta = direction(r_p);

    const double alpha_p_aff =
        std::min({1.0, max_step(a, da), max_step(s, ds), max_step(mu, dmu)});
    const double alpha_d_aff =
        std::min({1.0, max_step(ga, dga), max_step(wa, dwa), max_step(gm, dgm)});
    const double mu_now = complementarity;
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      mu_aff += (a[k] + alpha_p_aff * da[k]) * (ga[k] + alpha_d_aff * dga[k]);
      mu_aff += (s[k] + alpha_p_aff * ds[k]) * (wa[k] + alpha_d_aff * dwa[k]);
    }
    for (std::size_t k = 0; k < R_; ++k)
      mu_aff += (mu[k] + alpha_p_aff * dmu[k]) * (gm[k] + alpha_d_aff * dgm[k]);
    mu_aff /= pairs;
    const double sigma = std::pow(std::max(mu_aff, 0.0) / mu_now, 3.0);
    const double target = std::min(sigma, 1.0) * mu_now;

    // Corrector.
    da_aff = da; ds_aff = ds; dga_aff = dga; dwa_aff = dwa; dmu_aff = dmu; dgm_aff = dgm;
    for (std::size_t k = 0; k < K_; ++k) {
      rzg_a[k] = target - a[k] * ga[k] - da_aff[k] * dga_aff[k];
      rsw[k] = target - s[k] * wa[k] - ds_aff[k] * dwa_aff[k];
    }
    for (std::size_t k = 0; k < R_; ++k)
      rzg_m[k] = target - mu[k] * gm[k] - dmu_aff[k] * dgm_aff[k];
    dbeta = direction(r_p);

    constexpr double kEta = 0.99995;
    const double alpha_p =
        std::min(1.0, kEta * std::min({max_step(a, da), max_step(s, ds), max_step(mu, dmu)}));
    const double alpha_d =
        std::min(1.0, kEta * std::min({max_step(ga, dga), max_step(wa, dwa), max_step(gm, dgm)}));
    if (!(alpha_p > 1e-14) && !(alpha_d > 1e-14)) break;

    for (std::size_t k = 0; k < K_; ++k) {
      a[k] += alpha_p * da[k];
      s[k] += alpha_p * ds[k];
      ga[k] += alpha_d * dga[k];
      wa[k] += alpha_d * dwa[k];
    }
    for (std::size_t k = 0; k < R_; ++k) {
      mu[k] += alpha_p * dmu[k];
      gm[k] += alpha_d * dgm[k];
    }
    beta += alpha_d * dbeta;
  }
  evaluate();
  if (!(std::abs(gap) <= opt_.gap_tolerance) && std::isfinite(best.merit)) {
    beta = best.beta;
    primal_obj = best.primal;
    dual_obj = best.dual;
    gap = best.gap;
  }

  if (!(std::abs(gap) <= opt_.gap_tolerance) || !std::isfinite(primal_obj)) {
    std::ostringstream msg;
    msg << "quantile regression LP did not converge after " << iter
        << " iterations (relative duality gap " << gap << ")";
    fail(ErrorKind::kSolverFailure, msg.str());
  }

  QuantileFit fit;
  fit.levels = taus_;
  fit.p = p_;
  fit.coefficients.assign(beta.data(), beta.data() + P_);
  fit.column_names = d_.column_names;
  fit.objective_value = primal_obj;
  fit.duality_gap = std::max(gap, 0.0);
  fit.iterations = iter;
  dual_objective_ = dual_obj;
  return fit;
}

// Basic solution through the first p linearly independent rows, taken in
// order of increasing absolute residual under beta.
bool vertex_near(const Design& d, std::span<const double> beta, VectorXd& vertex) {
  const std::size_t n = d.n, p = d.p;
  std::vector<double> fitted(n);
  kernels::row_dot(d.rows.data(), n, p, beta.data(), fitted.data());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return std::abs(d.response[l] - fitted[l]) < std::abs(d.response[r] - fitted[r]);
  });

  MatrixXd basis(0, p);
  VectorXd rhs(0);
  for (std::size_t idx : order) {
    if (static_cast<std::size_t>(basis.rows()) == p) break;
    MatrixXd trial(basis.rows() + 1, p);
    trial.topRows(basis.rows()) = basis;
    for (std::size_t c = 0; c < p; ++c) trial(basis.rows(), c) = d.rows[idx * p + c];
    Eigen::FullPivLU<MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (static_cast<Eigen::Index>(lu.rank()) < trial.rows()) continue;
    basis = std::move(trial);
    rhs.conservativeResize(rhs.size() + 1);
    rhs[rhs.size() - 1] = d.response[idx];
  }
  if (static_cast<std::size_t>(basis.rows()) != p) return false;
  vertex = basis.fullPivLu().solve(rhs);
  return vertex.allFinite();
}

// Replaces an interior single-level solution by the nearby vertex when that
// vertex is at least as good.
void polish_vertex(const Design& d, double tau, QuantileFit& fit, double dual_obj,
                   const LpOptions& opt) {
  const std::size_t p = d.p;
  VectorXd vertex;
  if (!vertex_near(d, fit.coefficients, vertex)) return;
  const double obj = check_objective(d, {vertex.data(), p}, tau);
  const double slack = 1e-12 * std::max(1.0, std::abs(fit.objective_value));
  if (obj <= fit.objective_value + slack &&
      (obj - dual_obj) / std::max(1.0, std::abs(obj)) <= opt.gap_tolerance) {
    fit.coefficients.assign(vertex.data(), vertex.data() + p);
    fit.objective_value = obj;
    fit.duality_gap = std::max(0.0, (obj - dual_obj) / std::max(1.0, std::abs(obj)));
  }
}

QuantileFit solve_stacked(const Design& design, std::span<const double> levels,
                          const LpOptions& options) {
  validate_levels(levels);
  if (design.response.size() != design.n || design.rows.size() != design.n * design.p)
    fail(ErrorKind::kDimensionMismatch, "design arrays are inconsistent");
  require_full_rank(design);

  if (levels.size() == 1 && is_intercept_only(design)) {
    // Closed form: the minimizer set is [y_(k), y_(k+1)] when n*tau = k is an
    // integer and the single point y_(ceil(n*tau)) otherwise.
    std::vector<double> sorted = design.response;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(design.n);
    auto k = static_cast<std::size_t>(std::ceil(n * levels[0] - 1e-9));
    k = std::clamp<std::size_t>(k, 1, design.n);
    QuantileFit fit;
    fit.levels = {levels[0]};
    fit.p = 1;
    fit.coefficients = {sorted[k - 1]};
    fit.column_names = design.column_names;
    fit.objective_value = check_objective(design, fit.coefficients, levels[0]);
    return fit;
  }

  // Solve on a standardized response so that the returned point on a
  // non-unique optimal face follows affine transformations of Y.
  std::vector<double> sorted = design.response;
  std::nth_element(sorted.begin(), sorted.begin() + design.n / 2, sorted.end());
  const bool intercept = design.p > 0 && has_intercept_column(design);
  const double center = intercept ? sorted[design.n / 2] : 0.0;
  double spread = 0.0;
  for (double v : design.response) spread += std::abs(v - center);
  spread /= static_cast<double>(design.n);
  if (!(spread > 0.0) || !std::isfinite(spread)) spread = 1.0;

  Design standard = design;
  for (auto& v : standard.response) v = (v - center) / spread;

  // Identical design rows give identical non-crossing constraints.
  const std::vector<std::vector<std::size_t>> constraints(
      levels.size() > 1 ? levels.size() - 1 : 0, distinct_rows(standard));
  StackedQrSolver solver(standard, levels, constraints, options);
  QuantileFit fit = solver.solve();
  const double gap = fit.objective_value - solver.dual_objective();

  for (std::size_t j = 0; j < fit.level_count(); ++j) {
    double* b = fit.coefficients.data() + j * fit.p;
    for (std::size_t k = 0; k < fit.p; ++k) b[k] *= spread;
    b[0] += center;
  }
  double objective = 0.0;
  for (std::size_t j = 0; j < fit.level_count(); ++j)
    objective += check_objective(design, fit.coef(j), levels[j]);
  fit.objective_value = objective;
  if (levels.size() == 1)
    polish_vertex(design, levels[0], fit, objective - spread * gap, options);
  return fit;
}

}  // namespace

std::vector<double> fit_single_qr(const Design& design, double tau, const LpOptions& options) {
  const double level[1] = {tau};
  return solve_stacked(design, level, options).coefficients;
}

std::vector<double> fit_single_qr(const Dataset& data, double tau, const LpOptions& options) {
  return fit_single_qr(Design::treatment_model(data), tau, options);
}

QuantileFit fit_noncrossing_qr(const Design& design, std::span<const double> levels,
                               const LpOptions& options) {
  return solve_stacked(design, levels, options);
}

QuantileFit fit_noncrossing_qr(const Dataset& data, std::span<const double> levels,
                               const LpOptions& options) {
  return fit_noncrossing_qr(Design::treatment_model(data), levels, options);
}

std::vector<double> predict_quantiles(const QuantileFit& fit, int treatment,
                                      std::span<const double> covariates) {
  if (fit.p < 2 || covariates.size() + 2 != fit.p)
    fail(ErrorKind::kDimensionMismatch,
         "prediction needs " + std::to_string(fit.p >= 2 ? fit.p - 2 : 0) +
             " covariates, got " + std::to_string(covariates.size()));
  std::vector<double> w(fit.p);
  w[0] = 1.0;
  w[1] = static_cast<double>(treatment);
  std::copy(covariates.begin(), covariates.end(), w.begin() + 2);
  std::vector<double> out(fit.level_count());
  kernels::row_dot(fit.coefficients.data(), fit.level_count(), fit.p, w.data(), out.data());
  return out;
}

double check_objective(const Design& design, std::span<const double> beta, double tau) {
  if (beta.size() != design.p)
    fail(ErrorKind::kDimensionMismatch, "coefficient vector does not match the design");
  std::vector<double> r(design.n);
  kernels::row_dot(design.rows.data(), design.n, design.p, beta.data(), r.data());
  for (std::size_t i = 0; i < design.n; ++i) r[i] = design.response[i] - r[i];
  return kernels::check_loss(r.data(), r.size(), tau);
}

double min_crossing_margin(const QuantileFit& fit, const Design& design) {
  if (design.p != fit.p)
    fail(ErrorKind::kDimensionMismatch, "fit and design have different widths");
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> lo(design.n), hi(design.n);
  for (std::size_t j = 0; j + 1 < fit.level_count(); ++j) {
    kernels::row_dot(design.rows.data(), design.n, design.p, fit.coef(j).data(), lo.data());
    kernels::row_dot(design.rows.data(), design.n, design.p, fit.coef(j + 1).data(), hi.data());
    for (std::size_t i = 0; i < design.n; ++i) best = std::min(best, hi[i] - lo[i]);
  }
  return best;
}

}  // namespace eqte
