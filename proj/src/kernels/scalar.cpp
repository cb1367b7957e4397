#include <algorithm>
#include <cstddef>

#include "eqte/kernels.hpp"

namespace eqte::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void row_dot_scalar(const double* rows, std::size_t n, std::size_t p,
                    const double* coef, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = dot_scalar(rows + i * p, coef, p);
}

void weighted_gram_scalar(const double* rows, std::size_t n, std::size_t p,
                          const double* weights, double* acc) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = rows + i * p;
    const double w = weights[i];
    for (std::size_t a = 0; a < p; ++a) {
      const double s = w * x[a];
      double* dst = acc + a * p;
      for (std::size_t b = 0; b < p; ++b) dst[b] += s * x[b];
    }
  }
}

double check_loss_scalar(const double* r, std::size_t n, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += std::max(tau * r[i], (tau - 1.0) * r[i]);
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar, row_dot_scalar,
                                 weighted_gram_scalar, check_loss_scalar};
  return table;
}

}  // namespace eqte::kernels
