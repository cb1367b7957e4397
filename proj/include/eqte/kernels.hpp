#pragma once

// Data-parallel inner loops shared by the estimators. Each kernel has a
// portable scalar reference implementation and, where the build and the CPU
// allow it, an AVX2/FMA variant chosen once at startup. The two variants are
// equivalence-tested; they differ only in floating-point summation order.

#include <cstddef>
#include <string_view>

namespace eqte::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view to_string(Backend backend);

bool backend_available(Backend backend);

// The backend used by the free functions below. Defaults to the widest
// available one unless EQTE_SIMD=scalar is set in the environment.
Backend active_backend();

// Overrides the dispatch (tests use this to compare variants). Throws
// eqte::Error if the backend is not available on this machine.
void set_backend(Backend backend);

double dot(const double* a, const double* b, std::size_t n);

// out[i] = <rows[i*p .. i*p+p), coef> for i in [0, n). rows is row-major.
void row_dot(const double* rows, std::size_t n, std::size_t p,
             const double* coef, double* out);

// acc (p x p, row-major) += sum_i weights[i] * row_i * row_i^T.
void weighted_gram(const double* rows, std::size_t n, std::size_t p,
                   const double* weights, double* acc);

// sum_i rho_tau(r_i) with rho_tau(r) = r * (tau - 1{r < 0}).
double check_loss(const double* residuals, std::size_t n, double tau);

// Function table implemented once per backend.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*row_dot)(const double*, std::size_t, std::size_t, const double*,
                  double*);
  void (*weighted_gram)(const double*, std::size_t, std::size_t,
                        const double*, double*);
  double (*check_loss)(const double*, std::size_t, double);
};

const KernelTable& scalar_table();
// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

}  // namespace eqte::kernels
