#include <atomic>
#include <cstdlib>
#include <string>

#include "eqte/error.hpp"
#include "eqte/kernels.hpp"

namespace eqte::kernels {

#ifndef EQTE_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("EQTE_SIMD")) {
    if (std::string(env) == "scalar") return Backend::kScalar;
  }
  return backend_available(Backend::kAvx2) ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<const KernelTable*>& table_slot() {
  static std::atomic<const KernelTable*> slot{
      initial_backend() == Backend::kAvx2 ? avx2_table() : &scalar_table()};
  return slot;
}

const KernelTable& table() { return *table_slot().load(std::memory_order_relaxed); }

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool backend_available(Backend backend) {
  if (backend == Backend::kScalar) return true;
  static const bool available = avx2_table() != nullptr && cpu_has_avx2();
  return available;
}

Backend active_backend() {
  return &table() == &scalar_table() ? Backend::kScalar : Backend::kAvx2;
}

void set_backend(Backend backend) {
  if (!backend_available(backend))
    fail(ErrorKind::kInvalidArgument,
         "kernel backend '" + std::string(to_string(backend)) +
             "' is not available on this machine");
  table_slot().store(backend == Backend::kAvx2 ? avx2_table() : &scalar_table());
}

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

void row_dot(const double* rows, std::size_t n, std::size_t p,
             const double* coef, double* out) {
  table().row_dot(rows, n, p, coef, out);
}

void weighted_gram(const double* rows, std::size_t n, std::size_t p,
                   const double* weights, double* acc) {
  table().weighted_gram(rows, n, p, weights, acc);
}

double check_loss(const double* residuals, std::size_t n, double tau) {
  return table().check_loss(residuals, n, tau);
}

}  // namespace eqte::kernels
