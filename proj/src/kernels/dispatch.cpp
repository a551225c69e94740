#include <cmath>
#include <cstdlib>
#include <cstring>

#include "gsched/error.hpp"
#include "gsched/kernels.hpp"

namespace gsched::kernels {
namespace {

struct Table {
  Isa isa;
  double (*sum_squares)(std::span<const double>);
  double (*sum_squared_diff)(std::span<const double>, std::span<const double>);
  void (*axpy)(double, std::span<const double>, std::span<const double>, std::span<double>);
  double (*reciprocal_sum)(std::span<const double>, double);
  double (*shifted_sum)(std::span<const double>, double);
};

bool cpu_has_avx2() {
#if defined(GSCHED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Table make_table() {
  const char* forced = std::getenv("GSCHED_ISA");
  const bool force_scalar = forced != nullptr && std::strcmp(forced, "scalar") == 0;
#if defined(GSCHED_HAVE_AVX2)
  if (!force_scalar && cpu_has_avx2()) {
    return {Isa::kAvx2, avx2::sum_squares, avx2::sum_squared_diff, avx2::axpy,
            avx2::reciprocal_sum, avx2::shifted_sum};
  }
#endif
  (void)force_scalar;
  return {Isa::kScalar, scalar::sum_squares, scalar::sum_squared_diff, scalar::axpy,
          scalar::reciprocal_sum, scalar::shifted_sum};
}

const Table& table() {
  static const Table t = make_table();
  return t;
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::kInvalidArgument, "kernel span length mismatch");
}

}  // namespace

std::string_view to_string(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

Isa active_isa() { return table().isa; }

bool avx2_available() { return cpu_has_avx2(); }

double sum_squares(std::span<const double> x) { return table().sum_squares(x); }

double sum_squared_diff(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size());
  return table().sum_squared_diff(x, y);
}

void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out) {
  check_same_size(x.size(), y.size());
  check_same_size(x.size(), out.size());
  table().axpy(a, x, y, out);
}

double reciprocal_sum(std::span<const double> x, double offset) {
  return table().reciprocal_sum(x, offset);
}

double power_sum(std::span<const double> x, double offset, double p) {
  if (p == 1.0) return table().shifted_sum(x, offset);
  if (p == -1.0) return table().reciprocal_sum(x, offset);
  double acc = 0.0;
  for (double v : x) acc += std::pow(v + offset, p);
  return acc;
}

}  // namespace gsched::kernels
