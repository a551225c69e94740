#pragma once

// Data-parallel inner loops shared by the gradient-statistics and fitness
// code. Each kernel has a portable scalar reference in `scalar::` and, on
// x86-64 builds, an AVX2/FMA variant in `avx2::`. The unqualified entry
// points dispatch once at first use based on CPUID; set GSCHED_ISA=scalar
// in the environment to force the reference path.

#include <span>
#include <string_view>

namespace gsched::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

// ISA selected for this process.
Isa active_isa();

// True when the AVX2 variants were compiled in and the CPU supports them.
bool avx2_available();

// sum_i x_i^2
double sum_squares(std::span<const double> x);

// sum_i (x_i - y_i)^2; x and y must have equal length.
double sum_squared_diff(std::span<const double> x, std::span<const double> y);

// out_i = y_i + a * x_i; all spans must have equal length. `out` may alias y.
void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out);

// sum_i 1 / (x_i + offset)
double reciprocal_sum(std::span<const double> x, double offset);

// sum_i (x_i + offset)^p. p == 1 and p == -1 take vectorized paths; other
// exponents fall back to std::pow per element.
double power_sum(std::span<const double> x, double offset, double p);

namespace scalar {
double sum_squares(std::span<const double> x);
double sum_squared_diff(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out);
double reciprocal_sum(std::span<const double> x, double offset);
double shifted_sum(std::span<const double> x, double offset);
}  // namespace scalar

#if defined(GSCHED_HAVE_AVX2)
namespace avx2 {
double sum_squares(std::span<const double> x);
double sum_squared_diff(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out);
double reciprocal_sum(std::span<const double> x, double offset);
double shifted_sum(std::span<const double> x, double offset);
}  // namespace avx2
#endif

}  // namespace gsched::kernels
