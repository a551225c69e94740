#include <cstddef>

#include "gsched/kernels.hpp"

namespace gsched::kernels::scalar {

double sum_squares(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double sum_squared_diff(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = y[i] + a * x[i];
}

double reciprocal_sum(std::span<const double> x, double offset) {
  double acc = 0.0;
  for (double v : x) acc += 1.0 / (v + offset);
  return acc;
}

double shifted_sum(std::span<const double> x, double offset) {
  double acc = 0.0;
  for (double v : x) acc += v + offset;
  return acc;
}

}  // namespace gsched::kernels::scalar
