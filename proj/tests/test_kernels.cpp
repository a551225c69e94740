#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gsched/error.hpp"
#include "gsched/kernels.hpp"

using namespace gsched;
namespace k = gsched::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Lengths around the vector width and its multiples, to exercise tails.
const std::vector<std::size_t> kLengths = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1023, 4096};

double naive_sum_squares(const std::vector<double>& x) {
  long double acc = 0;
  for (double v : x) acc += static_cast<long double>(v) * v;
  return static_cast<double>(acc);
}

}  // namespace

TEST(Kernels, ScalarMatchesDefinitions) {
  std::mt19937_64 rng(1);
  for (auto n : kLengths) {
    const auto x = random_vec(n, rng), y = random_vec(n, rng);
    const auto pos = random_vec(n, rng, 0.5, 4.0);
    EXPECT_NEAR(k::scalar::sum_squares(x), naive_sum_squares(x), 1e-10 * (1 + n));
    long double d = 0, r = 0, s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d += (x[i] - y[i]) * (x[i] - y[i]);
      r += 1.0 / (pos[i] + 0.25);
      s += pos[i] + 0.25;
    }
    EXPECT_NEAR(k::scalar::sum_squared_diff(x, y), static_cast<double>(d), 1e-10 * (1 + n));
    EXPECT_NEAR(k::scalar::reciprocal_sum(pos, 0.25), static_cast<double>(r), 1e-10 * (1 + n));
    EXPECT_NEAR(k::scalar::shifted_sum(pos, 0.25), static_cast<double>(s), 1e-10 * (1 + n));
    std::vector<double> out(n);
    k::scalar::axpy(1.5, x, y, out);
    for (std::size_t i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(out[i], y[i] + 1.5 * x[i]);
  }
}

TEST(Kernels, Avx2MatchesScalar) {
#if defined(GSCHED_HAVE_AVX2)
  if (!k::avx2_available()) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    for (auto n : kLengths) {
      const auto x = random_vec(n, rng), y = random_vec(n, rng);
      const auto pos = random_vec(n, rng, 0.5, 4.0);
      const double tol = 1e-12 * (1 + n);
      EXPECT_NEAR(k::avx2::sum_squares(x), k::scalar::sum_squares(x), tol * 10);
      EXPECT_NEAR(k::avx2::sum_squared_diff(x, y), k::scalar::sum_squared_diff(x, y), tol * 40);
      EXPECT_NEAR(k::avx2::reciprocal_sum(pos, 0.1), k::scalar::reciprocal_sum(pos, 0.1), tol * 2);
      EXPECT_NEAR(k::avx2::shifted_sum(pos, 0.1), k::scalar::shifted_sum(pos, 0.1), tol * 4);
      std::vector<double> a(n), b(n);
      k::avx2::axpy(-0.7, x, y, a);
      k::scalar::axpy(-0.7, x, y, b);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-15 * (1 + std::abs(b[i])));
    }
  }
#else
  GTEST_SKIP() << "built without AVX2 variants";
#endif
}

TEST(Kernels, AxpyMayAliasOutput) {
  std::mt19937_64 rng(3);
  auto x = random_vec(37, rng), y = random_vec(37, rng);
  auto expect = y;
  for (std::size_t i = 0; i < y.size(); ++i) expect[i] += 2.0 * x[i];
  k::axpy(2.0, x, y, y);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expect[i], 1e-14);
}

TEST(Kernels, DispatchedEntryPoints) {
  std::mt19937_64 rng(4);
  const auto x = random_vec(333, rng), y = random_vec(333, rng);
  const auto pos = random_vec(333, rng, 1.0, 2.0);
  EXPECT_NEAR(k::sum_squares(x), k::scalar::sum_squares(x), 1e-9);
  EXPECT_NEAR(k::sum_squared_diff(x, y), k::scalar::sum_squared_diff(x, y), 1e-9);
  EXPECT_NEAR(k::power_sum(pos, 0.5, 1.0), k::scalar::shifted_sum(pos, 0.5), 1e-9);
  EXPECT_NEAR(k::power_sum(pos, 0.5, -1.0), k::scalar::reciprocal_sum(pos, 0.5), 1e-9);
  double ref = 0;
  for (double v : pos) ref += std::pow(v + 0.5, -3.0);
  EXPECT_NEAR(k::power_sum(pos, 0.5, -3.0), ref, 1e-12);
  EXPECT_THROW(k::sum_squared_diff(x, std::span<const double>(y).first(10)), Error);
  std::vector<double> out(5);
  EXPECT_THROW(k::axpy(1.0, x, y, out), Error);
  const auto isa = k::active_isa();
  EXPECT_TRUE(k::to_string(isa) == "avx2" || k::to_string(isa) == "scalar");
  if (!k::avx2_available()) {
    EXPECT_EQ(isa, k::Isa::kScalar);
  }
}
