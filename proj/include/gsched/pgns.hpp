#pragma once

// Gradient noise scale estimators. Callers supply squared norms of
// (pre-conditioned) gradient estimates; nothing here computes gradients.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace gsched {

struct GradientStats {
  double sq_norm_small = 0.0;  // |g_hat|^2 at b_small
  double sq_norm_big = 0.0;    // |g_hat|^2 at b_big
  double b_small = 1.0;
  double b_big = 2.0;
};

// Unbiased estimates of |g|^2 and tr(Sigma); the noise scale is their ratio.
struct NoiseComponents {
  double grad_sq = 0.0;
  double trace_sigma = 0.0;
};

NoiseComponents two_scale_components(const GradientStats& stats);

// max(0, tr(Sigma)/|g|^2). When the |g|^2 estimate is not positive the
// previous smoothed value is returned (0 if there is none).
double pgns_two_scale(const GradientStats& stats, std::optional<double> previous = std::nullopt);

// Components from two consecutive estimates at the same batch size, assuming
// the true gradient barely moves between them.
NoiseComponents differenced_components(double prev_sq_norm, double curr_sq_norm,
                                       double diff_sq_norm, double batch);

inline constexpr double kGradSqFloor = 1e-12;

double pgns_differenced(double prev_sq_norm, double curr_sq_norm, double diff_sq_norm,
                        double batch);

// Exponential moving average of the two components, bias corrected, so the
// ratio is taken after smoothing rather than before.
class PgnsTracker {
 public:
  // The default decay gives each update a half-life of 10 updates.
  explicit PgnsTracker(double decay = 0.9330329915368074);

  void update(const NoiseComponents& c);
  void update(const GradientStats& stats) { update(two_scale_components(stats)); }

  // Current smoothed noise scale; nullopt before the first usable update.
  std::optional<double> value() const { return last_; }
  int updates() const { return count_; }

 private:
  double decay_;
  double grad_sq_ = 0.0;
  double trace_ = 0.0;
  double weight_ = 0.0;
  int count_ = 0;
  std::optional<double> last_;
};

// Gaussian per-example gradients in d dimensions with mean g and isotropic
// covariance sigma^2 I, so the true noise scale is d sigma^2 / |g|^2.
class SyntheticGradientSource {
 public:
  SyntheticGradientSource(int dim, double noise_scale, std::uint64_t seed);

  double true_noise_scale() const { return noise_scale_; }

  // Mean of `batch` per-example gradients.
  void sample(double batch, std::vector<double>& out);

  // One local gradient at b_small and the average of `replicas` of them.
  GradientStats sample_two_scale(double b_small, int replicas);

 private:
  std::vector<double> mean_;
  double sigma_;
  double noise_scale_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<double> scratch_, accum_;
};

}  // namespace gsched
