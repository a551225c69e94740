#include "gsched/pgns.hpp"

#include <algorithm>
#include <cmath>

#include "gsched/error.hpp"
#include "gsched/kernels.hpp"

namespace gsched {

NoiseComponents two_scale_components(const GradientStats& s) {
  if (!(s.b_big > s.b_small) || s.b_small <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "two-scale estimator needs b_big > b_small > 0");
  }
  NoiseComponents c;
  c.grad_sq = (s.b_big * s.sq_norm_big - s.b_small * s.sq_norm_small) / (s.b_big - s.b_small);
  c.trace_sigma = (s.sq_norm_small - s.sq_norm_big) / (1.0 / s.b_small - 1.0 / s.b_big);
  return c;
}

double pgns_two_scale(const GradientStats& stats, std::optional<double> previous) {
  const auto c = two_scale_components(stats);
  if (!(c.grad_sq > 0.0)) return previous.value_or(0.0);
  return std::max(0.0, c.trace_sigma / c.grad_sq);
}

NoiseComponents differenced_components(double prev_sq_norm, double curr_sq_norm,
                                       double diff_sq_norm, double batch) {
  if (batch < 1.0) throw Error(ErrorCode::kInvalidArgument, "batch must be >= 1");
  const double var = 0.5 * diff_sq_norm;  // tr(Sigma) / batch
  NoiseComponents c;
  c.grad_sq = 0.5 * (prev_sq_norm + curr_sq_norm) - var;
  c.trace_sigma = batch * var;
  return c;
}

double pgns_differenced(double prev_sq_norm, double curr_sq_norm, double diff_sq_norm,
                        double batch) {
  const auto c = differenced_components(prev_sq_norm, curr_sq_norm, diff_sq_norm, batch);
  return std::max(0.0, c.trace_sigma / std::max(c.grad_sq, kGradSqFloor));
}

PgnsTracker::PgnsTracker(double decay) : decay_(decay) {
  if (!(decay >= 0.0 && decay < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "EMA decay must be in [0, 1)");
  }
}

void PgnsTracker::update(const NoiseComponents& c) {
  grad_sq_ = decay_ * grad_sq_ + (1.0 - decay_) * c.grad_sq;
  trace_ = decay_ * trace_ + (1.0 - decay_) * c.trace_sigma;
  weight_ = decay_ * weight_ + (1.0 - decay_);
  ++count_;
  const double g = grad_sq_ / weight_;
  const double t = trace_ / weight_;
  // A non-positive smoothed |g|^2 means the signal is still buried in noise;
  // keep the last usable estimate.
  if (g > 0.0) last_ = std::max(0.0, t / g);
}

SyntheticGradientSource::SyntheticGradientSource(int dim, double noise_scale,
                                                 std::uint64_t seed)
    : noise_scale_(noise_scale), rng_(seed) {
  if (dim < 1 || !(noise_scale >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic source needs dim >= 1, noise >= 0");
  }
  mean_.resize(dim);
  for (auto& v : mean_) v = normal_(rng_);
  const double g2 = kernels::sum_squares(mean_);
  sigma_ = std::sqrt(noise_scale * g2 / dim);
  scratch_.resize(dim);
  accum_.resize(dim);
}

void SyntheticGradientSource::sample(double batch, std::vector<double>& out) {
  out.resize(mean_.size());
  for (auto& v : scratch_) v = normal_(rng_);
  kernels::axpy(sigma_ / std::sqrt(batch), scratch_, mean_, out);
}

GradientStats SyntheticGradientSource::sample_two_scale(double b_small, int replicas) {
  if (replicas < 2) throw Error(ErrorCode::kInvalidArgument, "two-scale needs >= 2 replicas");
  std::vector<double> local;
  std::fill(accum_.begin(), accum_.end(), 0.0);
  GradientStats stats;
  stats.b_small = b_small;
  stats.b_big = b_small * replicas;
  for (int r = 0; r < replicas; ++r) {
    sample(b_small, local);
    if (r == 0) stats.sq_norm_small = kernels::sum_squares(local);
    kernels::axpy(1.0 / replicas, local, accum_, accum_);
  }
  stats.sq_norm_big = kernels::sum_squares(accum_);
  return stats;
}

}  // namespace gsched
