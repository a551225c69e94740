#include "gsched/goodput.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsched/error.hpp"

namespace gsched {

AllocationVector::AllocationVector(std::vector<int> gpus_per_node)
    : gpus_(std::move(gpus_per_node)) {
  for (int g : gpus_) {
    if (g < 0) throw Error(ErrorCode::kInvalidArgument, "negative GPU count in allocation");
    total_ += g;
    occupied_ += g > 0 ? 1 : 0;
  }
}

bool ThroughputParams::within_bounds() const {
  const double ab[] = {alpha_grad,      beta_grad,      alpha_sync_local,
                       beta_sync_local, alpha_sync_node, beta_sync_node};
  for (double v : ab) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
  }
  return gamma >= kMinGamma && gamma <= kMaxGamma;
}

std::int64_t total_batch_size(Placement p, BatchConfig c) {
  if (p.gpus < 1) throw Error(ErrorCode::kNoReplicas, "no replicas");
  if (c.per_gpu_batch < 1 || c.accum_steps < 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch config requires m >= 1 and s >= 0");
  }
  return static_cast<std::int64_t>(p.gpus) * c.per_gpu_batch * (c.accum_steps + 1);
}

std::int64_t total_batch_size(const AllocationVector& a, BatchConfig c) {
  return total_batch_size(Placement::of(a), c);
}

double t_grad(const ThroughputParams& p, double per_gpu_batch) {
  return p.alpha_grad + p.beta_grad * per_gpu_batch;
}

double t_sync(const ThroughputParams& p, Placement placement) {
  if (placement.gpus < 1) throw Error(ErrorCode::kNoReplicas, "no replicas");
  if (placement.gpus == 1) return 0.0;
  const double extra = placement.gpus - 2;
  if (placement.nodes <= 1) return p.alpha_sync_local + p.beta_sync_local * extra;
  return p.alpha_sync_node + p.beta_sync_node * extra;
}

double overlap(double a, double b, double gamma) {
  if (gamma == 1.0) return a + b;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi <= 0.0) return 0.0;
  return hi * std::pow(1.0 + std::pow(lo / hi, gamma), 1.0 / gamma);
}

double t_iter(const ThroughputParams& p, Placement placement, BatchConfig c) {
  const double grad = t_grad(p, c.per_gpu_batch);
  const double sync = t_sync(p, placement);
  return c.accum_steps * grad + overlap(grad, sync, p.gamma);
}

double throughput(const GoodputModel& g, Placement placement, BatchConfig c) {
  const auto total = total_batch_size(placement, c);
  return static_cast<double>(total) / t_iter(g.params, placement, c);
}

double efficiency(const GoodputModel& g, std::int64_t total_batch) {
  if (total_batch < g.init_batch) {
    throw Error(ErrorCode::kBelowInitialBatch,
                "below initial batch size: " + std::to_string(total_batch) + " < " +
                    std::to_string(g.init_batch));
  }
  if (g.non_adaptive) return 1.0;
  const double phi = std::max(0.0, g.pgns);
  if (std::isinf(phi)) return 1.0;
  return (phi + static_cast<double>(g.init_batch)) / (phi + static_cast<double>(total_batch));
}

double goodput(const GoodputModel& g, Placement placement, BatchConfig c) {
  const auto total = total_batch_size(placement, c);
  return throughput(g, placement, c) * efficiency(g, total);
}

namespace {

struct Candidate {
  double value = -1.0;
  std::int64_t total = 0;
  BatchConfig config;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.total != b.total) return a.total < b.total;
  return a.config.accum_steps < b.config.accum_steps;
}

struct Interval {
  int lo;
  int hi;
  double thr_hi;  // throughput at hi (the largest on the interval)
  double eff_lo;  // efficiency at lo (the largest on the interval)
};

// Bound slack: throughput(m) and efficiency(M) are monotone in exact
// arithmetic but can wobble by an ulp after rounding.
constexpr double kBoundSlack = 1e-12;

}  // namespace

BatchChoice optimize_batch_config(const GoodputModel& g, Placement placement,
                                  Objective objective) {
  if (placement.gpus < 1) throw Error(ErrorCode::kNoReplicas, "no replicas");
  if (g.init_batch < 1 || g.max_per_gpu_batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "init_batch and max_per_gpu_batch must be >= 1");
  }
  const std::int64_t max_total = g.non_adaptive
                                     ? std::numeric_limits<std::int64_t>::max()
                                     : g.max_batch.value_or(std::numeric_limits<std::int64_t>::max());
  const bool use_eff = objective == Objective::kGoodput;

  Candidate best;
  std::vector<Interval> stack;

  for (int s = 0; s <= kMaxAccumSteps; ++s) {
    const std::int64_t replicas = static_cast<std::int64_t>(placement.gpus) * (s + 1);
    const std::int64_t lo64 = std::max<std::int64_t>(1, (g.init_batch + replicas - 1) / replicas);
    std::int64_t hi64 = g.non_adaptive ? lo64 : std::min<std::int64_t>(g.max_per_gpu_batch, max_total / replicas);
    if (g.non_adaptive && lo64 > g.max_per_gpu_batch) continue;
    if (lo64 > hi64) continue;
    const int lo = static_cast<int>(lo64);
    const int hi = static_cast<int>(hi64);

    auto eval = [&](int m, double* thr_out, double* eff_out) {
      const BatchConfig c{m, s};
      const std::int64_t total = replicas * m;
      const double thr = static_cast<double>(total) / t_iter(g.params, placement, c);
      const double eff = use_eff ? efficiency(g, total) : 1.0;
      if (thr_out) *thr_out = thr;
      if (eff_out) *eff_out = eff;
      const Candidate cand{thr * eff, total, c};
      if (better(cand, best)) best = cand;
    };

    double thr_lo = 0.0, eff_lo = 0.0, thr_hi = 0.0, eff_hi = 0.0;
    eval(lo, &thr_lo, &eff_lo);
    if (hi == lo) continue;
    eval(hi, &thr_hi, &eff_hi);

    stack.clear();
    stack.push_back({lo, hi, thr_hi, eff_lo});
    while (!stack.empty()) {
      const Interval iv = stack.back();
      stack.pop_back();
      if (iv.hi - iv.lo <= 1) continue;
      const double bound = iv.thr_hi * iv.eff_lo;
      if (bound < best.value * (1.0 - kBoundSlack)) continue;
      const int mid = iv.lo + (iv.hi - iv.lo) / 2;
      double thr_mid = 0.0, eff_mid = 0.0;
      eval(mid, &thr_mid, &eff_mid);
      const Interval left{iv.lo, mid, thr_mid, iv.eff_lo};
      const Interval right{mid, iv.hi, iv.thr_hi, eff_mid};
      // Explore the more promising half first.
      if (left.thr_hi * left.eff_lo >= right.thr_hi * right.eff_lo) {
        stack.push_back(right);
        stack.push_back(left);
      } else {
        stack.push_back(left);
        stack.push_back(right);
      }
    }
  }

  if (best.value < 0.0) {
    throw Error(ErrorCode::kInfeasibleBatch,
                "infeasible batch: no (m, s) reaches M_0=" + std::to_string(g.init_batch) +
                    " on " + std::to_string(placement.gpus) + " GPUs");
  }
  return {best.config, best.total, best.value};
}

BatchConfig fixed_batch_config(const GoodputModel& g, Placement placement,
                               std::int64_t total_batch) {
  if (placement.gpus < 1) throw Error(ErrorCode::kNoReplicas, "no replicas");
  if (total_batch < 1) throw Error(ErrorCode::kInvalidArgument, "total batch must be >= 1");
  const std::int64_t k = placement.gpus;
  const std::int64_t cap = static_cast<std::int64_t>(g.max_per_gpu_batch) * k;
  const std::int64_t passes = std::max<std::int64_t>(1, (total_batch + cap - 1) / cap);
  const std::int64_t m = (total_batch + k * passes - 1) / (k * passes);
  return {static_cast<int>(std::max<std::int64_t>(1, m)), static_cast<int>(passes - 1)};
}

double scale_lr(const LrScaleRule& rule, std::int64_t init_batch, std::int64_t total_batch) {
  if (init_batch < 1) throw Error(ErrorCode::kInvalidArgument, "M_0 must be >= 1");
  if (total_batch < init_batch) {
    throw Error(ErrorCode::kBelowInitialBatch, "below initial batch size");
  }
  const double ratio = static_cast<double>(total_batch) / static_cast<double>(init_batch);
  switch (rule.kind) {
    case LrScaleRule::Kind::kLinear:
      return ratio;
    case LrScaleRule::Kind::kSquareRoot:
      return std::sqrt(ratio);
    case LrScaleRule::Kind::kAdaScale: {
      if (!rule.pgns) throw Error(ErrorCode::kMissingPgns, "adascale requires a pgns value");
      const double phi = std::max(0.0, *rule.pgns);
      if (std::isinf(phi)) return ratio;
      return (phi / static_cast<double>(init_batch) + 1.0) /
             (phi / static_cast<double>(total_batch) + 1.0);
    }
  }
  return 1.0;
}

}  // namespace gsched
