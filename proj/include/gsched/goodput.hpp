#pragma once

// Closed-form goodput model of a data-parallel training job: iteration time
// as a function of placement and batch configuration, statistical efficiency
// as a function of total batch size and gradient noise scale, and the
// batch-configuration search that maximizes their product.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gsched {

// Number of GPUs allocated to one job on each node, indexed by node.
class AllocationVector {
 public:
  AllocationVector() = default;
  explicit AllocationVector(std::vector<int> gpus_per_node);

  std::span<const int> gpus_per_node() const { return gpus_; }
  int total_gpus() const { return total_; }
  int occupied_nodes() const { return occupied_; }
  bool empty() const { return total_ == 0; }

  friend bool operator==(const AllocationVector&, const AllocationVector&) = default;

 private:
  std::vector<int> gpus_;
  int total_ = 0;
  int occupied_ = 0;
};

// The part of an allocation the throughput model depends on: how many GPUs
// and how many distinct nodes they span.
struct Placement {
  int gpus = 0;
  int nodes = 0;

  static Placement of(const AllocationVector& a) {
    return {a.total_gpus(), a.occupied_nodes()};
  }
  friend bool operator==(const Placement&, const Placement&) = default;
};

struct BatchConfig {
  int per_gpu_batch = 1;  // m, examples per GPU per pass
  int accum_steps = 0;    // s, local passes before each synchronization

  friend bool operator==(const BatchConfig&, const BatchConfig&) = default;
};

struct ThroughputParams {
  double alpha_grad = 0.0;
  double beta_grad = 0.0;
  double alpha_sync_local = 0.0;
  double beta_sync_local = 0.0;
  double alpha_sync_node = 0.0;
  double beta_sync_node = 0.0;
  double gamma = 1.0;

  static constexpr double kMinGamma = 1.0;
  static constexpr double kMaxGamma = 10.0;

  // True when every alpha/beta is non-negative and gamma is in [1, 10].
  bool within_bounds() const;

  friend bool operator==(const ThroughputParams&, const ThroughputParams&) = default;
};

struct GoodputModel {
  ThroughputParams params;
  double pgns = 0.0;          // phi; negative estimates are treated as 0
  std::int64_t init_batch = 1;  // M_0
  std::optional<std::int64_t> max_batch;
  int max_per_gpu_batch = 1;
  bool non_adaptive = false;
};

// Largest accumulation step count considered by the batch optimizer.
inline constexpr int kMaxAccumSteps = 15;

std::int64_t total_batch_size(Placement p, BatchConfig c);
std::int64_t total_batch_size(const AllocationVector& a, BatchConfig c);

double t_grad(const ThroughputParams& p, double per_gpu_batch);
double t_sync(const ThroughputParams& p, Placement placement);
double t_iter(const ThroughputParams& p, Placement placement, BatchConfig c);
inline double t_iter(const ThroughputParams& p, const AllocationVector& a, BatchConfig c) {
  return t_iter(p, Placement::of(a), c);
}

// Overlapped combination (a^gamma + b^gamma)^(1/gamma), evaluated without
// overflow for large gamma.
double overlap(double a, double b, double gamma);

double throughput(const GoodputModel& g, Placement placement, BatchConfig c);
double efficiency(const GoodputModel& g, std::int64_t total_batch);
double goodput(const GoodputModel& g, Placement placement, BatchConfig c);

inline double throughput(const GoodputModel& g, const AllocationVector& a, BatchConfig c) {
  return throughput(g, Placement::of(a), c);
}
inline double goodput(const GoodputModel& g, const AllocationVector& a, BatchConfig c) {
  return goodput(g, Placement::of(a), c);
}

enum class Objective { kGoodput, kThroughput };

struct BatchChoice {
  BatchConfig config;
  std::int64_t total_batch = 0;
  double value = 0.0;  // goodput or throughput, per the objective
};

// Exact argmax over every integer (m, s) with 1 <= m <= max_per_gpu_batch,
// 0 <= s <= kMaxAccumSteps and M_0 <= M <= max_batch. Ties go to the smaller
// total batch, then the smaller s. Non-adaptive jobs only consider, for each
// s, the smallest m reaching M_0.
BatchChoice optimize_batch_config(const GoodputModel& g, Placement placement,
                                  Objective objective = Objective::kGoodput);
inline BatchChoice optimize_batch_config(const GoodputModel& g, const AllocationVector& a,
                                         Objective objective = Objective::kGoodput) {
  return optimize_batch_config(g, Placement::of(a), objective);
}

// Per-GPU batch and accumulation steps that realize a user-fixed total batch
// on `placement`: the smallest s for which ceil(M / (K (s+1))) fits in memory.
BatchConfig fixed_batch_config(const GoodputModel& g, Placement placement,
                               std::int64_t total_batch);

struct LrScaleRule {
  enum class Kind { kLinear, kSquareRoot, kAdaScale };
  Kind kind = Kind::kLinear;
  std::optional<double> pgns;  // required for kAdaScale
};

double scale_lr(const LrScaleRule& rule, std::int64_t init_batch, std::int64_t total_batch);

}  // namespace gsched
