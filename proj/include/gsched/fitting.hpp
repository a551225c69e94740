#pragma once

// Online estimation of ThroughputParams from observed iteration times.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsched/goodput.hpp"

namespace gsched {

struct ProfilePoint {
  AllocationVector allocation;
  BatchConfig batch;
  double observed_t_iter = 0.0;  // seconds, > 0
};

// Which placement regimes a job has run in. Flags only ever go from false to
// true and max_gpus_seen never decreases. The local synchronization terms are
// only observable on single-node placements and the node terms only on
// multi-node ones, so each regime is tracked separately.
class ExplorationState {
 public:
  void observe(const AllocationVector& a) { observe(Placement::of(a)); }
  void observe(Placement p);

  bool seen_multi_gpu() const { return seen_multi_gpu_; }
  bool seen_multi_node() const { return seen_multi_node_; }
  bool seen_three_plus_gpus() const { return seen_three_plus_gpus_; }
  bool seen_local_multi_gpu() const { return seen_local_multi_gpu_; }
  bool seen_local_three_plus() const { return seen_local_three_plus_; }
  bool seen_node_three_plus() const { return seen_node_three_plus_; }
  int max_gpus_seen() const { return max_gpus_seen_; }

 private:
  bool seen_multi_gpu_ = false;
  bool seen_multi_node_ = false;
  bool seen_three_plus_gpus_ = false;
  bool seen_local_multi_gpu_ = false;
  bool seen_local_three_plus_ = false;
  bool seen_node_three_plus_ = false;
  int max_gpus_seen_ = 1;
};

// Upper limit on the GPUs the scheduler may give a job: twice its lifetime
// maximum.
int allocation_cap(const ExplorationState& state);

// sqrt(mean((ln predicted - ln observed)^2)).
double rmsle(const ThroughputParams& params, std::span<const ProfilePoint> points);

struct FitOptions {
  int num_starts = 8;
  int max_iterations = 400;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct FitResult {
  ThroughputParams params;
  double rmsle = 0.0;
  // Set when every start failed to produce a finite objective; params then
  // come from the previous fit or from a priors-only guess.
  bool optimizer_failed = false;
};

// Bounded minimization of RMSLE over the 7 throughput parameters. Parameters
// whose regime the job has not yet explored are pinned to zero:
//   alpha_sync_local until a single-node placement with 2+ GPUs,
//   beta_sync_local until a single-node placement with 3+ GPUs,
//   alpha_sync_node until any multi-node placement,
//   beta_sync_node until a multi-node placement with 3+ GPUs.
FitResult fit_throughput(std::span<const ProfilePoint> points, const ExplorationState& state,
                         const std::optional<ThroughputParams>& prev = std::nullopt,
                         const FitOptions& options = {});

// Parameter layout used by the optimizer, exposed for tests.
inline constexpr int kNumThroughputParams = 7;
std::array<double, kNumThroughputParams> to_array(const ThroughputParams& p);
ThroughputParams from_array(const std::array<double, kNumThroughputParams>& x);
std::array<bool, kNumThroughputParams> prior_mask(const ExplorationState& state);

}  // namespace gsched
