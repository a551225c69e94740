#pragma once

// Cloud autoscaling for a single elastic job: add nodes while the job still
// uses them efficiently, and account for what the nodes cost.

#include <string>
#include <utility>
#include <vector>

#include "gsched/goodput.hpp"
#include "gsched/profiles.hpp"

namespace gsched {

enum class ScaleMode { kGoodput, kThroughput };

struct AutoscalePolicy {
  double upper = 2.0 / 3.0;  // U: scale when per-GPU value exceeds U x ideal
  double lower = 0.5;        // L: target per-GPU value after scaling
  int gpus_per_node = 4;
  int max_nodes = 16;
  double price_per_node_hour = 1.0;
  ScaleMode mode = ScaleMode::kGoodput;
};

// Per-GPU optimized goodput (or throughput) on `nodes` full nodes.
double per_gpu_value(const GoodputModel& model, int nodes, const AutoscalePolicy& policy);

// Scale-up only. If the per-GPU value at current_nodes is strictly above
// U x the single-GPU value, returns the smallest larger node count whose
// per-GPU value is at or below L x the single-GPU value (max_nodes when
// none is); otherwise current_nodes.
int decide_scale(const GoodputModel& model, int current_nodes, const AutoscalePolicy& policy);

struct CostSample {
  double t = 0.0;
  int nodes = 0;
  double phi = 0.0;
  double efficiency = 1.0;
  double cumulative_cost = 0.0;
};

struct AutoscaleRun {
  std::vector<CostSample> samples;
  double completion_s = 0.0;
  double node_hours = 0.0;
  double cost = 0.0;
};

struct Cost {
  double node_hours = 0.0;
  double currency = 0.0;
};

// Integrates a piecewise-constant node count: segments (start time, nodes)
// sorted by time, held until the next segment or `end`.
Cost cost(const std::vector<std::pair<double, int>>& segments, double end, double price_per_node_hour);

struct AutoscaleSimOptions {
  double tick = 1.0;
  double interval = 60.0;
  double realloc_delay = 30.0;
  int initial_nodes = 1;
  double max_sim_seconds = 30.0 * 86400.0;
};

// Trains one job from the profile library to completion, rescaling at every
// interval. Throughput parameters come from a fit over the whole profile.
AutoscaleRun simulate_autoscale(const ProfileLibrary& lib, const std::string& model,
                                const AutoscalePolicy& policy, const AutoscaleSimOptions& options = {});

// CSV with header t,nodes,phi,efficiency,cumulative_cost.
std::string autoscale_csv(const AutoscaleRun& run);

}  // namespace gsched
