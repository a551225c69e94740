#pragma once

// Discrete-time cluster simulator: replays profiles for every job, runs a
// scheduling policy at fixed intervals, charges a restart delay for each
// re-allocation and optionally slows down distributed jobs that share nodes.

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsched/fitting.hpp"
#include "gsched/profiles.hpp"
#include "gsched/sched.hpp"
#include "gsched/workload.hpp"

namespace gsched {

enum class Policy { kPollux, kTiresias, kOptimus };

std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view s);

struct SimConfig {
  double tick = 1.0;
  double sched_interval = 60.0;
  double report_interval = 30.0;
  double realloc_delay = 30.0;
  double interference_slowdown = 0.0;  // in [0, 1)
  bool interference_avoidance = true;
  std::uint64_t seed = 0;
  Policy policy = Policy::kPollux;
  double p = -1.0;
  int nodes = 16;
  int gpus_per_node = 4;
  // Per-node GPU counts; overrides nodes/gpus_per_node when non-empty.
  std::vector<int> node_gpus;
  double tiresias_threshold = kDefaultTiresiasThreshold;
  SearchOptions search{50, 50, 10};
  FitOptions fit{2, 200, 0x9e3779b97f4a7c15ULL};
  // Guards against runs that never finish.
  double max_sim_seconds = 60.0 * 86400.0;
  double max_wall_seconds = 3600.0;
};

struct JobResult {
  std::string id;
  std::string model;
  Category category = Category::kSmall;
  double submit_s = 0.0;
  double start_s = std::numeric_limits<double>::quiet_NaN();
  double complete_s = std::numeric_limits<double>::quiet_NaN();
  double jct_s = std::numeric_limits<double>::quiet_NaN();
  int restarts = 0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double mean_active_jobs = 0.0;  // time-averaged contention while alive
  double gpu_seconds = 0.0;
  double examples = 0.0;
  double useful_examples = 0.0;
};

struct MetricsReport {
  std::vector<JobResult> jobs;
  double makespan = 0.0;
};

struct Summary {
  double avg_jct = 0.0;
  double p99_jct = 0.0;
  double makespan = 0.0;
  double avg_rho = std::numeric_limits<double>::quiet_NaN();
  double max_rho = std::numeric_limits<double>::quiet_NaN();
};

Summary summarize(const MetricsReport& report);

struct JobState {
  WorkloadJob spec;
  const ModelProfile* profile = nullptr;
  bool submitted = false;
  bool completed = false;
  bool started = false;
  std::vector<int> allocation;  // empty when not allocated
  BatchConfig batch;
  double progress = 0.0;  // statistical epochs
  int restarts = 0;
  double delay_remaining = 0.0;
  double start_s = std::numeric_limits<double>::quiet_NaN();
  double complete_s = std::numeric_limits<double>::quiet_NaN();
  double attained_gpu_seconds = 0.0;
  double examples = 0.0;
  double useful_examples = 0.0;
  double active_sum = 0.0;
  double alive_ticks = 0.0;

  // Agent-side view used by the goodput-driven policy.
  ExplorationState explore;
  std::vector<ProfilePoint> points;
  std::optional<ThroughputParams> fitted;
  double reported_phi = 0.0;
  double next_report_s = 0.0;

  // Cached iteration time of the current configuration without slowdown.
  double base_t_iter = 0.0;

  std::int64_t total_batch() const;
  int gpus() const;
};

// Throughput parameters used before a job has reported any measurement:
// iteration time proportional to the per-GPU batch with free synchronization.
ThroughputParams prior_params();

class Simulator {
 public:
  Simulator(const WorkloadSpec& workload, const ProfileLibrary& profiles, SimConfig cfg);

  double now() const { return now_; }
  const SimConfig& config() const { return cfg_; }
  const std::vector<JobState>& jobs() const { return jobs_; }
  const std::vector<int>& node_gpus() const { return node_gpus_; }
  bool done() const;

  // Marks jobs whose submission time has passed as submitted.
  void admit();
  // Runs the configured policy over all active jobs and applies its result.
  void schedule();
  // Applies rows (by job id; absent ids are unallocated). Rejects infeasible
  // matrices with ErrorCode::kInfeasibleAllocation.
  void apply_allocations(const std::map<std::string, std::vector<int>>& rows);
  // Advances one tick.
  void step();
  // Runs to completion.
  MetricsReport run();

  MetricsReport report() const;
  // GPUs in use per node right now.
  std::vector<int> node_usage() const;

 private:
  std::vector<SchedJobInfo> pollux_jobs(std::vector<int>& index) const;
  void on_allocation_changed(JobState& job);
  void choose_batch(JobState& job);
  void agent_report(JobState& job);
  GoodputModel agent_model(const JobState& job) const;
  double true_t_iter(const JobState& job) const;

  const ProfileLibrary& lib_;
  SimConfig cfg_;
  std::vector<JobState> jobs_;
  std::vector<NodeSpec> nodes_;
  std::vector<int> node_gpus_;
  double now_ = 0.0;
  long round_ = 0;
  WarmStart warm_;
  std::map<std::string, ThroughputParams> oracle_params_;
};

MetricsReport run(const WorkloadSpec& workload, const ProfileLibrary& profiles,
                  const SimConfig& cfg);

// Finish-time fairness: shared JCT over isolated JCT, per job. Jobs missing
// from `isolated_jct` raise ErrorCode::kMissingIsolatedRun.
void finish_time_fairness(MetricsReport& report, const std::map<std::string, double>& isolated_jct);

// Memo of isolated runs keyed by everything that determines their outcome.
// Safe to share between threads.
class IsolatedRunCache {
 public:
  double jct(const WorkloadJob& job, int gpus, const ProfileLibrary& lib, const SimConfig& base);
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, double> cache_;
};

// Size of the equal partition a job would receive: the cluster divided by
// the job's time-averaged number of active jobs, at least one GPU.
int isolated_partition(const JobResult& r, int cluster_gpus);

// Runs (or looks up) each completed job's isolated JCT and fills rho.
void compute_fairness(MetricsReport& report, const WorkloadSpec& workload, const ProfileLibrary& lib,
                      const SimConfig& cfg, IsolatedRunCache& cache);

}  // namespace gsched

namespace gsched {

// One trace-driven experiment: trace -> workload -> simulation -> fairness.
struct Experiment {
  SimConfig sim;
  ConfigMode mode = ConfigMode::kPollux;
  double load_multiplier = 1.0;
  bool fairness = true;
};

// The configuration mode a policy uses unless one is set explicitly: the
// goodput-driven policy manages its own jobs, the baselines run tuned jobs.
ConfigMode default_mode(Policy p);

MetricsReport run_experiment(const std::vector<TraceJob>& trace, const ProfileLibrary& lib,
                             const Experiment& exp, IsolatedRunCache* cache = nullptr);

}  // namespace gsched
