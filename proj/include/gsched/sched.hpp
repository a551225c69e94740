#pragma once

// Cluster-wide allocation: fairness-weighted fitness over per-job speedups,
// the genetic search that maximizes it, and two fixed-rule baselines.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsched/goodput.hpp"

namespace gsched {

using ResourceMap = std::map<std::string, int>;

inline const std::string kGpu = "gpu";

struct NodeSpec {
  ResourceMap resources{{kGpu, 4}};
  int capacity(const std::string& r) const {
    auto it = resources.find(r);
    return it == resources.end() ? 0 : it->second;
  }
};

std::vector<NodeSpec> homogeneous_cluster(int nodes, int gpus_per_node);

struct SchedJobInfo {
  std::string id;
  GoodputModel model;
  ResourceMap resources_per_replica{{kGpu, 1}};
  double age = 0.0;  // seconds, T_j
  int num_restarts = 0;
  int min_replicas = 0;
  int max_replicas = std::numeric_limits<int>::max();
  bool pinned = false;
  // Empty (size 0) means no current allocation.
  std::vector<int> current_allocation;
};

// Jobs x nodes matrix of replica counts, stored row-major.
class AllocationMatrix {
 public:
  AllocationMatrix() = default;
  AllocationMatrix(int jobs, int nodes) : jobs_(jobs), nodes_(nodes), cells_(jobs * nodes, 0) {}

  int jobs() const { return jobs_; }
  int nodes() const { return nodes_; }
  int& at(int j, int n) { return cells_[j * nodes_ + n]; }
  int at(int j, int n) const { return cells_[j * nodes_ + n]; }
  std::span<int> row(int j) { return {cells_.data() + j * nodes_, static_cast<std::size_t>(nodes_)}; }
  std::span<const int> row(int j) const {
    return {cells_.data() + j * nodes_, static_cast<std::size_t>(nodes_)};
  }
  AllocationVector row_vector(int j) const {
    auto r = row(j);
    return AllocationVector(std::vector<int>(r.begin(), r.end()));
  }
  int replicas(int j) const;
  int nodes_used(int j) const;
  Placement placement(int j) const { return {replicas(j), nodes_used(j)}; }
  bool row_equals(int j, std::span<const int> other) const;

  const std::vector<int>& cells() const { return cells_; }
  friend bool operator==(const AllocationMatrix&, const AllocationMatrix&) = default;

 private:
  int jobs_ = 0;
  int nodes_ = 0;
  std::vector<int> cells_;
};

// Matrix whose rows are the jobs' current allocations (zero where absent).
AllocationMatrix current_matrix(std::span<const SchedJobInfo> jobs, int nodes);

struct FitnessConfig {
  double p = -1.0;
  double realloc_delay = 30.0;
  bool interference_avoidance = true;
  int max_nodes_per_job = 16;
};

struct FairShare {
  double dominant_share = 0.0;
  int replicas = 0;
  int nodes = 0;
  double goodput = 0.0;
};

// Dominant-resource fair share of every job, and the optimized goodput of
// the corresponding (replicas, nodes) shape. When that shape cannot reach
// M_0 the largest feasible replica count below it is used.
std::vector<FairShare> fair_share(std::span<const SchedJobInfo> jobs,
                                  std::span<const NodeSpec> nodes);

double speedup(const SchedJobInfo& job, const AllocationVector& a, const FairShare& fair);
double realloc_factor(const SchedJobInfo& job, double delay);

// Power mean of (speedup + 1e-3) across jobs; geometric mean of
// max(speedup, 1e-3) when p == 0. Rows of running jobs that differ from the
// current allocation have their speedup scaled by realloc_factor first; a
// job's first placement is not penalized.
double power_mean_fitness(std::span<const double> speedups, double p);

struct Violation {
  int job = -1;   // -1 when the violation concerns a node
  int node = -1;  // -1 when the violation concerns a job
  std::string what;
};

struct ValidationOptions {
  bool interference_avoidance = true;
  int max_nodes_per_job = 16;
};

std::vector<Violation> validate(const AllocationMatrix& a, std::span<const SchedJobInfo> jobs,
                                std::span<const NodeSpec> nodes, const ValidationOptions& opt);
// Throws ErrorCode::kInfeasibleAllocation listing the first violation.
void check_feasible(const AllocationMatrix& a, std::span<const SchedJobInfo> jobs,
                    std::span<const NodeSpec> nodes, const ValidationOptions& opt);

// Evaluates speedups, fitness and cluster utility for many candidate
// matrices of one scheduling round. Speedups are memoized per job by
// (replicas, single-node vs multi-node), the only shape features the
// goodput model depends on.
class FitnessEvaluator {
 public:
  FitnessEvaluator(std::span<const SchedJobInfo> jobs, std::span<const NodeSpec> nodes,
                   const FitnessConfig& cfg);

  int num_jobs() const { return static_cast<int>(jobs_.size()); }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::vector<FairShare>& fair_shares() const { return fair_; }
  const std::vector<std::string>& resource_types() const { return rtypes_; }
  const SchedJobInfo& job(int j) const { return jobs_[j]; }
  const AllocationMatrix& base() const { return base_; }
  const FitnessConfig& config() const { return cfg_; }

  double speedup(int j, Placement p) const;
  // Speedups including the reallocation penalty on changed rows.
  void penalized_speedups(const AllocationMatrix& a, std::vector<double>& out) const;
  double fitness(const AllocationMatrix& a) const;
  double utility(const AllocationMatrix& a) const;

  // resources of job j per replica / node n, indexed by resource_types().
  int job_resource(int j, int r) const { return job_res_[j * rtypes_.size() + r]; }
  int node_resource(int n, int r) const { return node_res_[n * rtypes_.size() + r]; }
  // Largest replica count of job j that fits on an empty node n.
  int max_replicas_on(int j, int n) const { return max_on_node_[j * nodes_.size() + n]; }

 private:
  std::vector<SchedJobInfo> jobs_;
  std::vector<NodeSpec> nodes_;
  FitnessConfig cfg_;
  std::vector<FairShare> fair_;
  std::vector<std::string> rtypes_;
  std::vector<int> job_res_, node_res_, max_on_node_;
  std::vector<double> factor_;
  AllocationMatrix base_;
  mutable std::vector<std::vector<double>> memo_;
  mutable std::vector<double> scratch_;
};

double fitness(std::span<const SchedJobInfo> jobs, std::span<const NodeSpec> nodes,
               const AllocationMatrix& a, const FitnessConfig& cfg);
double cluster_utility(std::span<const SchedJobInfo> jobs, std::span<const NodeSpec> nodes,
                       const AllocationMatrix& a);

struct SearchOptions {
  int population = 100;
  int generations = 50;
  // Stop early after this many generations without a fitness improvement
  // (0 disables).
  int patience = 0;
};

struct SearchResult {
  AllocationMatrix best;
  double fitness = 0.0;
  double utility = 0.0;
  // Final population, keyed by job id, for warm-starting the next round.
  std::vector<std::map<std::string, std::vector<int>>> population;
  // Non-dominated (fitness, utility) pairs of the final population.
  std::vector<std::pair<double, double>> front;
  int generations_run = 0;
};

using WarmStart = std::vector<std::map<std::string, std::vector<int>>>;

SearchResult search_allocations(std::span<const SchedJobInfo> jobs,
                                std::span<const NodeSpec> nodes, const FitnessConfig& cfg,
                                std::uint64_t seed, const SearchOptions& options = {},
                                const WarmStart* warm = nullptr);

// Inputs of the fixed-GPU-count baseline.
struct TiresiasJob {
  std::string id;
  int requested_gpus = 1;
  double attained_gpu_seconds = 0.0;
  double submit_time = 0.0;
  std::vector<int> current_allocation;
};

inline constexpr double kDefaultTiresiasThreshold = 8.0 * 3600.0;  // GPU-seconds

AllocationMatrix tiresias_policy(std::span<const TiresiasJob> jobs,
                                 std::span<const NodeSpec> nodes,
                                 double queue_threshold_gpu_seconds = kDefaultTiresiasThreshold);

// Inputs of the greedy throughput baseline. Batch size is fixed by the user.
struct OptimusJob {
  std::string id;
  ThroughputParams params;
  int max_per_gpu_batch = 1;
  std::int64_t batch_size = 1;
  double remaining_examples = 0.0;  // work left, in examples
  int max_gpus = std::numeric_limits<int>::max();
  std::vector<int> current_allocation;
};

AllocationMatrix optimus_policy(std::span<const OptimusJob> jobs, std::span<const NodeSpec> nodes);

// Places `gpus` GPUs on as few nodes as possible given per-node free
// capacity: best-fit on a single node, else most-free nodes first. Returns
// an empty vector when the free total is insufficient.
std::vector<int> pack_gpus(std::span<const int> free_gpus, int gpus);

}  // namespace gsched
