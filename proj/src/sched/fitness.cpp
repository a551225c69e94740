#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gsched/error.hpp"
#include "gsched/kernels.hpp"
#include "gsched/sched.hpp"

namespace gsched {
namespace {

constexpr double kSpeedupOffset = 1e-3;

std::vector<std::string> collect_resource_types(std::span<const SchedJobInfo> jobs) {
  std::set<std::string> s;
  for (const auto& job : jobs) {
    for (const auto& [r, amount] : job.resources_per_replica) {
      if (amount > 0) s.insert(r);
    }
  }
  return {s.begin(), s.end()};
}

double optimized_goodput(const GoodputModel& model, Placement p) {
  if (p.gpus < 1) return 0.0;
  try {
    return optimize_batch_config(model, p).value;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInfeasibleBatch) return 0.0;
    throw;
  }
}

}  // namespace

std::vector<FairShare> fair_share(std::span<const SchedJobInfo> jobs,
                                  std::span<const NodeSpec> nodes) {
  if (nodes.empty()) throw Error(ErrorCode::kInvalidArgument, "fair share needs >= 1 node");
  const auto rtypes = collect_resource_types(jobs);
  std::vector<long> totals;
  for (const auto& r : rtypes) {
    long t = 0;
    for (const auto& n : nodes) t += n.capacity(r);
    totals.push_back(t);
  }
  const double num_jobs = static_cast<double>(jobs.size());
  const double num_nodes = static_cast<double>(nodes.size());
  std::vector<FairShare> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) {
    FairShare f;
    for (std::size_t r = 0; r < rtypes.size(); ++r) {
      auto it = job.resources_per_replica.find(rtypes[r]);
      const int demand = it == job.resources_per_replica.end() ? 0 : it->second;
      if (demand <= 0) continue;
      if (totals[r] <= 0) {
        throw Error(ErrorCode::kUnknownResource,
                    "job " + job.id + " demands resource '" + rtypes[r] + "' absent from the cluster");
      }
      f.dominant_share = std::max(f.dominant_share, static_cast<double>(demand) / totals[r]);
    }
    if (f.dominant_share <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "job " + job.id + " demands no resources");
    }
    f.replicas = static_cast<int>(std::ceil(1.0 / f.dominant_share / num_jobs - 1e-9));
    f.replicas = std::max(f.replicas, 1);
    f.nodes = std::max(1, static_cast<int>(std::ceil(num_nodes * f.dominant_share - 1e-9)));
    for (int k = f.replicas; k >= 1 && f.goodput <= 0.0; --k) {
      f.goodput = optimized_goodput(job.model, {k, std::min(f.nodes, k)});
    }
    out.push_back(f);
  }
  return out;
}

double speedup(const SchedJobInfo& job, const AllocationVector& a, const FairShare& fair) {
  if (a.empty() || fair.goodput <= 0.0) return 0.0;
  return optimized_goodput(job.model, Placement::of(a)) / fair.goodput;
}

double realloc_factor(const SchedJobInfo& job, double delay) {
  if (delay < 0.0) throw Error(ErrorCode::kInvalidArgument, "realloc delay must be >= 0");
  const double denom = job.age + delay;
  if (denom <= 0.0) return 1.0;
  return std::max(job.age - job.num_restarts * delay, 0.0) / denom;
}

double power_mean_fitness(std::span<const double> speedups, double p) {
  if (speedups.empty()) return 0.0;
  const double n = static_cast<double>(speedups.size());
  if (p == 0.0) {
    double acc = 0.0;
    for (double s : speedups) acc += std::log(std::max(s, kSpeedupOffset));
    return std::exp(acc / n);
  }
  return std::pow(kernels::power_sum(speedups, kSpeedupOffset, p) / n, 1.0 / p);
}

FitnessEvaluator::FitnessEvaluator(std::span<const SchedJobInfo> jobs,
                                   std::span<const NodeSpec> nodes, const FitnessConfig& cfg)
    : jobs_(jobs.begin(), jobs.end()), nodes_(nodes.begin(), nodes.end()), cfg_(cfg) {
  fair_ = fair_share(jobs, nodes);
  rtypes_ = collect_resource_types(jobs);
  const std::size_t nr = rtypes_.size();
  job_res_.assign(jobs_.size() * nr, 0);
  node_res_.assign(nodes_.size() * nr, 0);
  for (std::size_t j = 0; j < jobs_.size(); ++j) {
    for (std::size_t r = 0; r < nr; ++r) {
      auto it = jobs_[j].resources_per_replica.find(rtypes_[r]);
      job_res_[j * nr + r] = it == jobs_[j].resources_per_replica.end() ? 0 : it->second;
    }
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    for (std::size_t r = 0; r < nr; ++r) node_res_[n * nr + r] = nodes_[n].capacity(rtypes_[r]);
  }
  max_on_node_.assign(jobs_.size() * nodes_.size(), 0);
  memo_.resize(jobs_.size());
  for (std::size_t j = 0; j < jobs_.size(); ++j) {
    int total = 0;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      int best = std::numeric_limits<int>::max();
      for (std::size_t r = 0; r < nr; ++r) {
        const int demand = job_res_[j * nr + r];
        if (demand > 0) best = std::min(best, node_res_[n * nr + r] / demand);
      }
      if (best == std::numeric_limits<int>::max()) best = 0;
      max_on_node_[j * nodes_.size() + n] = best;
      total += best;
    }
    memo_[j].assign(2 * (static_cast<std::size_t>(total) + 1),
                    std::numeric_limits<double>::quiet_NaN());
    factor_.push_back(realloc_factor(jobs_[j], cfg_.realloc_delay));
  }
  base_ = current_matrix(jobs, static_cast<int>(nodes_.size()));
}

double FitnessEvaluator::speedup(int j, Placement p) const {
  if (p.gpus < 1) return 0.0;
  const std::size_t idx = 2 * static_cast<std::size_t>(p.gpus) + (p.nodes > 1 ? 1 : 0);
  auto& memo = memo_[j];
  if (idx < memo.size() && !std::isnan(memo[idx])) return memo[idx];
  const double fair = fair_[j].goodput;
  const double v = fair > 0.0 ? optimized_goodput(jobs_[j].model, p) / fair : 0.0;
  if (idx < memo.size()) memo[idx] = v;
  return v;
}

void FitnessEvaluator::penalized_speedups(const AllocationMatrix& a,
                                          std::vector<double>& out) const {
  out.resize(jobs_.size());
  for (int j = 0; j < a.jobs(); ++j) {
    double s = speedup(j, a.placement(j));
    const auto cur = base_.row(j);
    const bool running = std::any_of(cur.begin(), cur.end(), [](int g) { return g > 0; });
    if (running && !std::equal(a.row(j).begin(), a.row(j).end(), cur.begin())) s *= factor_[j];
    out[j] = s;
  }
}

double FitnessEvaluator::fitness(const AllocationMatrix& a) const {
  penalized_speedups(a, scratch_);
  return power_mean_fitness(scratch_, cfg_.p);
}

double FitnessEvaluator::utility(const AllocationMatrix& a) const {
  const std::size_t nr = rtypes_.size();
  double best = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    double total = 0.0;
    for (int n = 0; n < a.nodes(); ++n) {
      bool active = false;
      for (int j = 0; j < a.jobs() && !active; ++j) active = a.at(j, n) > 0;
      if (active) total += node_res_[n * nr + r];
    }
    if (total <= 0.0) continue;
    double acc = 0.0;
    for (int j = 0; j < a.jobs(); ++j) {
      const int k = a.replicas(j);
      if (k == 0) continue;
      const double alloc = static_cast<double>(k) * job_res_[j * nr + r];
      if (alloc == 0.0) continue;
      const double util = speedup(j, a.placement(j)) * fair_[j].replicas / k;
      acc += util * alloc / total;
    }
    best = std::max(best, acc);
  }
  return best;
}

double fitness(std::span<const SchedJobInfo> jobs, std::span<const NodeSpec> nodes,
               const AllocationMatrix& a, const FitnessConfig& cfg) {
  return FitnessEvaluator(jobs, nodes, cfg).fitness(a);
}

double cluster_utility(std::span<const SchedJobInfo> jobs, std::span<const NodeSpec> nodes,
                       const AllocationMatrix& a) {
  return FitnessEvaluator(jobs, nodes, FitnessConfig{}).utility(a);
}

}  // namespace gsched
