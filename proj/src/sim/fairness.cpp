#include <cmath>
#include <numeric>
#include <sstream>

#include "gsched/error.hpp"
#include "gsched/simulator.hpp"

namespace gsched {

void finish_time_fairness(MetricsReport& report, const std::map<std::string, double>& isolated_jct) {
  for (auto& j : report.jobs) {
    if (std::isnan(j.jct_s)) continue;
    auto it = isolated_jct.find(j.id);
    if (it == isolated_jct.end()) {
      throw Error(ErrorCode::kMissingIsolatedRun, "no isolated run for job " + j.id);
    }
    if (!(it->second > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "isolated JCT of job " + j.id + " must be > 0");
    }
    j.rho = j.jct_s / it->second;
  }
}

int isolated_partition(const JobResult& r, int cluster_gpus) {
  const double contention = std::max(1.0, r.mean_active_jobs);
  return std::max(1, static_cast<int>(std::lround(cluster_gpus / contention)));
}

double IsolatedRunCache::jct(const WorkloadJob& job, int gpus, const ProfileLibrary& lib,
                             const SimConfig& base) {
  const int per_node = base.node_gpus.empty() ? base.gpus_per_node : base.node_gpus.front();
  std::ostringstream key;
  key << job.model << '|' << to_string(job.mode) << '|' << job.gpus << '|' << job.batch << '|'
      << gpus << '|' << per_node << '|' << to_string(base.policy) << '|' << base.p << '|'
      << base.sched_interval << '|' << base.report_interval << '|' << base.realloc_delay << '|'
      << base.tiresias_threshold << '|' << base.search.population << '|' << base.search.generations
      << '|' << base.search.patience;
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key.str());
    if (it != cache_.end()) return it->second;
  }

  SimConfig cfg = base;
  cfg.seed = 0;
  cfg.interference_slowdown = 0.0;
  cfg.node_gpus.clear();
  for (int left = gpus; left > 0; left -= per_node) cfg.node_gpus.push_back(std::min(left, per_node));
  WorkloadSpec spec;
  WorkloadJob alone = job;
  alone.id = "isolated";
  alone.submit_s = 0.0;
  if (alone.mode != ConfigMode::kPollux) alone.gpus = std::min(alone.gpus, gpus);
  spec.jobs.push_back(alone);
  const auto report = run(spec, lib, cfg);
  const double v = report.jobs.front().jct_s;
  std::lock_guard lock(mu_);
  cache_.emplace(key.str(), v);
  return v;
}

void compute_fairness(MetricsReport& report, const WorkloadSpec& workload, const ProfileLibrary& lib,
                      const SimConfig& cfg, IsolatedRunCache& cache) {
  int cluster = 0;
  if (cfg.node_gpus.empty()) {
    cluster = cfg.nodes * cfg.gpus_per_node;
  } else {
    cluster = std::accumulate(cfg.node_gpus.begin(), cfg.node_gpus.end(), 0);
  }
  std::map<std::string, const WorkloadJob*> by_id;
  for (const auto& j : workload.jobs) by_id[j.id] = &j;
  std::map<std::string, double> isolated;
  for (const auto& r : report.jobs) {
    if (std::isnan(r.jct_s)) continue;
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error(ErrorCode::kMissingIsolatedRun, "job " + r.id + " not in workload");
    isolated[r.id] = cache.jct(*it->second, isolated_partition(r, cluster), lib, cfg);
  }
  finish_time_fairness(report, isolated);
}

}  // namespace gsched
