#include <algorithm>
#include <numeric>
#include <set>

#include "gsched/error.hpp"
#include "gsched/sched.hpp"

namespace gsched {

std::vector<NodeSpec> homogeneous_cluster(int nodes, int gpus_per_node) {
  if (nodes < 1 || gpus_per_node < 0) {
    throw Error(ErrorCode::kInvalidArgument, "cluster needs >= 1 node and >= 0 GPUs per node");
  }
  NodeSpec spec;
  spec.resources = {{kGpu, gpus_per_node}};
  return std::vector<NodeSpec>(nodes, spec);
}

int AllocationMatrix::replicas(int j) const {
  int total = 0;
  for (int v : row(j)) total += v;
  return total;
}

int AllocationMatrix::nodes_used(int j) const {
  int count = 0;
  for (int v : row(j)) count += v > 0 ? 1 : 0;
  return count;
}

bool AllocationMatrix::row_equals(int j, std::span<const int> other) const {
  auto r = row(j);
  if (other.empty()) return std::all_of(r.begin(), r.end(), [](int v) { return v == 0; });
  if (other.size() != r.size()) return false;
  return std::equal(r.begin(), r.end(), other.begin());
}

AllocationMatrix current_matrix(std::span<const SchedJobInfo> jobs, int nodes) {
  AllocationMatrix a(static_cast<int>(jobs.size()), nodes);
  for (int j = 0; j < a.jobs(); ++j) {
    const auto& cur = jobs[j].current_allocation;
    if (cur.empty()) continue;
    if (static_cast<int>(cur.size()) != nodes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "current allocation of job " + jobs[j].id + " has wrong node count");
    }
    std::copy(cur.begin(), cur.end(), a.row(j).begin());
  }
  return a;
}

std::vector<Violation> validate(const AllocationMatrix& a, std::span<const SchedJobInfo> jobs,
                                std::span<const NodeSpec> nodes, const ValidationOptions& opt) {
  std::vector<Violation> out;
  if (a.jobs() != static_cast<int>(jobs.size()) || a.nodes() != static_cast<int>(nodes.size())) {
    out.push_back({-1, -1, "matrix shape does not match jobs x nodes"});
    return out;
  }
  std::set<std::string> rtypes;
  for (const auto& job : jobs) {
    for (const auto& [r, amount] : job.resources_per_replica) {
      if (amount > 0) rtypes.insert(r);
    }
  }
  for (int n = 0; n < a.nodes(); ++n) {
    for (const auto& r : rtypes) {
      long used = 0;
      for (int j = 0; j < a.jobs(); ++j) {
        if (a.at(j, n) < 0) continue;
        auto it = jobs[j].resources_per_replica.find(r);
        if (it != jobs[j].resources_per_replica.end()) used += static_cast<long>(a.at(j, n)) * it->second;
      }
      if (used > nodes[n].capacity(r)) {
        out.push_back({-1, n, r + " over capacity on node " + std::to_string(n)});
      }
    }
    if (opt.interference_avoidance) {
      int distributed = 0;
      for (int j = 0; j < a.jobs(); ++j) {
        if (a.at(j, n) > 0 && a.nodes_used(j) > 1) ++distributed;
      }
      if (distributed > 1) {
        out.push_back({-1, n, "more than one distributed job on node " + std::to_string(n)});
      }
    }
  }
  for (int j = 0; j < a.jobs(); ++j) {
    for (int n = 0; n < a.nodes(); ++n) {
      if (a.at(j, n) < 0) out.push_back({j, n, "negative replica count"});
    }
    const int k = a.replicas(j);
    if (k > 0 && k < jobs[j].min_replicas) out.push_back({j, -1, "below min_replicas"});
    if (k > jobs[j].max_replicas) out.push_back({j, -1, "above max_replicas"});
    if (a.nodes_used(j) > opt.max_nodes_per_job) out.push_back({j, -1, "too many nodes"});
  }
  return out;
}

void check_feasible(const AllocationMatrix& a, std::span<const SchedJobInfo> jobs,
                    std::span<const NodeSpec> nodes, const ValidationOptions& opt) {
  const auto v = validate(a, jobs, nodes, opt);
  if (v.empty()) return;
  std::string msg = "infeasible allocation: " + v.front().what;
  if (v.front().job >= 0) msg += " (job " + jobs[v.front().job].id + ")";
  throw Error(ErrorCode::kInfeasibleAllocation, msg);
}

std::vector<int> pack_gpus(std::span<const int> free_gpus, int gpus) {
  const int n = static_cast<int>(free_gpus.size());
  std::vector<int> out(n, 0);
  if (gpus <= 0) return out;
  const long total = std::accumulate(free_gpus.begin(), free_gpus.end(), 0L);
  if (total < gpus) return {};
  // Best fit on one node: the node with the least free capacity that still
  // holds every GPU, lowest index on ties.
  int best = -1;
  for (int i = 0; i < n; ++i) {
    if (free_gpus[i] >= gpus && (best < 0 || free_gpus[i] < free_gpus[best])) best = i;
  }
  if (best >= 0) {
    out[best] = gpus;
    return out;
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return free_gpus[x] > free_gpus[y]; });
  int left = gpus;
  for (int i : order) {
    if (left == 0) break;
    const int take = std::min(left, free_gpus[i]);
    out[i] = take;
    left -= take;
  }
  return out;
}

}  // namespace gsched
