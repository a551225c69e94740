#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsched/error.hpp"
#include "gsched/sched.hpp"

namespace gsched {
namespace {

std::vector<int> free_gpus_of(std::span<const NodeSpec> nodes) {
  std::vector<int> free;
  free.reserve(nodes.size());
  for (const auto& n : nodes) free.push_back(n.capacity(kGpu));
  return free;
}

bool fits(std::span<const int> want, std::span<const int> free) {
  if (want.size() != free.size()) return false;
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i] > free[i]) return false;
  }
  return true;
}

int total_of(std::span<const int> v) { return std::accumulate(v.begin(), v.end(), 0); }

void take(std::span<const int> want, std::vector<int>& free) {
  for (std::size_t i = 0; i < want.size(); ++i) free[i] -= want[i];
}

// Places the admitted jobs: those that can keep their current placement do
// so first, in the given order; the rest are packed onto the remaining space.
// Jobs that no longer fit because of fragmentation stay unallocated.
template <typename Job>
AllocationMatrix place(std::span<const Job> jobs, std::span<const NodeSpec> nodes,
                       const std::vector<int>& order, const std::vector<int>& gpus) {
  AllocationMatrix out(static_cast<int>(jobs.size()), static_cast<int>(nodes.size()));
  auto free = free_gpus_of(nodes);
  std::vector<bool> placed(jobs.size(), false);
  for (int j : order) {
    const auto& cur = jobs[j].current_allocation;
    if (gpus[j] > 0 && total_of(cur) == gpus[j] && fits(cur, free)) {
      std::copy(cur.begin(), cur.end(), out.row(j).begin());
      take(cur, free);
      placed[j] = true;
    }
  }
  for (int j : order) {
    if (placed[j] || gpus[j] <= 0) continue;
    const auto where = pack_gpus(free, gpus[j]);
    if (where.empty()) continue;
    std::copy(where.begin(), where.end(), out.row(j).begin());
    take(where, free);
  }
  return out;
}

}  // namespace

AllocationMatrix tiresias_policy(std::span<const TiresiasJob> jobs,
                                 std::span<const NodeSpec> nodes,
                                 double queue_threshold_gpu_seconds) {
  const int n = static_cast<int>(jobs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto queue = [&](int j) { return jobs[j].attained_gpu_seconds < queue_threshold_gpu_seconds ? 0 : 1; };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (queue(a) != queue(b)) return queue(a) < queue(b);
    return jobs[a].submit_time < jobs[b].submit_time;
  });
  // Admission in priority order; a job that does not fit is skipped so that
  // smaller jobs behind it can still run.
  auto free = free_gpus_of(nodes);
  std::vector<int> gpus(n, 0);
  for (int j : order) {
    const int want = jobs[j].requested_gpus;
    if (want <= 0) continue;
    const auto& cur = jobs[j].current_allocation;
    if (total_of(cur) == want && fits(cur, free)) {
      take(cur, free);
      gpus[j] = want;
      continue;
    }
    const auto where = pack_gpus(free, want);
    if (where.empty()) continue;
    take(where, free);
    gpus[j] = want;
  }
  return place(jobs, nodes, order, gpus);
}

AllocationMatrix optimus_policy(std::span<const OptimusJob> jobs, std::span<const NodeSpec> nodes) {
  const int n = static_cast<int>(jobs.size());
  int capacity = 0, per_node = 0;
  for (const auto& node : nodes) {
    capacity += node.capacity(kGpu);
    per_node = std::max(per_node, node.capacity(kGpu));
  }
  std::vector<int> limit(n);
  for (int j = 0; j < n; ++j) {
    const auto batch = std::max<std::int64_t>(1, jobs[j].batch_size);
    limit[j] = static_cast<int>(std::min<std::int64_t>({jobs[j].max_gpus, batch, capacity}));
  }
  auto remaining_time = [&](int j, int k) {
    if (k <= 0) return std::numeric_limits<double>::infinity();
    const Placement p{k, per_node > 0 ? (k + per_node - 1) / per_node : 1};
    GoodputModel g;
    g.params = jobs[j].params;
    g.max_per_gpu_batch = std::max(1, jobs[j].max_per_gpu_batch);
    g.non_adaptive = true;
    const auto c = fixed_batch_config(g, p, std::max<std::int64_t>(1, jobs[j].batch_size));
    const double thr = static_cast<double>(total_batch_size(p, c)) / t_iter(g.params, p, c);
    return std::max(jobs[j].remaining_examples, 0.0) / thr;
  };

  std::vector<int> gpus(n, 0);
  int left = capacity;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> single(n);
  for (int j = 0; j < n; ++j) single[j] = remaining_time(j, 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return single[a] < single[b]; });
  for (int j : order) {
    if (left == 0) break;
    if (limit[j] >= 1) {
      gpus[j] = 1;
      --left;
    }
  }
  std::vector<double> now(n), next(n);
  for (int j = 0; j < n; ++j) {
    now[j] = gpus[j] > 0 ? single[j] : std::numeric_limits<double>::infinity();
    next[j] = gpus[j] > 0 && gpus[j] < limit[j] ? remaining_time(j, gpus[j] + 1) : now[j];
  }
  while (left > 0) {
    int pick = -1;
    double best_gain = 0.0;
    for (int j = 0; j < n; ++j) {
      if (gpus[j] == 0 || gpus[j] >= limit[j]) continue;
      const double gain = now[j] - next[j];
      if (gain > best_gain) {
        best_gain = gain;
        pick = j;
      }
    }
    if (pick < 0) break;
    ++gpus[pick];
    --left;
    now[pick] = next[pick];
    next[pick] = gpus[pick] < limit[pick] ? remaining_time(pick, gpus[pick] + 1) : now[pick];
  }

  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gpus[a] > gpus[b]; });
  return place(jobs, nodes, order, gpus);
}

}  // namespace gsched
