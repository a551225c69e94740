#include "gsched/autoscale.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "gsched/error.hpp"
#include "gsched/fitting.hpp"

namespace gsched {

double per_gpu_value(const GoodputModel& model, int nodes, const AutoscalePolicy& policy) {
  const Objective obj = policy.mode == ScaleMode::kGoodput ? Objective::kGoodput : Objective::kThroughput;
  const int gpus = nodes * policy.gpus_per_node;
  try {
    return optimize_batch_config(model, Placement{gpus, nodes}, obj).value / gpus;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInfeasibleBatch) return 0.0;
    throw;
  }
}

int decide_scale(const GoodputModel& model, int current_nodes, const AutoscalePolicy& policy) {
  if (current_nodes < 1) throw Error(ErrorCode::kInvalidArgument, "current node count must be >= 1");
  if (!(policy.lower > 0.0 && policy.lower <= policy.upper && policy.upper <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "autoscale thresholds need 0 < L <= U <= 1");
  }
  if (current_nodes >= policy.max_nodes) return current_nodes;
  const Objective obj = policy.mode == ScaleMode::kGoodput ? Objective::kGoodput : Objective::kThroughput;
  const double ideal = optimize_batch_config(model, Placement{1, 1}, obj).value;
  if (!(per_gpu_value(model, current_nodes, policy) > policy.upper * ideal)) return current_nodes;
  for (int n = current_nodes + 1; n <= policy.max_nodes; ++n) {
    if (per_gpu_value(model, n, policy) <= policy.lower * ideal) return n;
  }
  return policy.max_nodes;
}

Cost cost(const std::vector<std::pair<double, int>>& segments, double end, double price) {
  Cost c;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double start = segments[i].first;
    const double stop = i + 1 < segments.size() ? segments[i + 1].first : end;
    if (stop < start) throw Error(ErrorCode::kInvalidArgument, "cost segments must be time-sorted");
    c.node_hours += segments[i].second * (stop - start) / 3600.0;
  }
  c.currency = c.node_hours * price;
  return c;
}

AutoscaleRun simulate_autoscale(const ProfileLibrary& lib, const std::string& model,
                                const AutoscalePolicy& policy, const AutoscaleSimOptions& opt) {
  const auto& p = lib.at(model);
  const auto pts = profile_fit_points(p);
  ExplorationState all;
  all.observe(Placement{3, 1});
  all.observe(Placement{3, 2});
  const ThroughputParams params = fit_throughput(pts, all).params;

  const Objective obj = policy.mode == ScaleMode::kGoodput ? Objective::kGoodput : Objective::kThroughput;
  const long ticks_per_interval = std::lround(opt.interval / opt.tick);
  AutoscaleRun out;
  int nodes = std::max(1, opt.initial_nodes);
  double progress = 0.0, delay = 0.0, node_seconds = 0.0, now = 0.0;
  BatchConfig batch;
  double t_iter_now = 0.0;
  long tick = 0;
  while (true) {
    if (tick % ticks_per_interval == 0) {
      GoodputModel g;
      g.params = params;
      g.init_batch = p.m0;
      g.max_batch = p.max_batch;
      g.max_per_gpu_batch = p.max_per_gpu_batch;
      const Placement current{nodes * policy.gpus_per_node, nodes};
      const std::int64_t m_now = tick == 0 ? p.m0 : total_batch_size(current, batch);
      g.pgns = lib.interpolate_pgns(model, progress, m_now);
      const int target = decide_scale(g, nodes, policy);
      if (target > nodes) {
        nodes = target;
        delay = opt.realloc_delay;
      }
      const Placement place{nodes * policy.gpus_per_node, nodes};
      batch = optimize_batch_config(g, place, obj).config;
      t_iter_now = lib.interpolate_throughput(model, place, batch);
      const auto m = total_batch_size(place, batch);
      const double phi = lib.interpolate_pgns(model, progress, m);
      out.samples.push_back({now, nodes, phi, (phi + p.m0) / (phi + m),
                             node_seconds / 3600.0 * policy.price_per_node_hour});
    }
    node_seconds += nodes * opt.tick;
    if (delay > 0.0) {
      delay = std::max(0.0, delay - opt.tick);
    } else {
      const Placement place{nodes * policy.gpus_per_node, nodes};
      const auto m = total_batch_size(place, batch);
      const double phi = lib.interpolate_pgns(model, progress, m);
      const double eff = (phi + p.m0) / (phi + static_cast<double>(m));
      const double delta = opt.tick / t_iter_now * eff * static_cast<double>(m) / p.dataset_size;
      if (progress + delta >= p.target_epochs) {
        const double frac = (p.target_epochs - progress) / delta;
        node_seconds -= nodes * opt.tick * (1.0 - frac);
        out.completion_s = now + frac * opt.tick;
        break;
      }
      progress += delta;
    }
    now += opt.tick;
    ++tick;
    if (now > opt.max_sim_seconds) {
      throw Error(ErrorCode::kNonTerminating, "autoscale run exceeded its simulated time budget");
    }
  }
  out.node_hours = node_seconds / 3600.0;
  out.cost = out.node_hours * policy.price_per_node_hour;
  out.samples.push_back({out.completion_s, nodes, out.samples.back().phi, out.samples.back().efficiency,
                         out.cost});
  return out;
}

std::string autoscale_csv(const AutoscaleRun& run) {
  auto num = [](double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string out = "t,nodes,phi,efficiency,cumulative_cost\n";
  for (const auto& s : run.samples) {
    out += num(s.t) + "," + std::to_string(s.nodes) + "," + num(s.phi) + "," + num(s.efficiency) +
           "," + num(s.cumulative_cost) + "\n";
  }
  return out;
}

}  // namespace gsched
