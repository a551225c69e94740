#include "gsched/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gsched/error.hpp"

namespace gsched {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kPollux: return "pollux";
    case Policy::kTiresias: return "tiresias";
    case Policy::kOptimus: return "optimus";
  }
  return "pollux";
}

Policy policy_from_string(std::string_view s) {
  if (s == "pollux") return Policy::kPollux;
  if (s == "tiresias") return Policy::kTiresias;
  if (s == "optimus") return Policy::kOptimus;
  throw Error(ErrorCode::kInvalidArgument, "unknown policy '" + std::string(s) + "'");
}

std::int64_t JobState::total_batch() const {
  return static_cast<std::int64_t>(gpus()) * batch.per_gpu_batch * (batch.accum_steps + 1);
}

int JobState::gpus() const { return std::accumulate(allocation.begin(), allocation.end(), 0); }

ThroughputParams prior_params() {
  ThroughputParams p;
  p.alpha_grad = 0.0;
  p.beta_grad = 1.0;
  p.gamma = 1.0;
  return p;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool same_row(const std::vector<int>& a, const std::vector<int>& b) {
  auto zero = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int x) { return x == 0; });
  };
  if (a.empty() || b.empty()) return zero(a) && zero(b);
  return a == b;
}

bool is_multiple(double interval, double tick) {
  const double r = interval / tick;
  return interval > 0.0 && std::abs(r - std::round(r)) < 1e-9;
}

}  // namespace

Simulator::Simulator(const WorkloadSpec& workload, const ProfileLibrary& profiles, SimConfig cfg)
    : lib_(profiles), cfg_(std::move(cfg)) {
  if (!(cfg_.tick > 0.0) || !is_multiple(cfg_.sched_interval, cfg_.tick) ||
      !is_multiple(cfg_.report_interval, cfg_.tick) || cfg_.realloc_delay < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "intervals must be positive multiples of the tick");
  }
  if (!(cfg_.interference_slowdown >= 0.0 && cfg_.interference_slowdown < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "interference slowdown must be in [0, 1)");
  }
  node_gpus_ = cfg_.node_gpus;
  if (node_gpus_.empty()) node_gpus_.assign(cfg_.nodes, cfg_.gpus_per_node);
  if (node_gpus_.empty()) throw Error(ErrorCode::kInvalidArgument, "cluster has no nodes");
  for (int g : node_gpus_) {
    NodeSpec n;
    n.resources = {{kGpu, g}};
    nodes_.push_back(n);
  }
  const bool fixed = cfg_.policy != Policy::kPollux;
  for (const auto& w : workload.jobs) {
    JobState j;
    j.spec = w;
    j.profile = &lib_.at(w.model);
    if (fixed && (w.gpus < 1 || w.batch < j.profile->m0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "job " + w.id + ": baseline policies need a fixed GPU count and batch >= M_0");
    }
    jobs_.push_back(std::move(j));
  }
  if (cfg_.policy == Policy::kOptimus) {
    for (const auto& j : jobs_) {
      if (oracle_params_.count(j.spec.model)) continue;
      const auto pts = profile_fit_points(*j.profile);
      ExplorationState all;
      all.observe(Placement{3, 1});
      all.observe(Placement{3, 2});
      oracle_params_[j.spec.model] = fit_throughput(pts, all, std::nullopt, cfg_.fit).params;
    }
  }
}

bool Simulator::done() const {
  return std::all_of(jobs_.begin(), jobs_.end(), [](const JobState& j) { return j.completed; });
}

void Simulator::admit() {
  for (auto& j : jobs_) {
    if (j.submitted || j.spec.submit_s > now_) continue;
    j.submitted = true;
    j.next_report_s = now_ + cfg_.report_interval;
    j.reported_phi = lib_.interpolate_pgns(j.spec.model, 0.0, j.profile->m0);
  }
}

GoodputModel Simulator::agent_model(const JobState& job) const {
  GoodputModel g;
  g.params = job.fitted.value_or(prior_params());
  g.pgns = job.reported_phi;
  g.init_batch = job.profile->m0;
  g.max_batch = job.profile->max_batch;
  g.max_per_gpu_batch = job.profile->max_per_gpu_batch;
  return g;
}

double Simulator::true_t_iter(const JobState& job) const {
  const Placement p{job.gpus(), static_cast<int>(std::count_if(
                                    job.allocation.begin(), job.allocation.end(),
                                    [](int v) { return v > 0; }))};
  return lib_.interpolate_throughput(job.spec.model, p, job.batch);
}

void Simulator::choose_batch(JobState& job) {
  if (job.gpus() == 0) return;
  const auto placement = Placement::of(AllocationVector(job.allocation));
  if (cfg_.policy == Policy::kPollux) {
    try {
      job.batch = optimize_batch_config(agent_model(job), placement).config;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasibleBatch) throw;
      GoodputModel g = agent_model(job);
      job.batch = fixed_batch_config(g, placement, job.profile->m0);
    }
  } else {
    GoodputModel g;
    g.max_per_gpu_batch = job.profile->max_per_gpu_batch;
    job.batch = fixed_batch_config(g, placement, job.spec.batch);
  }
  job.base_t_iter = true_t_iter(job);
}

void Simulator::on_allocation_changed(JobState& job) {
  if (job.gpus() > 0) job.explore.observe(AllocationVector(job.allocation));
  choose_batch(job);
}

void Simulator::agent_report(JobState& job) {
  job.reported_phi = lib_.interpolate_pgns(job.spec.model, job.progress, job.total_batch());
  choose_batch(job);
}

std::vector<SchedJobInfo> Simulator::pollux_jobs(std::vector<int>& index) const {
  std::vector<SchedJobInfo> out;
  index.clear();
  for (int i = 0; i < static_cast<int>(jobs_.size()); ++i) {
    const auto& j = jobs_[i];
    if (!j.submitted || j.completed) continue;
    SchedJobInfo info;
    info.id = j.spec.id;
    info.model = agent_model(j);
    info.age = now_ - j.spec.submit_s;
    info.num_restarts = j.restarts;
    info.max_replicas = allocation_cap(j.explore);
    info.current_allocation = j.allocation;
    out.push_back(std::move(info));
    index.push_back(i);
  }
  return out;
}

void Simulator::schedule() {
  std::map<std::string, std::vector<int>> rows;
  const int total_gpus = std::accumulate(node_gpus_.begin(), node_gpus_.end(), 0);
  std::vector<int> index;
  for (int i = 0; i < static_cast<int>(jobs_.size()); ++i) {
    if (jobs_[i].submitted && !jobs_[i].completed) index.push_back(i);
  }
  if (index.empty()) return;
  ++round_;
  switch (cfg_.policy) {
    case Policy::kPollux: {
      const auto infos = pollux_jobs(index);
      FitnessConfig fc;
      fc.p = cfg_.p;
      fc.realloc_delay = cfg_.realloc_delay;
      fc.interference_avoidance = cfg_.interference_avoidance;
      const auto result = search_allocations(infos, nodes_, fc, mix(cfg_.seed ^ mix(round_)),
                                             cfg_.search, &warm_);
      warm_ = result.population;
      for (int k = 0; k < result.best.jobs(); ++k) {
        auto r = result.best.row(k);
        rows[infos[k].id] = std::vector<int>(r.begin(), r.end());
      }
      break;
    }
    case Policy::kTiresias: {
      std::vector<TiresiasJob> tj;
      for (int i : index) {
        const auto& j = jobs_[i];
        tj.push_back({j.spec.id, std::min(j.spec.gpus, total_gpus), j.attained_gpu_seconds,
                      j.spec.submit_s, j.allocation});
      }
      const auto a = tiresias_policy(tj, nodes_, cfg_.tiresias_threshold);
      for (int k = 0; k < a.jobs(); ++k) {
        auto r = a.row(k);
        rows[tj[k].id] = std::vector<int>(r.begin(), r.end());
      }
      break;
    }
    case Policy::kOptimus: {
      std::vector<OptimusJob> oj;
      for (int i : index) {
        const auto& j = jobs_[i];
        OptimusJob o;
        o.id = j.spec.id;
        o.params = oracle_params_.at(j.spec.model);
        o.max_per_gpu_batch = j.profile->max_per_gpu_batch;
        o.batch_size = j.spec.batch;
        o.remaining_examples = std::max(0.0, j.profile->target_epochs - j.progress) * j.profile->dataset_size;
        o.max_gpus = total_gpus;
        o.current_allocation = j.allocation;
        oj.push_back(std::move(o));
      }
      const auto a = optimus_policy(oj, nodes_);
      for (int k = 0; k < a.jobs(); ++k) {
        auto r = a.row(k);
        rows[oj[k].id] = std::vector<int>(r.begin(), r.end());
      }
      break;
    }
  }
  apply_allocations(rows);
}

void Simulator::apply_allocations(const std::map<std::string, std::vector<int>>& rows) {
  std::vector<int> active;
  for (int i = 0; i < static_cast<int>(jobs_.size()); ++i) {
    if (jobs_[i].submitted && !jobs_[i].completed) active.push_back(i);
  }
  const int nodes = static_cast<int>(nodes_.size());
  AllocationMatrix a(static_cast<int>(active.size()), nodes);
  std::vector<SchedJobInfo> infos(active.size());
  std::size_t matched = 0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto& j = jobs_[active[k]];
    infos[k].id = j.spec.id;
    auto it = rows.find(j.spec.id);
    if (it == rows.end()) continue;
    ++matched;
    if (static_cast<int>(it->second.size()) != nodes) {
      throw Error(ErrorCode::kInfeasibleAllocation, "row for " + j.spec.id + " has wrong length");
    }
    std::copy(it->second.begin(), it->second.end(), a.row(static_cast<int>(k)).begin());
  }
  if (matched != rows.size()) {
    throw Error(ErrorCode::kInfeasibleAllocation, "allocation names a job that is not active");
  }
  ValidationOptions vo;
  vo.interference_avoidance = cfg_.policy == Policy::kPollux && cfg_.interference_avoidance;
  vo.max_nodes_per_job = cfg_.policy == Policy::kPollux ? FitnessConfig{}.max_nodes_per_job : nodes;
  check_feasible(a, infos, nodes_, vo);

  for (std::size_t k = 0; k < active.size(); ++k) {
    auto& j = jobs_[active[k]];
    auto r = a.row(static_cast<int>(k));
    std::vector<int> next(r.begin(), r.end());
    if (same_row(j.allocation, next)) continue;
    const bool any = std::any_of(next.begin(), next.end(), [](int v) { return v > 0; });
    if (any) {
      if (j.started) {
        ++j.restarts;
        j.delay_remaining = cfg_.realloc_delay;
      } else {
        j.started = true;
        j.start_s = now_;
        j.delay_remaining = 0.0;
      }
      j.allocation = std::move(next);
    } else {
      j.allocation.clear();
      j.delay_remaining = 0.0;
    }
    on_allocation_changed(j);
  }
}

std::vector<int> Simulator::node_usage() const {
  std::vector<int> use(nodes_.size(), 0);
  for (const auto& j : jobs_) {
    for (std::size_t n = 0; n < j.allocation.size(); ++n) use[n] += j.allocation[n];
  }
  return use;
}

void Simulator::step() {
  const double dt = cfg_.tick;
  std::vector<int> distributed_on(nodes_.size(), 0);
  if (cfg_.interference_slowdown > 0.0) {
    for (const auto& j : jobs_) {
      if (j.completed) continue;
      const long used = std::count_if(j.allocation.begin(), j.allocation.end(), [](int v) { return v > 0; });
      if (used < 2) continue;
      for (std::size_t n = 0; n < j.allocation.size(); ++n) distributed_on[n] += j.allocation[n] > 0;
    }
  }
  int active = 0;
  for (const auto& j : jobs_) active += (j.submitted && !j.completed) ? 1 : 0;

  for (auto& j : jobs_) {
    if (!j.submitted || j.completed) continue;
    j.active_sum += active;
    j.alive_ticks += 1.0;
    const int k = j.gpus();
    if (k == 0) continue;
    j.attained_gpu_seconds += k * dt;
    if (j.delay_remaining > 0.0) {
      j.delay_remaining = std::max(0.0, j.delay_remaining - dt);
      continue;
    }
    double t = j.base_t_iter;
    if (cfg_.interference_slowdown > 0.0) {
      int used = 0;
      bool shared = false;
      for (std::size_t n = 0; n < j.allocation.size(); ++n) {
        if (j.allocation[n] == 0) continue;
        ++used;
        shared = shared || distributed_on[n] > 1;
      }
      if (used > 1 && shared) t /= 1.0 - cfg_.interference_slowdown;
    }
    const auto batch_now = j.batch;
    const auto m = j.total_batch();
    if (cfg_.policy == Policy::kPollux) {
      const AllocationVector av(j.allocation);
      const bool seen = std::any_of(j.points.begin(), j.points.end(), [&](const ProfilePoint& p) {
        return p.batch == batch_now && Placement::of(p.allocation) == Placement::of(av);
      });
      if (!seen) {
        j.points.push_back({av, batch_now, t});
        j.fitted = fit_throughput(j.points, j.explore, j.fitted, cfg_.fit).params;
        choose_batch(j);
      }
    }
    const double phi = lib_.interpolate_pgns(j.spec.model, j.progress, m);
    const double eff = (phi + static_cast<double>(j.profile->m0)) / (phi + static_cast<double>(m));
    const double iters = dt / t;
    const double delta = iters * eff * static_cast<double>(m) / j.profile->dataset_size;
    const double remaining = j.profile->target_epochs - j.progress;
    double frac = 1.0;
    if (delta >= remaining) {
      frac = delta > 0.0 ? remaining / delta : 0.0;
      j.completed = true;
      j.complete_s = now_ + frac * dt;
      j.progress = j.profile->target_epochs;
    } else {
      j.progress += delta;
    }
    j.examples += frac * iters * static_cast<double>(m);
    j.useful_examples += frac * iters * eff * static_cast<double>(m);
    if (j.completed) {
      j.allocation.clear();
      continue;
    }
    if (cfg_.policy == Policy::kPollux && now_ + dt >= j.next_report_s) {
      j.next_report_s += cfg_.report_interval;
      agent_report(j);
    }
  }
  now_ += dt;
}

MetricsReport Simulator::run() {
  const auto wall_start = std::chrono::steady_clock::now();
  const long ticks_per_round = std::lround(cfg_.sched_interval / cfg_.tick);
  long tick = std::lround(now_ / cfg_.tick);
  while (!done()) {
    admit();
    if (tick % ticks_per_round == 0) schedule();
    step();
    ++tick;
    if (now_ > cfg_.max_sim_seconds) {
      throw Error(ErrorCode::kNonTerminating,
                  "simulation exceeded " + std::to_string(cfg_.max_sim_seconds) + " simulated seconds");
    }
    if (tick % 4096 == 0) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
      if (wall > cfg_.max_wall_seconds) {
        throw Error(ErrorCode::kNonTerminating, "simulation exceeded its wall-clock budget");
      }
    }
  }
  return report();
}

MetricsReport Simulator::report() const {
  MetricsReport r;
  for (const auto& j : jobs_) {
    JobResult res;
    res.id = j.spec.id;
    res.model = j.spec.model;
    res.category = j.spec.category;
    res.submit_s = j.spec.submit_s;
    res.start_s = j.start_s;
    res.complete_s = j.complete_s;
    if (j.completed) res.jct_s = j.complete_s - j.spec.submit_s;
    res.restarts = j.restarts;
    res.mean_active_jobs = j.alive_ticks > 0.0 ? j.active_sum / j.alive_ticks : 1.0;
    res.gpu_seconds = j.attained_gpu_seconds;
    res.examples = j.examples;
    res.useful_examples = j.useful_examples;
    if (j.completed) r.makespan = std::max(r.makespan, j.complete_s);
    r.jobs.push_back(std::move(res));
  }
  return r;
}

MetricsReport run(const WorkloadSpec& workload, const ProfileLibrary& profiles, const SimConfig& cfg) {
  Simulator sim(workload, profiles, cfg);
  return sim.run();
}

Summary summarize(const MetricsReport& report) {
  Summary s;
  std::vector<double> jcts, rhos;
  for (const auto& j : report.jobs) {
    if (!std::isnan(j.jct_s)) jcts.push_back(j.jct_s);
    if (!std::isnan(j.rho)) rhos.push_back(j.rho);
  }
  s.makespan = report.makespan;
  if (!jcts.empty()) {
    s.avg_jct = std::accumulate(jcts.begin(), jcts.end(), 0.0) / jcts.size();
    std::sort(jcts.begin(), jcts.end());
    // Nearest-rank percentile.
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * jcts.size()));
    s.p99_jct = jcts[std::max<std::size_t>(rank, 1) - 1];
  }
  if (!rhos.empty()) {
    s.avg_rho = std::accumulate(rhos.begin(), rhos.end(), 0.0) / rhos.size();
    s.max_rho = *std::max_element(rhos.begin(), rhos.end());
  }
  return s;
}

}  // namespace gsched
