// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 5-8 share one pool of trace-driven simulations.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gsched/autoscale.hpp"
#include "gsched/error.hpp"
#include "gsched/fitting.hpp"
#include "gsched/goodput.hpp"
#include "gsched/io.hpp"
#include "gsched/pgns.hpp"
#include "gsched/profiles.hpp"
#include "gsched/sched.hpp"
#include "gsched/simulator.hpp"
#include "gsched/workload.hpp"

using namespace gsched;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail, double seconds) {
  std::printf("criterion %2d: %s  %s  (%.1f s)\n", n, ok ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int worker_count() {
  if (const char* env = std::getenv("GOODPUT_SCHED_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_parallel(std::vector<std::function<void()>>& tasks) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) tasks[i]();
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(worker_count(), static_cast<int>(tasks.size()));
  for (int t = 1; t < n; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

ThroughputParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto lu = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };
  ThroughputParams p;
  p.alpha_grad = lu(1e-3, 0.1);
  p.beta_grad = lu(1e-5, 1e-2);
  p.alpha_sync_local = lu(1e-3, 0.1);
  p.beta_sync_local = lu(1e-4, 1e-2);
  p.alpha_sync_node = lu(1e-2, 0.5);
  p.beta_sync_node = lu(1e-3, 5e-2);
  p.gamma = 1.0 + 2.0 * u(rng);
  return p;
}

// Goodput written out directly from the model definition.
double oracle_goodput(const GoodputModel& g, Placement pl, int m, int s) {
  const auto& p = g.params;
  const double tg = p.alpha_grad + p.beta_grad * m;
  double ts = 0.0;
  if (pl.gpus > 1) {
    const bool multi = pl.nodes > 1;
    ts = (multi ? p.alpha_sync_node : p.alpha_sync_local) +
         (multi ? p.beta_sync_node : p.beta_sync_local) * (pl.gpus - 2);
  }
  const double t = s * tg + std::pow(std::pow(tg, p.gamma) + std::pow(ts, p.gamma), 1.0 / p.gamma);
  const double big_m = static_cast<double>(pl.gpus) * m * (s + 1);
  const double phi = std::max(0.0, g.pgns);
  return big_m / t * (phi + g.init_batch) / (phi + big_m);
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> gpus_d(1, 32), mpg_d(1, 256);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0, feasible = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    GoodputModel g;
    g.params = random_params(rng);
    g.pgns = std::pow(10.0, 4.0 * u(rng)) - 1.0;
    g.max_per_gpu_batch = mpg_d(rng);
    g.init_batch = 1 + static_cast<std::int64_t>(u(rng) * 4.0 * g.max_per_gpu_batch);
    if (u(rng) < 0.7) g.max_batch = g.init_batch * (1 + static_cast<std::int64_t>(u(rng) * 50));
    const int gpus = gpus_d(rng);
    const int nodes = std::max(1, std::min(gpus, static_cast<int>(std::ceil(gpus / 4.0 + 2 * u(rng)))));
    const Placement pl{gpus, nodes};

    double best = -1.0;
    for (int s = 0; s <= kMaxAccumSteps; ++s) {
      for (int m = 1; m <= g.max_per_gpu_batch; ++m) {
        const std::int64_t big = static_cast<std::int64_t>(gpus) * m * (s + 1);
        if (big < g.init_batch || (g.max_batch && big > *g.max_batch)) continue;
        best = std::max(best, oracle_goodput(g, pl, m, s));
      }
    }
    bool ok;
    try {
      const auto c = optimize_batch_config(g, pl);
      ok = best > 0.0 && std::abs(c.value - best) <= 1e-9 * best &&
           std::abs(oracle_goodput(g, pl, c.config.per_gpu_batch, c.config.accum_steps) - best) <= 1e-9 * best;
      if (best > 0.0) ++feasible;
    } catch (const Error& e) {
      ok = best < 0.0 && e.code() == ErrorCode::kInfeasibleBatch;
    }
    agree += ok;
  }
  const double secs = elapsed(t0);
  report(1, agree == n && secs < 10.0,
         fmt("batch optimizer vs exhaustive grid: %d/%d agree (%d feasible)", agree, n, feasible), secs);
}

// ---------------------------------------------------------------------------

std::vector<ProfilePoint> regime_points(const ThroughputParams& p, double noise, std::mt19937_64& rng,
                                        bool held_out) {
  std::normal_distribution<double> z(0.0, 1.0);
  const std::vector<std::vector<int>> allocs =
      held_out ? std::vector<std::vector<int>>{{3}, {2, 1}, {4, 4, 2}, {4, 4, 4, 4, 4}, {1, 1, 1}}
               : std::vector<std::vector<int>>{{1}, {2}, {3}, {4}, {1, 1}, {2, 2}, {4, 4}, {4, 4, 4, 4}};
  const std::vector<int> ms = held_out ? std::vector<int>{6, 48, 200} : std::vector<int>{1, 8, 32, 128, 512};
  const std::vector<int> ss = held_out ? std::vector<int>{1, 5} : std::vector<int>{0, 3};
  std::vector<ProfilePoint> pts;
  for (const auto& a : allocs) {
    for (int m : ms) {
      for (int s : ss) {
        AllocationVector av(a);
        const double t = t_iter(p, av, {m, s}) * (noise > 0.0 ? std::exp(noise * z(rng)) : 1.0);
        pts.push_back({av, {m, s}, t});
      }
    }
  }
  return pts;
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  ExplorationState all;
  all.observe(Placement{3, 1});
  all.observe(Placement{3, 2});
  const int n = 10;
  int exact_ok = 0;
  double worst_rmsle = 0.0, worst_rel = 0.0, worst_pred = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto truth = random_params(rng);
    const auto pts = regime_points(truth, 0.0, rng, false);
    const auto fit = fit_throughput(pts, all);
    const auto a = to_array(truth), b = to_array(fit.params);
    double rel = 0.0;
    for (int k = 0; k < kNumThroughputParams; ++k) rel = std::max(rel, std::abs(b[k] - a[k]) / a[k]);
    worst_rmsle = std::max(worst_rmsle, fit.rmsle);
    worst_rel = std::max(worst_rel, rel);
    exact_ok += fit.rmsle <= 1e-6 && rel <= 0.01;

    const auto noisy = regime_points(truth, 0.10, rng, false);
    const auto nfit = fit_throughput(noisy, all);
    const auto held = regime_points(truth, 0.0, rng, true);
    double err = 0.0;
    for (const auto& h : held) {
      err += std::abs(t_iter(nfit.params, h.allocation, h.batch) - h.observed_t_iter) / h.observed_t_iter;
    }
    worst_pred = std::max(worst_pred, err / held.size());
  }
  const double secs = elapsed(t0);
  report(2, exact_ok == n && worst_pred <= 0.10 && secs < 30.0,
         fmt("noiseless %d/%d (max rmsle %.2e, max param rel err %.2e); noisy held-out mean rel err max %.3f",
             exact_ok, n, worst_rmsle, worst_rel, worst_pred),
         secs);
}

// ---------------------------------------------------------------------------

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (double phi : {50.0, 500.0, 5000.0}) {
    SyntheticGradientSource src(256, phi, static_cast<std::uint64_t>(phi) + 7);
    const double b = phi / 4.0;
    NoiseComponents sum;
    const int samples = 10000;
    for (int i = 0; i < samples; ++i) {
      const auto c = two_scale_components(src.sample_two_scale(b, 8));
      sum.grad_sq += c.grad_sq;
      sum.trace_sigma += c.trace_sigma;
    }
    const double two_scale = sum.trace_sigma / sum.grad_sq;

    PgnsTracker tracker(0.99);
    std::vector<double> prev, curr, diff;
    src.sample(4.0 * phi, prev);
    for (int step = 0; step < 100; ++step) {
      src.sample(4.0 * phi, curr);
      diff.resize(curr.size());
      for (std::size_t k = 0; k < curr.size(); ++k) diff[k] = curr[k] - prev[k];
      double pn = 0, cn = 0, dn = 0;
      for (std::size_t k = 0; k < curr.size(); ++k) {
        pn += prev[k] * prev[k];
        cn += curr[k] * curr[k];
        dn += diff[k] * diff[k];
      }
      tracker.update(differenced_components(pn, cn, dn, 4.0 * phi));
      std::swap(prev, curr);
    }
    const double differenced = tracker.value().value_or(-1.0);
    const double e1 = std::abs(two_scale / phi - 1.0), e2 = std::abs(differenced / phi - 1.0);
    ok = ok && e1 <= 0.05 && e2 <= 0.10;
    detail += fmt("phi=%g two-scale err %.3f differenced err %.3f; ", phi, e1, e2);
  }
  const double secs = elapsed(t0);
  report(3, ok && secs < 30.0, detail, secs);
}

// ---------------------------------------------------------------------------

void enumerate_rows(int j, AllocationMatrix& a, int cap, const std::function<void()>& visit) {
  if (j == a.jobs()) {
    visit();
    return;
  }
  std::function<void(int)> cell = [&](int n) {
    if (n == a.nodes()) {
      enumerate_rows(j + 1, a, cap, visit);
      return;
    }
    for (int v = 0; v <= cap; ++v) {
      a.at(j, n) = v;
      cell(n + 1);
    }
    a.at(j, n) = 0;
  };
  cell(0);
}

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& refs = reference_models();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 200;
  int optimal = 0, regressions = 0;
  for (int inst = 0; inst < n; ++inst) {
    const int layout = inst % 3;
    const auto nodes = layout == 0   ? homogeneous_cluster(1, 4)
                       : layout == 1 ? homogeneous_cluster(2, 2)
                                     : homogeneous_cluster(1, 3);
    const int num_jobs = 1 + static_cast<int>(u(rng) * 3);
    std::vector<SchedJobInfo> jobs;
    std::vector<int> free;
    for (const auto& nd : nodes) free.push_back(nd.capacity(kGpu));
    for (int j = 0; j < num_jobs; ++j) {
      const auto& r = refs[static_cast<std::size_t>(u(rng) * refs.size())];
      SchedJobInfo info;
      info.id = "j" + std::to_string(j);
      info.model.params = r.params;
      info.model.pgns = r.phi_start * std::pow(r.phi_end / r.phi_start, u(rng));
      info.model.init_batch = std::max<std::int64_t>(1, r.m0 / 8);
      info.model.max_batch = r.max_batch;
      info.model.max_per_gpu_batch = r.max_per_gpu_batch;
      info.age = 600.0 * u(rng);
      info.num_restarts = static_cast<int>(u(rng) * 3);
      if (u(rng) < 0.5) {
        const int want = 1 + static_cast<int>(u(rng) * 2);
        auto row = pack_gpus(free, want);
        if (!row.empty()) {
          for (std::size_t k = 0; k < row.size(); ++k) free[k] -= row[k];
          info.current_allocation = row;
        }
      }
      jobs.push_back(std::move(info));
    }
    FitnessConfig cfg;
    cfg.p = u(rng) < 0.5 ? -1.0 : 1.0;
    const ValidationOptions vopt{cfg.interference_avoidance, cfg.max_nodes_per_job};

    AllocationMatrix a(num_jobs, static_cast<int>(nodes.size()));
    double brute = -1.0;
    enumerate_rows(0, a, 4, [&] {
      if (!validate(a, jobs, nodes, vopt).empty()) return;
      brute = std::max(brute, fitness(jobs, nodes, a, cfg));
    });
    const auto res = search_allocations(jobs, nodes, cfg, 1000 + inst);
    const auto incumbent = current_matrix(jobs, static_cast<int>(nodes.size()));
    const double inc_fit = fitness(jobs, nodes, incumbent, cfg);
    if (res.fitness >= brute - 1e-9 * std::abs(brute)) ++optimal;
    if (res.fitness < inc_fit - 1e-12 || !validate(res.best, jobs, nodes, vopt).empty()) ++regressions;
  }
  const double secs = elapsed(t0);
  report(4, optimal >= 0.95 * n && regressions == 0 && secs < 60.0,
         fmt("search reached brute-force optimum on %d/%d instances, %d regressions", optimal, n, regressions), secs);
}

// ---------------------------------------------------------------------------

struct Cell {
  std::string name;
  Experiment exp;
};

struct CellResult {
  std::vector<double> avg_jct;  // per seed
  std::vector<JobResult> jobs;  // all seeds
  double max_rho = 0.0;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

void criteria_5_to_8(const ProfileLibrary& lib, int seeds) {
  std::vector<Cell> cells;
  auto add = [&](const std::string& name, auto edit) {
    Experiment e;
    e.fairness = false;
    edit(e);
    e.mode = default_mode(e.sim.policy);
    cells.push_back({name, e});
  };
  // Cells 0-2 are criterion 5; fairness of the p=-1 runs is added afterwards.
  add("pollux", [](Experiment&) {});
  add("tiresias", [](Experiment& e) { e.sim.policy = Policy::kTiresias; });
  add("optimus", [](Experiment& e) { e.sim.policy = Policy::kOptimus; });
  add("pollux_p1", [](Experiment& e) {
    e.sim.p = 1.0;
    e.fairness = true;
  });
  add("slow_avoid", [](Experiment& e) { e.sim.interference_slowdown = 0.5; });
  add("slow_noavoid", [](Experiment& e) {
    e.sim.interference_slowdown = 0.5;
    e.sim.interference_avoidance = false;
  });
  add("interval120", [](Experiment& e) { e.sim.sched_interval = 120.0; });
  add("interval480", [](Experiment& e) { e.sim.sched_interval = 480.0; });

  std::vector<std::vector<MetricsReport>> out(cells.size(), std::vector<MetricsReport>(seeds));
  std::vector<std::vector<TraceJob>> traces;
  for (int s = 1; s <= seeds; ++s) traces.push_back(generate_trace({160, 8.0, static_cast<std::uint64_t>(s)}));
  IsolatedRunCache cache;
  auto cell_tasks = [&](std::size_t from, std::size_t to) {
    std::vector<std::function<void()>> tasks;
    for (std::size_t c = from; c < to; ++c) {
      for (int s = 0; s < seeds; ++s) {
        tasks.push_back([&, c, s] {
          Experiment e = cells[c].exp;
          e.sim.seed = static_cast<std::uint64_t>(s + 1);
          out[c][s] = run_experiment(traces[s], lib, e, &cache);
        });
      }
    }
    return tasks;
  };

  const auto t0 = std::chrono::steady_clock::now();
  auto phase1 = cell_tasks(0, 3);
  run_parallel(phase1);
  const double secs5 = elapsed(t0);

  const auto t1 = std::chrono::steady_clock::now();
  auto phase2 = cell_tasks(3, cells.size());
  for (int s = 0; s < seeds; ++s) {
    phase2.push_back([&, s] {
      Experiment e = cells[0].exp;
      e.sim.seed = static_cast<std::uint64_t>(s + 1);
      const auto spec = synthesize(traces[s], lib, e.sim.seed, e.mode);
      compute_fairness(out[0][s], spec, lib, e.sim, cache);
    });
  }
  run_parallel(phase2);
  const double secs_rest = elapsed(t1);

  std::map<std::string, CellResult> r;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cr = r[cells[c].name];
    for (const auto& rep : out[c]) {
      cr.avg_jct.push_back(summarize(rep).avg_jct);
      for (const auto& j : rep.jobs) {
        cr.jobs.push_back(j);
        if (!std::isnan(j.rho)) cr.max_rho = std::max(cr.max_rho, j.rho);
      }
    }
  }
  const double pol = mean(r["pollux"].avg_jct), tir = mean(r["tiresias"].avg_jct),
               opt = mean(r["optimus"].avg_jct);
  const double red_t = 1.0 - pol / tir, red_o = 1.0 - pol / opt;
  report(5, red_t >= 0.20 && red_o >= 0.20 && secs5 < 600.0,
         fmt("mean avg JCT over %d traces: pollux %.0f s, tiresias %.0f s (-%.1f%%), optimus %.0f s (-%.1f%%)",
             seeds, pol, tir, 100 * red_t, opt, 100 * red_o),
         secs5);

  int below2 = 0, rated = 0;
  for (const auto& j : r["pollux"].jobs) {
    if (std::isnan(j.rho)) continue;
    ++rated;
    below2 += j.rho < 2.0;
  }
  const double frac = rated ? static_cast<double>(below2) / rated : 0.0;
  const bool completed = rated == static_cast<int>(r["pollux"].jobs.size());
  report(6, completed && r["pollux"].max_rho < r["pollux_p1"].max_rho && frac >= 0.99,
         fmt("max rho p=-1 %.3f vs p=1 %.3f; %d/%d jobs (%.2f%%) with rho < 2 under p=-1", r["pollux"].max_rho,
             r["pollux_p1"].max_rho, below2, rated, 100 * frac),
         secs_rest);

  const double slow_a = mean(r["slow_avoid"].avg_jct), slow_n = mean(r["slow_noavoid"].avg_jct);
  report(7, std::abs(slow_a / pol - 1.0) <= 0.05 && slow_n / pol >= 1.2,
         fmt("50%% slowdown: avoidance %.0f s (%.3fx), no avoidance %.0f s (%.3fx) vs %.0f s without slowdown",
             slow_a, slow_a / pol, slow_n, slow_n / pol, pol),
         0.0);

  const double i120 = mean(r["interval120"].avg_jct), i480 = mean(r["interval480"].avg_jct);
  report(8, std::abs(i120 / pol - 1.0) <= 0.10 && i480 > pol,
         fmt("interval 60 s %.0f s, 120 s %.0f s (%+.1f%%), 480 s %.0f s (%+.1f%%)", pol, i120,
             100 * (i120 / pol - 1.0), i480, 100 * (i480 / pol - 1.0)),
         0.0);
}

// ---------------------------------------------------------------------------

void criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  // An ImageNet-scale job whose noise scale grows tenfold over training.
  ReferenceModel m{"growing", {0.050, 0.0035, 0.100, 0.005, 0.250, 0.010, 2.0}, 200, 12800, 256, 1281167, 90,
                   500.0, 5000.0};
  ProfileLibrary lib;
  lib.add(m.name, tabulate(m, 16, 4, 0.02, 9));
  AutoscalePolicy gp, tp;
  tp.mode = ScaleMode::kThroughput;
  const auto g = simulate_autoscale(lib, m.name, gp);
  const auto t = simulate_autoscale(lib, m.name, tp);

  bool monotone = true;
  for (std::size_t i = 1; i < g.samples.size(); ++i) monotone = monotone && g.samples[i].nodes >= g.samples[i - 1].nodes;
  const int first = g.samples.front().nodes, last = g.samples.back().nodes;
  double reached = 0.0;
  for (const auto& s : g.samples) {
    if (s.nodes == last) {
      reached = s.t;
      break;
    }
  }
  const bool delayed = last > first && reached >= 0.25 * g.completion_s;
  const double saving = 1.0 - g.cost / t.cost, longer = g.completion_s / t.completion_s - 1.0;
  report(9, saving >= 0.10 && longer <= 0.10 && monotone && delayed,
         fmt("goodput cost %.1f vs throughput %.1f (-%.1f%%), completion %.0f s vs %.0f s (%+.1f%%); "
             "nodes %d -> %d reached at %.0f%% of the run, monotone=%s",
             g.cost, t.cost, 100 * saving, g.completion_s, t.completion_s, 100 * longer, first, last,
             100 * reached / g.completion_s, monotone ? "yes" : "no"),
         elapsed(t0));
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10(const std::string& cli, const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::string> commands = {
      "gen-trace --jobs 24 --hours 1 --seed 3 --out {d}/trace.csv",
      "gen-workload --trace {d}/trace.csv --seed 3 --mode tuned --out {d}/workload.json",
      "gen-profiles --seed 2 --out {d}/profiles.json",
      "fit {d}/fit_input.json --seed 5 --out {d}/params.json",
      "simulate --jobs 16 --hours 1 --seed 5 --out {d}/sim",
      "simulate --policy tiresias --trace {d}/trace.csv --seed 3 --out {d}/sim_tiresias",
      "sweep --jobs 8 --hours 0.5 --seeds 2 --axis policy=pollux,optimus --axis p=-1,1 --out {d}/sweep",
      "autoscale --model cifar10 --out {d}/autoscale.csv",
  };
  std::string fit_input = "[";
  {
    std::mt19937_64 rng(5);
    const auto pts = regime_points(reference_models()[0].params, 0.05, rng, false);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      fit_input += fmt("%s{\"nodes\":%d,\"gpus\":%d,\"per_gpu_batch\":%d,\"accum_steps\":%d,\"t_iter_seconds\":%s}",
                       i ? "," : "", p.allocation.occupied_nodes(), p.allocation.total_gpus(),
                       p.batch.per_gpu_batch, p.batch.accum_steps, format_number(p.observed_t_iter).c_str());
    }
  }
  fit_input += "]\n";

  std::vector<std::map<std::string, std::string>> outputs(2);
  bool ran = true;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = scratch / ("run" + std::to_string(rep));
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file((dir / "fit_input.json").string(), fit_input);
    for (std::size_t c = 0; c < commands.size(); ++c) {
      std::string cmd = commands[c];
      for (std::size_t pos; (pos = cmd.find("{d}")) != std::string::npos;) cmd.replace(pos, 3, dir.string());
      const auto log = dir / ("stdout_" + std::to_string(c) + ".txt");
      const std::string full = "GOODPUT_SCHED_THREADS=2 \"" + cli + "\" " + cmd + " > \"" + log.string() + "\" 2>&1";
      if (std::system(full.c_str()) != 0) {
        ran = false;
        std::printf("  command failed: %s\n", cmd.c_str());
      }
    }
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) {
        std::string text = slurp(e.path());
        for (std::size_t pos; (pos = text.find(dir.string())) != std::string::npos;) text.replace(pos, dir.string().size(), "{d}");
        outputs[rep][fs::relative(e.path(), dir).string()] = text;
      }
    }
  }
  int differing = 0;
  for (const auto& [name, text] : outputs[0]) {
    auto it = outputs[1].find(name);
    if (it == outputs[1].end() || it->second != text) {
      ++differing;
      std::printf("  differs: %s\n", name.c_str());
    }
  }
  differing += outputs[1].size() != outputs[0].size();
  report(10, ran && differing == 0 && !outputs[0].empty(),
         fmt("%zu commands run twice, %zu output files compared, %d differ", commands.size(), outputs[0].size(),
             differing),
         elapsed(t0));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::fprintf(stderr, "usage: %s <profiles.json> <gsched cli> <scratch dir> [seeds]\n", argv[0]);
    return 2;
  }
  const int seeds = argc > 4 ? std::atoi(argv[4]) : 8;
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    if (seeds > 0) criteria_5_to_8(load_profiles(argv[1]), seeds);
    criterion9();
    criterion10(argv[2], argv[3]);
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
