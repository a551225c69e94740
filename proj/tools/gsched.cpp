// Command-line front end for the scheduling toolkit.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gsched/autoscale.hpp"
#include "gsched/error.hpp"
#include "gsched/fitting.hpp"
#include "gsched/io.hpp"
#include "gsched/profiles.hpp"
#include "gsched/simulator.hpp"
#include "gsched/workload.hpp"

namespace fs = std::filesystem;
using namespace gsched;

namespace {

struct SimFlags {
  std::string policy = "pollux";
  double p = -1.0;
  double interval = 60.0;
  double slowdown = 0.0;
  bool no_avoidance = false;
  std::uint64_t seed = 0;
  std::string trace;
  std::string profiles;
  std::string out = ".";
  double load_multiplier = 1.0;
  std::string mode;
  int jobs = 160;
  double hours = 8.0;
  bool no_fairness = false;
};

void add_sim_flags(CLI::App* app, SimFlags& f) {
  app->add_option("--policy", f.policy, "Scheduling policy")
      ->check(CLI::IsMember({"pollux", "tiresias", "optimus"}));
  app->add_option("--p", f.p, "Fairness exponent of the power-mean fitness");
  app->add_option("--interval", f.interval, "Scheduling interval in seconds")->check(CLI::PositiveNumber);
  app->add_option("--slowdown", f.slowdown, "Slowdown of co-located distributed jobs, in [0,1)")
      ->check(CLI::Range(0.0, 0.999999));
  app->add_flag("--no-interference-avoidance", f.no_avoidance, "Allow distributed jobs to share nodes");
  app->add_option("--seed", f.seed, "Seed for trace generation, workload synthesis and search");
  app->add_option("--trace", f.trace, "Trace CSV (submit_s,gpus,duration_s); generated from --seed if absent");
  app->add_option("--profiles", f.profiles, "Profile JSON; the bundled reference models if absent");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--load-multiplier", f.load_multiplier, "Compress submission times by this factor")
      ->check(CLI::PositiveNumber);
  app->add_option("--mode", f.mode, "Job configuration mode (default: pollux for pollux, tuned otherwise)")
      ->check(CLI::IsMember({"pollux", "tuned", "realistic"}));
  app->add_option("--jobs", f.jobs, "Jobs in a generated trace")->check(CLI::PositiveNumber);
  app->add_option("--hours", f.hours, "Length of a generated trace's submission window")
      ->check(CLI::PositiveNumber);
  app->add_flag("--no-fairness", f.no_fairness, "Skip isolated runs and leave rho empty");
}

ProfileLibrary load_library(const std::string& path) {
  if (path.empty()) return reference_library();
  return load_profiles(path);
}

std::vector<TraceJob> trace_for(const SimFlags& f, std::uint64_t seed) {
  if (!f.trace.empty()) return load_trace(f.trace);
  return generate_trace({f.jobs, f.hours, seed});
}

Experiment experiment_for(const SimFlags& f) {
  Experiment e;
  e.sim.policy = policy_from_string(f.policy);
  e.sim.p = f.p;
  e.sim.sched_interval = f.interval;
  e.sim.interference_slowdown = f.slowdown;
  e.sim.interference_avoidance = !f.no_avoidance;
  e.sim.seed = f.seed;
  e.mode = f.mode.empty() ? default_mode(e.sim.policy) : config_mode_from_string(f.mode);
  e.load_multiplier = f.load_multiplier;
  e.fairness = !f.no_fairness;
  return e;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::kIo, "cannot create output directory '" + dir + "'");
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GOODPUT_SCHED_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

int cmd_simulate(const SimFlags& f) {
  const auto lib = load_library(f.profiles);
  const auto trace = trace_for(f, f.seed);
  const auto exp = experiment_for(f);
  const auto report = run_experiment(trace, lib, exp);
  const auto summary = summary_to_json(summarize(report));
  ensure_dir(f.out);
  write_file((fs::path(f.out) / "metrics.csv").string(), metrics_to_csv(report));
  write_file((fs::path(f.out) / "summary.json").string(), summary);
  std::cout << summary;
  return 0;
}

struct Axis {
  std::string name;
  std::vector<std::string> values;
};

Axis parse_axis(const std::string& spec) {
  static const std::vector<std::string> known = {"policy", "p", "interval", "slowdown", "load", "avoidance"};
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw Error(ErrorCode::kInvalidArgument, "axis '" + spec + "' must look like name=v1,v2");
  }
  Axis a;
  a.name = spec.substr(0, eq);
  if (std::find(known.begin(), known.end(), a.name) == known.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown sweep axis '" + a.name + "'");
  }
  std::stringstream ss(spec.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "empty value in axis '" + a.name + "'");
    a.values.push_back(v);
  }
  return a;
}

double to_double(const std::string& s, const std::string& axis) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error(ErrorCode::kInvalidArgument, "axis '" + axis + "': not a number: " + s);
  return v;
}

void apply_axis(SimFlags& f, const std::string& name, const std::string& value) {
  if (name == "policy") {
    policy_from_string(value);
    f.policy = value;
  } else if (name == "p") {
    f.p = to_double(value, name);
  } else if (name == "interval") {
    f.interval = to_double(value, name);
  } else if (name == "slowdown") {
    f.slowdown = to_double(value, name);
  } else if (name == "load") {
    f.load_multiplier = to_double(value, name);
  } else if (name == "avoidance") {
    if (value != "on" && value != "off") throw Error(ErrorCode::kInvalidArgument, "avoidance takes on/off");
    f.no_avoidance = value == "off";
  }
}

struct MeanCi {
  double mean = std::nan("");
  double ci95 = std::nan("");
};

// Mean and half-width of the 95% confidence interval (Student t).
MeanCi mean_ci(const std::vector<double>& xs) {
  static const double t975[] = {0,      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                2.262, 2.228,  2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110,
                                2.101, 2.093,  2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
                                2.052, 2.048,  2.045, 2.042};
  std::vector<double> v;
  for (double x : xs) {
    if (!std::isnan(x)) v.push_back(x);
  }
  MeanCi r;
  if (v.empty()) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / v.size();
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  const std::size_t df = v.size() - 1;
  const double t = df < std::size(t975) ? t975[df] : 1.96;
  r.ci95 = t * std::sqrt(ss / df / v.size());
  return r;
}

int cmd_sweep(const SimFlags& base, const std::vector<std::string>& axis_specs, int seeds) {
  if (axis_specs.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep needs at least one --axis");
  std::vector<Axis> axes;
  for (const auto& s : axis_specs) axes.push_back(parse_axis(s));

  std::vector<std::vector<std::string>> cells{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : cells) {
      for (const auto& v : a.values) {
        auto d = c;
        d.push_back(v);
        next.push_back(std::move(d));
      }
    }
    cells = std::move(next);
  }
  std::vector<SimFlags> cell_flags;
  for (const auto& c : cells) {
    SimFlags f = base;
    for (std::size_t i = 0; i < axes.size(); ++i) apply_axis(f, axes[i].name, c[i]);
    cell_flags.push_back(f);
  }

  const auto lib = load_library(base.profiles);
  const std::size_t runs = cells.size() * static_cast<std::size_t>(seeds);
  std::vector<Summary> results(runs);
  std::vector<std::string> errors(runs);
  IsolatedRunCache cache;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs; i = next++) {
      SimFlags f = cell_flags[i / seeds];
      f.seed = base.seed + i % seeds;
      try {
        results[i] = summarize(run_experiment(trace_for(f, f.seed), lib, experiment_for(f), &cache));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(worker_count(), runs);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep cell failed: " + e);
  }

  std::string csv;
  for (const auto& a : axes) csv += a.name + ",";
  csv += "runs";
  for (const char* m : {"avg_jct", "p99_jct", "makespan", "avg_rho", "max_rho"}) {
    csv += std::string(",") + m + "_mean," + m + "_ci95";
  }
  csv += "\n";
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& v : cells[c]) csv += v + ",";
    csv += std::to_string(seeds);
    std::vector<double> cols[5];
    for (int s = 0; s < seeds; ++s) {
      const auto& r = results[c * seeds + s];
      cols[0].push_back(r.avg_jct);
      cols[1].push_back(r.p99_jct);
      cols[2].push_back(r.makespan);
      cols[3].push_back(r.avg_rho);
      cols[4].push_back(r.max_rho);
    }
    for (const auto& col : cols) {
      const auto mc = mean_ci(col);
      csv += "," + field(mc.mean) + "," + field(mc.ci95);
    }
    csv += "\n";
  }
  ensure_dir(base.out);
  write_file((fs::path(base.out) / "sweep.csv").string(), csv);
  std::cout << csv;
  return 0;
}

int cmd_fit(const std::string& input, const std::string& out, std::uint64_t seed) {
  const auto pts = fit_points_from_json(read_file(input));
  if (pts.empty()) throw Error(ErrorCode::kEmptyInput, "fit input '" + input + "' has no rows");
  ExplorationState state;
  for (const auto& p : pts) {
    state.observe(Placement{p.allocation.total_gpus(), p.allocation.occupied_nodes()});
  }
  FitOptions opt;
  opt.seed = seed;
  const auto r = fit_throughput(pts, state, std::nullopt, opt);
  const auto json = params_to_json(r.params);
  if (params_from_json(json) != r.params) throw Error(ErrorCode::kParse, "parameter JSON did not round-trip");
  if (!out.empty()) write_file(out, json);
  std::cout << json << "rmsle " << format_number(r.rmsle) << "\n";
  if (r.optimizer_failed) std::cerr << "warning: optimizer did not converge; best feasible parameters shown\n";
  return 0;
}

int cmd_gen_trace(int jobs, double hours, std::uint64_t seed, const std::string& out) {
  const auto csv = trace_to_csv(generate_trace({jobs, hours, seed}));
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
  }
  return 0;
}

int cmd_gen_workload(const SimFlags& f, const std::string& out) {
  const auto lib = load_library(f.profiles);
  const auto mode = f.mode.empty() ? ConfigMode::kPollux : config_mode_from_string(f.mode);
  auto spec = synthesize(trace_for(f, f.seed), lib, f.seed, mode);
  if (f.load_multiplier != 1.0) spec = with_load_multiplier(spec, f.load_multiplier);
  const auto json = workload_to_json(spec);
  if (out.empty()) {
    std::cout << json;
  } else {
    write_file(out, json);
  }
  return 0;
}

int cmd_gen_profiles(double noise, std::uint64_t seed, const std::string& out) {
  const auto json = profiles_to_json(reference_library(16, 4, noise, seed));
  if (out.empty()) {
    std::cout << json;
  } else {
    write_file(out, json);
  }
  return 0;
}

int cmd_autoscale(const std::string& profiles, const std::string& model, const std::string& mode,
                  double price, const std::string& out) {
  const auto lib = load_library(profiles);
  AutoscalePolicy policy;
  policy.mode = mode == "throughput" ? ScaleMode::kThroughput : ScaleMode::kGoodput;
  policy.price_per_node_hour = price;
  const auto run = simulate_autoscale(lib, model, policy);
  const auto csv = autoscale_csv(run);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
    std::cout << "completion_s " << format_number(run.completion_s) << "\nnode_hours "
              << format_number(run.node_hours) << "\ncost " << format_number(run.cost) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goodput-driven cluster scheduling toolkit"};
  app.require_subcommand(1);

  SimFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Run one trace-driven simulation");
  add_sim_flags(simulate, sim_flags);

  SimFlags sweep_flags;
  std::vector<std::string> axes;
  int seeds = 8;
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over axes, repeated over seeded traces");
  add_sim_flags(sweep, sweep_flags);
  sweep->add_option("--axis", axes, "name=v1,v2 with name in policy,p,interval,slowdown,load,avoidance");
  sweep->add_option("--seeds", seeds, "Traces per cell (seeds seed..seed+n-1)")->check(CLI::PositiveNumber);

  std::string fit_input, fit_out;
  std::uint64_t fit_seed = 0;
  auto* fit = app.add_subcommand("fit", "Fit throughput parameters to measured iteration times");
  fit->add_option("input", fit_input, "JSON rows {nodes,gpus,per_gpu_batch,accum_steps,t_iter_seconds}")
      ->required();
  fit->add_option("--out", fit_out, "Write fitted parameters JSON here");
  fit->add_option("--seed", fit_seed, "Seed for random restarts");

  int trace_jobs = 160;
  double trace_hours = 8.0;
  std::uint64_t trace_seed = 0;
  std::string trace_out;
  auto* gen_trace = app.add_subcommand("gen-trace", "Generate a synthetic job trace CSV");
  gen_trace->add_option("--jobs", trace_jobs)->check(CLI::PositiveNumber);
  gen_trace->add_option("--hours", trace_hours)->check(CLI::PositiveNumber);
  gen_trace->add_option("--seed", trace_seed);
  gen_trace->add_option("--out", trace_out, "Output file (stdout if absent)");

  SimFlags wl_flags;
  std::string wl_out;
  auto* gen_workload = app.add_subcommand("gen-workload", "Map a trace onto models and job configurations");
  gen_workload->add_option("--trace", wl_flags.trace);
  gen_workload->add_option("--profiles", wl_flags.profiles);
  gen_workload->add_option("--seed", wl_flags.seed);
  gen_workload->add_option("--mode", wl_flags.mode)->check(CLI::IsMember({"pollux", "tuned", "realistic"}));
  gen_workload->add_option("--load-multiplier", wl_flags.load_multiplier)->check(CLI::PositiveNumber);
  gen_workload->add_option("--out", wl_out, "Output file (stdout if absent)");

  double prof_noise = 0.02;
  std::uint64_t prof_seed = 1;
  std::string prof_out;
  auto* gen_profiles = app.add_subcommand("gen-profiles", "Tabulate the reference models into a profile JSON");
  gen_profiles->add_option("--noise", prof_noise, "Log-normal noise on iteration times")
      ->check(CLI::NonNegativeNumber);
  gen_profiles->add_option("--seed", prof_seed);
  gen_profiles->add_option("--out", prof_out, "Output file (stdout if absent)");

  std::string as_profiles, as_model = "imagenet", as_mode = "goodput", as_out;
  double as_price = 1.0;
  auto* autoscale = app.add_subcommand("autoscale", "Simulate cloud autoscaling of one job");
  autoscale->add_option("--profiles", as_profiles);
  autoscale->add_option("--model", as_model);
  autoscale->add_option("--mode", as_mode)->check(CLI::IsMember({"goodput", "throughput"}));
  autoscale->add_option("--price", as_price, "Price per node-hour")->check(CLI::NonNegativeNumber);
  autoscale->add_option("--out", as_out, "CSV output file (stdout if absent)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*sweep) return cmd_sweep(sweep_flags, axes, seeds);
    if (*fit) return cmd_fit(fit_input, fit_out, fit_seed);
    if (*gen_trace) return cmd_gen_trace(trace_jobs, trace_hours, trace_seed, trace_out);
    if (*gen_workload) return cmd_gen_workload(wl_flags, wl_out);
    if (*gen_profiles) return cmd_gen_profiles(prof_noise, prof_seed, prof_out);
    if (*autoscale) return cmd_autoscale(as_profiles, as_model, as_mode, as_price, as_out);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
