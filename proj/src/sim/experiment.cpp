#include "gsched/simulator.hpp"

namespace gsched {

ConfigMode default_mode(Policy p) { return p == Policy::kPollux ? ConfigMode::kPollux : ConfigMode::kTuned; }

MetricsReport run_experiment(const std::vector<TraceJob>& trace, const ProfileLibrary& lib,
                             const Experiment& exp, IsolatedRunCache* cache) {
  WorkloadSpec spec = synthesize(trace, lib, exp.sim.seed, exp.mode);
  if (exp.load_multiplier != 1.0) spec = with_load_multiplier(spec, exp.load_multiplier);
  MetricsReport report = run(spec, lib, exp.sim);
  if (exp.fairness) {
    IsolatedRunCache local;
    compute_fairness(report, spec, lib, exp.sim, cache ? *cache : local);
  }
  return report;
}

}  // namespace gsched
