// Synthetic stand-ins for the six benchmark workloads, one table each.
// Parameters are chosen so that single-GPU runtimes at M_0 fall in the
// intended size category and so that scalability and noise-scale growth
// differ between models.

#include <algorithm>
#include <cmath>
#include <random>

#include "gsched/error.hpp"
#include "gsched/profiles.hpp"

namespace gsched {

const std::vector<ReferenceModel>& reference_models() {
  static const std::vector<ReferenceModel> models = {
      // name, {a_g, b_g, a_local, b_local, a_node, b_node, gamma}, M0, max_batch, max_m,
      // |X|, epochs, phi_start, phi_end
      {"cifar10", {0.010, 0.00025, 0.020, 0.002, 0.030, 0.002, 1.5}, 128, 4096, 256, 50000, 100,
       200, 2000},
      {"ncf", {0.004, 0.00002, 0.010, 0.001, 0.030, 0.003, 1.2}, 256, 32768, 4096, 500000, 60, 500,
       1500},
      {"deepspeech2", {0.050, 0.020, 0.060, 0.008, 0.150, 0.010, 1.3}, 20, 640, 40, 12000, 40, 50,
       600},
      {"bert", {0.030, 0.030, 0.100, 0.008, 0.250, 0.020, 1.1}, 12, 384, 16, 88000, 2, 100, 150},
      {"yolov3", {0.050, 0.060, 0.100, 0.008, 0.300, 0.020, 1.2}, 8, 512, 8, 16551, 80, 20, 400},
      {"imagenet", {0.050, 0.0035, 0.100, 0.005, 0.250, 0.010, 2.0}, 200, 12800, 256, 1281167, 90,
       1000, 10000},
  };
  return models;
}

namespace {

std::vector<int> geometric_ints(int lo, int hi, int points) {
  std::vector<int> out;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out.push_back(static_cast<int>(std::lround(lo * std::pow(static_cast<double>(hi) / lo, t))));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

ModelProfile tabulate(const ReferenceModel& model, int max_nodes, int gpus_per_node, double noise,
                      std::uint64_t seed) {
  if (max_nodes < 1 || gpus_per_node < 1 || noise < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "tabulate needs positive cluster shape, noise >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelProfile p;
  p.dataset_size = model.dataset_size;
  p.m0 = model.m0;
  p.max_batch = model.max_batch;
  p.max_per_gpu_batch = model.max_per_gpu_batch;
  p.target_epochs = model.target_epochs;

  const auto ms = geometric_ints(1, model.max_per_gpu_batch, 5);
  const int max_gpus = max_nodes * gpus_per_node;
  for (int n = 1; n <= max_nodes; ++n) {
    for (int k = n; k <= std::min(gpus_per_node * n, max_gpus); ++k) {
      for (int m : ms) {
        // Iteration time is linear in s, so two accumulation settings span
        // the whole range exactly.
        for (int s : {0, kMaxAccumSteps}) {
          const double t = t_iter(model.params, Placement{k, n}, BatchConfig{m, s});
          const double jitter = noise > 0.0 ? std::exp(noise * normal(rng)) : 1.0;
          p.throughput.push_back({n, k, m, s, t * jitter});
        }
      }
    }
  }

  const auto batches = geometric_ints(static_cast<int>(model.m0), static_cast<int>(model.max_batch), 5);
  const double log_span = std::log(static_cast<double>(model.max_batch) / model.m0);
  for (int i = 0; i <= 10; ++i) {
    const double frac = i / 10.0;
    const double epoch = frac * model.target_epochs;
    const double base = model.phi_start * std::pow(model.phi_end / model.phi_start, frac);
    for (int b : batches) {
      // Measured noise scales drift mildly with the batch they were taken at.
      const double drift = log_span > 0.0 ? 0.1 * std::log(static_cast<double>(b) / model.m0) / log_span : 0.0;
      p.pgns.push_back({epoch, b, base * (1.0 + drift)});
    }
  }
  return p;
}

ProfileLibrary reference_library(int max_nodes, int gpus_per_node, double noise, std::uint64_t seed) {
  ProfileLibrary lib;
  std::uint64_t s = seed;
  for (const auto& m : reference_models()) {
    lib.add(m.name, tabulate(m, max_nodes, gpus_per_node, noise, s++));
  }
  return lib;
}

}  // namespace gsched
