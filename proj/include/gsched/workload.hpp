#pragma once

// Job traces and the synthetic workloads built from them.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gsched/profiles.hpp"

namespace gsched {

enum class Category { kSmall, kMedium, kLarge, kXLarge };

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

// Half-open GPU-hour buckets [0,1), [1,10), [10,100), [100,1000); values of
// 1000 or more are reported as XLarge.
Category categorize(double gpu_hours);

struct TraceJob {
  double submit_s = 0.0;
  int gpus = 1;
  double duration_s = 0.0;
  double gpu_hours() const { return gpus * duration_s / 3600.0; }
};

std::vector<TraceJob> parse_trace(const std::string& csv_text);
std::vector<TraceJob> load_trace(const std::string& path);
std::string trace_to_csv(const std::vector<TraceJob>& jobs);
void save_trace(const std::vector<TraceJob>& jobs, const std::string& path);

struct TraceGenOptions {
  int num_jobs = 160;
  double hours = 8.0;
  std::uint64_t seed = 0;
};

// Poisson arrivals over the window; category counts follow the workload mix
// (2% XLarge, 6% Large, 20% Medium, 72% Small, rounded); GPU-time is
// log-normal inside each bucket; GPU counts are drawn from a fixed
// distribution over {1, 2, 4, 8, 16}.
std::vector<TraceJob> generate_trace(const TraceGenOptions& options);

enum class ConfigMode { kPollux, kTuned, kRealistic };

std::string_view to_string(ConfigMode m);
ConfigMode config_mode_from_string(std::string_view s);

struct WorkloadJob {
  std::string id;
  double submit_s = 0.0;
  std::string model;
  Category category = Category::kSmall;
  ConfigMode mode = ConfigMode::kPollux;
  int gpus = 0;             // fixed GPU count, unused in pollux mode
  std::int64_t batch = 0;   // fixed total batch size, unused in pollux mode
};

struct WorkloadSpec {
  std::vector<WorkloadJob> jobs;
};

// Single-GPU runtime at M_0 to the model's target, in GPU-hours.
double model_gpu_hours(const ModelProfile& p);
Category model_category(const ModelProfile& p);

struct FixedConfig {
  int gpus = 1;
  std::int64_t batch = 1;
  double scaling = 1.0;  // achieved fraction of ideal (linear) scaling
};

// Goodput on `gpus` GPUs at total batch `batch`, relative to gpus times the
// single-GPU goodput at M_0, using throughput interpolated from the profile
// and the training-averaged efficiency (harmonic mean over the noise-scale
// schedule). Returns 0 when the batch cannot be realized.
double scaling_ratio(const ProfileLibrary& lib, const std::string& model, int gpus,
                     std::int64_t batch, int gpus_per_node = 4);

// Valid tuned configurations: for each GPU count (2-4, then whole nodes up
// to max_gpus) the batch with the best scaling ratio, kept when that ratio is
// within 50-80% of linear scaling. When no count qualifies the result is the
// single fallback {1 GPU, M_0} (or the largest count if every one scales
// above 80%).
std::vector<FixedConfig> tuned_configs(const ProfileLibrary& lib, const std::string& model, int max_gpus = 64,
                                       int gpus_per_node = 4);

// Tuned jobs draw their configuration uniformly from tuned_configs.
WorkloadSpec synthesize(const std::vector<TraceJob>& trace, const ProfileLibrary& lib,
                        std::uint64_t seed, ConfigMode mode, int max_gpus = 64);

// Divides every submission time by `multiplier` (> 0).
WorkloadSpec with_load_multiplier(const WorkloadSpec& spec, double multiplier);

std::string workload_to_json(const WorkloadSpec& spec);
WorkloadSpec workload_from_json(const std::string& text);

}  // namespace gsched
