#pragma once

// Measured (or synthesized) job profiles replayed by the simulator:
// iteration time per (nodes, GPUs, per-GPU batch, accumulation steps) and
// noise scale per (epoch, total batch).

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsched/fitting.hpp"
#include "gsched/goodput.hpp"

namespace gsched {

struct ThroughputSample {
  int nodes = 1;
  int gpus = 1;
  int per_gpu_batch = 1;
  int accum_steps = 0;
  double t_iter_seconds = 0.0;
};

struct PgnsSample {
  double epoch = 0.0;
  std::int64_t total_batch = 1;
  double phi = 0.0;
};

struct ModelProfile {
  std::vector<ThroughputSample> throughput;
  std::vector<PgnsSample> pgns;
  double dataset_size = 1.0;  // |X|, examples
  std::int64_t m0 = 1;
  std::int64_t max_batch = 1;
  int max_per_gpu_batch = 1;
  double target_epochs = 1.0;  // statistical epochs to completion
};

// Throughput rows as fit observations, GPUs spread evenly over nodes. Tables
// larger than max_points are subsampled with a fixed-seed uniform draw.
std::vector<ProfilePoint> profile_fit_points(const ModelProfile& profile, std::size_t max_points = 400);

class ProfileLibrary {
 public:
  // Validates and indexes the profile; throws kInvalidArgument on empty
  // tables, non-positive times or negative noise scales.
  void add(const std::string& name, ModelProfile profile);

  bool contains(const std::string& name) const { return models_.count(name) > 0; }
  const ModelProfile& at(const std::string& name) const;
  std::vector<std::string> names() const;

  // Multilinear interpolation over the four table axes. Queries outside the
  // table hull are clamped to its faces and `clamped` is set. Corners absent
  // from a sparse table are dropped and the remaining weights renormalized;
  // if none remain the nearest table point is used.
  double interpolate_throughput(const std::string& model, Placement placement, BatchConfig batch,
                                bool* clamped = nullptr) const;

  // Linear in epoch and total batch between the nearest table entries,
  // clamped to the table range.
  double interpolate_pgns(const std::string& model, double epoch, std::int64_t total_batch) const;

 private:
  struct Index {
    std::vector<double> axes[4];  // nodes, gpus, m, s
    std::unordered_map<std::uint64_t, double> cells;
    std::vector<double> epochs, batches;
    std::vector<double> phi;  // epochs x batches, NaN where absent
  };
  std::map<std::string, ModelProfile> models_;
  std::map<std::string, Index> index_;
};

ProfileLibrary load_profiles(const std::string& path);
void save_profiles(const ProfileLibrary& lib, const std::string& path);
std::string profiles_to_json(const ProfileLibrary& lib);
ProfileLibrary profiles_from_json(const std::string& text);

// Bundled synthetic reference models, one or two per size category.
struct ReferenceModel {
  std::string name;
  ThroughputParams params;
  std::int64_t m0;
  std::int64_t max_batch;
  int max_per_gpu_batch;
  double dataset_size;
  double target_epochs;
  double phi_start;  // noise scale at epoch 0
  double phi_end;    // noise scale at the target epoch
};

const std::vector<ReferenceModel>& reference_models();

// Tabulates a reference model over nodes 1..max_nodes (GPUs n..gpus_per_node*n),
// a geometric grid of per-GPU batch sizes, accumulation steps {0, 3, 15} and
// the noise-scale schedule. `noise` is the standard deviation of
// multiplicative log-normal measurement noise on iteration times.
ModelProfile tabulate(const ReferenceModel& model, int max_nodes, int gpus_per_node,
                      double noise, std::uint64_t seed);

ProfileLibrary reference_library(int max_nodes = 16, int gpus_per_node = 4, double noise = 0.02,
                                 std::uint64_t seed = 1);

}  // namespace gsched
