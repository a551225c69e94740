#pragma once

// Serialization of simulator outputs, allocations and fitted parameters.

#include <map>
#include <string>
#include <vector>

#include "gsched/fitting.hpp"
#include "gsched/goodput.hpp"
#include "gsched/simulator.hpp"

namespace gsched {

// Columns job_id,category,submit_s,start_s,complete_s,jct_s,restarts,rho.
// Values that are not available (NaN) are written as empty fields.
std::string metrics_to_csv(const MetricsReport& report);

// {"avg_jct","p99_jct","makespan","avg_rho","max_rho"}; NaN becomes null.
std::string summary_to_json(const Summary& s);

std::string allocations_to_json(const std::map<std::string, std::vector<int>>& rows);
std::map<std::string, std::vector<int>> allocations_from_json(const std::string& text);

std::string params_to_json(const ThroughputParams& p);
ThroughputParams params_from_json(const std::string& text);

// Fit input: either a bare array of rows or an object with a "throughput"
// array, each row {nodes, gpus, per_gpu_batch, accum_steps, t_iter_seconds}.
// GPUs are spread evenly over the nodes.
std::vector<ProfilePoint> fit_points_from_json(const std::string& text);

// Shortest round-trip decimal form of a double.
std::string format_number(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace gsched
