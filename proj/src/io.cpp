#include "gsched/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gsched/error.hpp"

namespace gsched {
namespace {

using ojson = nlohmann::ordered_json;

ojson number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::json parse_or_throw(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": parse error at byte " + std::to_string(e.byte) +
                                       ": " + e.what());
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_to_csv(const MetricsReport& report) {
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
  std::string out = "job_id,category,submit_s,start_s,complete_s,jct_s,restarts,rho\n";
  for (const auto& j : report.jobs) {
    out += j.id + "," + std::string(to_string(j.category)) + "," + field(j.submit_s) + "," +
           field(j.start_s) + "," + field(j.complete_s) + "," + field(j.jct_s) + "," +
           std::to_string(j.restarts) + "," + field(j.rho) + "\n";
  }
  return out;
}

std::string summary_to_json(const Summary& s) {
  ojson j;
  j["avg_jct"] = number_or_null(s.avg_jct);
  j["p99_jct"] = number_or_null(s.p99_jct);
  j["makespan"] = number_or_null(s.makespan);
  j["avg_rho"] = number_or_null(s.avg_rho);
  j["max_rho"] = number_or_null(s.max_rho);
  return j.dump(2) + "\n";
}

std::string allocations_to_json(const std::map<std::string, std::vector<int>>& rows) {
  ojson j = ojson::object();
  for (const auto& [id, row] : rows) j[id] = row;
  return j.dump() + "\n";
}

std::map<std::string, std::vector<int>> allocations_from_json(const std::string& text) {
  const auto root = parse_or_throw(text, "allocation JSON");
  if (!root.is_object()) throw Error(ErrorCode::kParse, "allocation JSON: top level must be an object");
  std::map<std::string, std::vector<int>> rows;
  try {
    for (const auto& [id, row] : root.items()) rows[id] = row.get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("allocation JSON: ") + e.what());
  }
  return rows;
}

std::string params_to_json(const ThroughputParams& p) {
  ojson j;
  j["alpha_grad"] = p.alpha_grad;
  j["beta_grad"] = p.beta_grad;
  j["alpha_sync_local"] = p.alpha_sync_local;
  j["beta_sync_local"] = p.beta_sync_local;
  j["alpha_sync_node"] = p.alpha_sync_node;
  j["beta_sync_node"] = p.beta_sync_node;
  j["gamma"] = p.gamma;
  return j.dump(2) + "\n";
}

ThroughputParams params_from_json(const std::string& text) {
  const auto root = parse_or_throw(text, "parameter JSON");
  ThroughputParams p;
  try {
    p.alpha_grad = root.at("alpha_grad").get<double>();
    p.beta_grad = root.at("beta_grad").get<double>();
    p.alpha_sync_local = root.at("alpha_sync_local").get<double>();
    p.beta_sync_local = root.at("beta_sync_local").get<double>();
    p.alpha_sync_node = root.at("alpha_sync_node").get<double>();
    p.beta_sync_node = root.at("beta_sync_node").get<double>();
    p.gamma = root.at("gamma").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("parameter JSON: ") + e.what());
  }
  if (!p.within_bounds()) throw Error(ErrorCode::kInvalidArgument, "parameter JSON: values out of range");
  return p;
}

std::vector<ProfilePoint> fit_points_from_json(const std::string& text) {
  const auto root = parse_or_throw(text, "fit input JSON");
  const nlohmann::json* rows = &root;
  if (root.is_object()) {
    if (!root.contains("throughput")) throw Error(ErrorCode::kParse, "fit input JSON: missing 'throughput'");
    rows = &root.at("throughput");
  }
  if (!rows->is_array()) throw Error(ErrorCode::kParse, "fit input JSON: expected an array of rows");
  std::vector<ProfilePoint> pts;
  std::size_t i = 0;
  try {
    for (; i < rows->size(); ++i) {
      const auto& r = (*rows)[i];
      const int nodes = r.at("nodes").get<int>();
      const int gpus = r.at("gpus").get<int>();
      if (nodes < 1 || gpus < nodes) throw Error(ErrorCode::kParse, "invalid nodes/gpus");
      std::vector<int> a(nodes, 0);
      for (int g = 0; g < gpus; ++g) ++a[g % nodes];
      pts.push_back({AllocationVector(std::move(a)),
                     {r.at("per_gpu_batch").get<int>(), r.at("accum_steps").get<int>()},
                     r.at("t_iter_seconds").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "fit input JSON row " + std::to_string(i) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, "fit input JSON row " + std::to_string(i) + ": " + e.what());
  }
  return pts;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

}  // namespace gsched
