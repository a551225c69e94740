#include "gsched/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gsched/error.hpp"

namespace gsched {
namespace {

std::uint64_t cell_key(int nodes, int gpus, int m, int s) {
  return (static_cast<std::uint64_t>(nodes) << 48) | (static_cast<std::uint64_t>(gpus) << 32) |
         (static_cast<std::uint64_t>(m) << 8) | static_cast<std::uint64_t>(s);
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct Bracket {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double w = 0.0;  // weight of hi
};

Bracket bracket(const std::vector<double>& axis, double q, bool* clamped) {
  if (q <= axis.front()) {
    if (q < axis.front() && clamped) *clamped = true;
    return {0, 0, 0.0};
  }
  if (q >= axis.back()) {
    if (q > axis.back() && clamped) *clamped = true;
    return {axis.size() - 1, axis.size() - 1, 0.0};
  }
  const auto it = std::upper_bound(axis.begin(), axis.end(), q);
  const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  const std::size_t lo = hi - 1;
  if (axis[lo] == q) return {lo, lo, 0.0};
  return {lo, hi, (q - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

void ProfileLibrary::add(const std::string& name, ModelProfile profile) {
  if (profile.throughput.empty() || profile.pgns.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "profile '" + name + "' has an empty table");
  }
  if (profile.m0 < 1 || profile.max_batch < profile.m0 || profile.max_per_gpu_batch < 1 ||
      !(profile.dataset_size > 0.0) || !(profile.target_epochs > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "profile '" + name + "' has invalid limits");
  }
  Index idx;
  std::vector<double> axes[4];
  for (const auto& t : profile.throughput) {
    if (!(t.t_iter_seconds > 0.0) || t.nodes < 1 || t.gpus < t.nodes || t.per_gpu_batch < 1 ||
        t.accum_steps < 0) {
      throw Error(ErrorCode::kInvalidArgument, "profile '" + name + "' has an invalid throughput row");
    }
    axes[0].push_back(t.nodes);
    axes[1].push_back(t.gpus);
    axes[2].push_back(t.per_gpu_batch);
    axes[3].push_back(t.accum_steps);
    idx.cells[cell_key(t.nodes, t.gpus, t.per_gpu_batch, t.accum_steps)] = t.t_iter_seconds;
  }
  for (int d = 0; d < 4; ++d) idx.axes[d] = sorted_unique(std::move(axes[d]));
  std::vector<double> es, bs;
  for (const auto& p : profile.pgns) {
    if (!(p.phi >= 0.0) || p.total_batch < 1 || p.epoch < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "profile '" + name + "' has an invalid pgns row");
    }
    es.push_back(p.epoch);
    bs.push_back(static_cast<double>(p.total_batch));
  }
  idx.epochs = sorted_unique(std::move(es));
  idx.batches = sorted_unique(std::move(bs));
  idx.phi.assign(idx.epochs.size() * idx.batches.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& p : profile.pgns) {
    const auto e = std::lower_bound(idx.epochs.begin(), idx.epochs.end(), p.epoch) - idx.epochs.begin();
    const auto b = std::lower_bound(idx.batches.begin(), idx.batches.end(),
                                    static_cast<double>(p.total_batch)) - idx.batches.begin();
    idx.phi[e * idx.batches.size() + b] = p.phi;
  }
  index_[name] = std::move(idx);
  models_[name] = std::move(profile);
}

std::vector<ProfilePoint> profile_fit_points(const ModelProfile& profile, std::size_t max_points) {
  std::vector<ThroughputSample> rows;
  if (profile.throughput.size() <= max_points) {
    rows = profile.throughput;
  } else {
    std::mt19937_64 rng(0x5eed);
    std::sample(profile.throughput.begin(), profile.throughput.end(), std::back_inserter(rows), max_points, rng);
  }
  std::vector<ProfilePoint> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<int> a(r.nodes, 0);
    for (int g = 0; g < r.gpus; ++g) ++a[g % r.nodes];
    pts.push_back({AllocationVector(std::move(a)), {r.per_gpu_batch, r.accum_steps}, r.t_iter_seconds});
  }
  return pts;
}

const ModelProfile& ProfileLibrary::at(const std::string& name) const {
  auto it = models_.find(name);
  if (it == models_.end()) throw Error(ErrorCode::kUnknownModel, "unknown model '" + name + "'");
  return it->second;
}

std::vector<std::string> ProfileLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : models_) out.push_back(k);
  return out;
}

double ProfileLibrary::interpolate_throughput(const std::string& model, Placement placement,
                                              BatchConfig batch, bool* clamped) const {
  auto it = index_.find(model);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownModel, "unknown model '" + model + "'");
  const Index& idx = it->second;
  if (clamped) *clamped = false;
  const double q[4] = {static_cast<double>(placement.nodes), static_cast<double>(placement.gpus),
                       static_cast<double>(batch.per_gpu_batch),
                       static_cast<double>(batch.accum_steps)};
  Bracket br[4];
  for (int d = 0; d < 4; ++d) br[d] = bracket(idx.axes[d], q[d], clamped);

  double acc = 0.0, wsum = 0.0;
  for (int corner = 0; corner < 16; ++corner) {
    double w = 1.0;
    std::size_t pick[4];
    for (int d = 0; d < 4; ++d) {
      const bool high = (corner >> d) & 1;
      if (high && br[d].hi == br[d].lo) {
        w = 0.0;
        break;
      }
      pick[d] = high ? br[d].hi : br[d].lo;
      w *= high ? br[d].w : 1.0 - br[d].w;
    }
    if (w <= 0.0) continue;
    const auto cell = idx.cells.find(cell_key(static_cast<int>(idx.axes[0][pick[0]]),
                                              static_cast<int>(idx.axes[1][pick[1]]),
                                              static_cast<int>(idx.axes[2][pick[2]]),
                                              static_cast<int>(idx.axes[3][pick[3]])));
    if (cell == idx.cells.end()) continue;
    acc += w * cell->second;
    wsum += w;
  }
  if (wsum > 0.0) return acc / wsum;

  // Nothing bracketing the query exists: nearest point in log-scaled space.
  if (clamped) *clamped = true;
  const auto& rows = models_.at(model).throughput;
  double best = std::numeric_limits<double>::infinity();
  double value = rows.front().t_iter_seconds;
  for (const auto& r : rows) {
    const double dn = std::log(static_cast<double>(r.nodes) / std::max(1, placement.nodes));
    const double dg = std::log(static_cast<double>(r.gpus) / std::max(1, placement.gpus));
    const double dm = std::log(static_cast<double>(r.per_gpu_batch) / std::max(1, batch.per_gpu_batch));
    const double ds = (r.accum_steps - batch.accum_steps) / 16.0;
    const double d = dn * dn + dg * dg + dm * dm + ds * ds;
    if (d < best) {
      best = d;
      value = r.t_iter_seconds;
    }
  }
  return value;
}

double ProfileLibrary::interpolate_pgns(const std::string& model, double epoch,
                                        std::int64_t total_batch) const {
  auto it = index_.find(model);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownModel, "unknown model '" + model + "'");
  const Index& idx = it->second;
  const Bracket be = bracket(idx.epochs, epoch, nullptr);
  const Bracket bb = bracket(idx.batches, static_cast<double>(total_batch), nullptr);
  const std::size_t nb = idx.batches.size();
  double acc = 0.0, wsum = 0.0;
  for (int corner = 0; corner < 4; ++corner) {
    const bool he = corner & 1, hb = corner & 2;
    if ((he && be.hi == be.lo) || (hb && bb.hi == bb.lo)) continue;
    const double w = (he ? be.w : 1.0 - be.w) * (hb ? bb.w : 1.0 - bb.w);
    if (w <= 0.0) continue;
    const double v = idx.phi[(he ? be.hi : be.lo) * nb + (hb ? bb.hi : bb.lo)];
    if (std::isnan(v)) continue;
    acc += w * v;
    wsum += w;
  }
  if (wsum > 0.0) return acc / wsum;
  const auto& rows = models_.at(model).pgns;
  double best = std::numeric_limits<double>::infinity();
  double value = rows.front().phi;
  for (const auto& r : rows) {
    const double de = r.epoch - epoch;
    const double db = std::log(static_cast<double>(r.total_batch) / std::max<std::int64_t>(1, total_batch));
    const double d = de * de + db * db;
    if (d < best) {
      best = d;
      value = r.phi;
    }
  }
  return value;
}

std::string profiles_to_json(const ProfileLibrary& lib) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (const auto& name : lib.names()) {
    const auto& p = lib.at(name);
    nlohmann::ordered_json m;
    auto thr = nlohmann::ordered_json::array();
    for (const auto& t : p.throughput) {
      thr.push_back({{"nodes", t.nodes},
                     {"gpus", t.gpus},
                     {"per_gpu_batch", t.per_gpu_batch},
                     {"accum_steps", t.accum_steps},
                     {"t_iter_seconds", t.t_iter_seconds}});
    }
    auto pg = nlohmann::ordered_json::array();
    for (const auto& s : p.pgns) {
      pg.push_back({{"epoch", s.epoch}, {"total_batch", s.total_batch}, {"phi", s.phi}});
    }
    m["throughput"] = std::move(thr);
    m["pgns"] = std::move(pg);
    m["dataset_size"] = p.dataset_size;
    m["m0"] = p.m0;
    m["max_batch"] = p.max_batch;
    m["max_per_gpu_batch"] = p.max_per_gpu_batch;
    m["target_epochs"] = p.target_epochs;
    root[name] = std::move(m);
  }
  // One table row per line keeps the bundled file diffable.
  std::ostringstream out;
  out << "{\n";
  bool first_model = true;
  for (const auto& [name, m] : root.items()) {
    if (!first_model) out << ",\n";
    first_model = false;
    out << "  " << nlohmann::json(name).dump() << ": {\n";
    bool first_field = true;
    for (const auto& [field, value] : m.items()) {
      if (!first_field) out << ",\n";
      first_field = false;
      out << "    " << nlohmann::json(field).dump() << ": ";
      if (value.is_array()) {
        out << "[\n";
        for (std::size_t i = 0; i < value.size(); ++i) {
          out << "      " << value[i].dump() << (i + 1 < value.size() ? ",\n" : "\n");
        }
        out << "    ]";
      } else {
        out << value.dump();
      }
    }
    out << "\n  }";
  }
  out << "\n}\n";
  return out.str();
}

ProfileLibrary profiles_from_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("profile JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::kParse, "profile JSON: top level must be an object");
  ProfileLibrary lib;
  for (const auto& [name, m] : root.items()) {
    try {
      ModelProfile p;
      for (const auto& t : m.at("throughput")) {
        p.throughput.push_back({t.at("nodes").get<int>(), t.at("gpus").get<int>(),
                                t.at("per_gpu_batch").get<int>(), t.at("accum_steps").get<int>(),
                                t.at("t_iter_seconds").get<double>()});
      }
      for (const auto& s : m.at("pgns")) {
        p.pgns.push_back({s.at("epoch").get<double>(), s.at("total_batch").get<std::int64_t>(),
                          s.at("phi").get<double>()});
      }
      p.dataset_size = m.at("dataset_size").get<double>();
      p.m0 = m.at("m0").get<std::int64_t>();
      p.max_batch = m.at("max_batch").get<std::int64_t>();
      p.max_per_gpu_batch = m.at("max_per_gpu_batch").get<int>();
      p.target_epochs = m.at("target_epochs").get<double>();
      lib.add(name, std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "profile '" + name + "': " + e.what());
    }
  }
  return lib;
}

ProfileLibrary load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open profile file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return profiles_from_json(ss.str());
}

void save_profiles(const ProfileLibrary& lib, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write profile file '" + path + "'");
  out << profiles_to_json(lib);
}

}  // namespace gsched
