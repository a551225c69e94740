#include "gsched/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gsched/error.hpp"

namespace gsched {

void ExplorationState::observe(Placement p) {
  if (p.gpus >= 2) seen_multi_gpu_ = true;
  if (p.nodes >= 2) seen_multi_node_ = true;
  if (p.gpus >= 3) seen_three_plus_gpus_ = true;
  if (p.nodes == 1 && p.gpus >= 2) seen_local_multi_gpu_ = true;
  if (p.nodes == 1 && p.gpus >= 3) seen_local_three_plus_ = true;
  if (p.nodes >= 2 && p.gpus >= 3) seen_node_three_plus_ = true;
  max_gpus_seen_ = std::max(max_gpus_seen_, p.gpus);
}

int allocation_cap(const ExplorationState& state) { return 2 * state.max_gpus_seen(); }

std::array<double, kNumThroughputParams> to_array(const ThroughputParams& p) {
  return {p.alpha_grad,      p.beta_grad,      p.alpha_sync_local, p.beta_sync_local,
          p.alpha_sync_node, p.beta_sync_node, p.gamma};
}

ThroughputParams from_array(const std::array<double, kNumThroughputParams>& x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5], x[6]};
}

std::array<bool, kNumThroughputParams> prior_mask(const ExplorationState& state) {
  return {true,
          true,
          state.seen_local_multi_gpu(),
          state.seen_local_three_plus(),
          state.seen_multi_node(),
          state.seen_node_three_plus(),
          true};
}

double rmsle(const ThroughputParams& params, std::span<const ProfilePoint> points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "rmsle needs at least one point");
  double acc = 0.0;
  for (const auto& pt : points) {
    if (!(pt.observed_t_iter > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "observed iteration time must be > 0");
    }
    const double pred = t_iter(params, pt.allocation, pt.batch);
    const double r = std::log(pred) - std::log(pt.observed_t_iter);
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

namespace {

constexpr int kMemory = 10;
constexpr double kFloorTime = 1e-12;

struct Sample {
  int gpus;
  int nodes;
  double m;
  double s;
  double log_obs;
};

// Mean squared log error and its gradient with respect to the raw
// (unscaled) parameter vector.
class LogErrorObjective {
 public:
  explicit LogErrorObjective(std::vector<Sample> samples) : samples_(std::move(samples)) {}

  double value_and_gradient(const std::array<double, kNumThroughputParams>& theta,
                            std::array<double, kNumThroughputParams>* grad) const {
    std::array<double, kNumThroughputParams> g{};
    double acc = 0.0;
    const double gamma = theta[6];
    for (const auto& smp : samples_) {
      const double tg = theta[0] + theta[1] * smp.m;
      double ts = 0.0;
      int sync_index = -1;  // 2 for local, 4 for node
      if (smp.gpus >= 2) {
        sync_index = smp.nodes <= 1 ? 2 : 4;
        ts = theta[sync_index] + theta[sync_index + 1] * (smp.gpus - 2);
      }
      const double hi = std::max(tg, ts);
      const double lo = std::min(tg, ts);
      double f = 0.0, df_dtg = 0.0, df_dts = 0.0, df_dgamma = 0.0;
      if (hi > 0.0) {
        const double rho = lo / hi;
        const double rg = std::pow(rho, gamma);
        const double base = 1.0 + rg;
        f = hi * std::pow(base, 1.0 / gamma);
        df_dtg = tg > 0.0 ? std::pow(tg / f, gamma - 1.0) : (gamma == 1.0 ? 1.0 : 0.0);
        df_dts = ts > 0.0 ? std::pow(ts / f, gamma - 1.0) : (gamma == 1.0 ? 1.0 : 0.0);
        double dlog = -std::log(base) / (gamma * gamma);
        if (rho > 0.0) dlog += rg * std::log(rho) / (gamma * base);
        df_dgamma = f * dlog;
      }
      double t = smp.s * tg + f;
      const bool floored = t < kFloorTime;
      if (floored) t = kFloorTime;
      const double r = std::log(t) - smp.log_obs;
      acc += r * r;
      if (grad != nullptr && !floored) {
        const double w = 2.0 * r / t;
        const double dt_dtg = smp.s + df_dtg;
        g[0] += w * dt_dtg;
        g[1] += w * dt_dtg * smp.m;
        if (sync_index >= 0) {
          g[sync_index] += w * df_dts;
          g[sync_index + 1] += w * df_dts * (smp.gpus - 2);
        }
        g[6] += w * df_dgamma;
      }
    }
    const double n = static_cast<double>(samples_.size());
    if (grad != nullptr) {
      for (auto& v : g) v /= n;
      *grad = g;
    }
    return acc / n;
  }

 private:
  std::vector<Sample> samples_;
};

// Projected L-BFGS over a box, working on the free coordinates only and in
// scaled units (theta_i = x_i * scale_i).
class BoxLbfgs {
 public:
  BoxLbfgs(const LogErrorObjective& obj, std::array<bool, kNumThroughputParams> free,
           std::array<double, kNumThroughputParams> scale)
      : obj_(obj), scale_(scale) {
    for (int i = 0; i < kNumThroughputParams; ++i) {
      if (free[i]) index_.push_back(i);
    }
    for (int i : index_) {
      lower_.push_back(i == 6 ? ThroughputParams::kMinGamma / scale_[i] : 0.0);
      upper_.push_back(i == 6 ? ThroughputParams::kMaxGamma / scale_[i]
                              : std::numeric_limits<double>::infinity());
    }
  }

  // Minimizes from theta0 (raw units); pinned coordinates are forced to 0.
  std::pair<std::array<double, kNumThroughputParams>, double> run(
      std::array<double, kNumThroughputParams> theta0, int max_iterations) const {
    const std::size_t n = index_.size();
    std::vector<double> x(n), g(n), d(n), xt(n), gt(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = std::clamp(theta0[index_[k]] / scale_[index_[k]], lower_[k], upper_[k]);
    }
    std::vector<std::vector<double>> mem_s, mem_y;
    std::vector<double> mem_rho;

    double f = eval(x, g);
    if (!std::isfinite(f)) return {expand(x), f};
    int stalled = 0;
    for (int it = 0; it < max_iterations && f > 1e-26; ++it) {
      double pg_inf = 0.0;
      std::vector<bool> active(n, false);
      for (std::size_t k = 0; k < n; ++k) {
        const bool at_lo = x[k] <= lower_[k] && g[k] > 0.0;
        const bool at_hi = x[k] >= upper_[k] && g[k] < 0.0;
        active[k] = at_lo || at_hi;
        if (!active[k]) pg_inf = std::max(pg_inf, std::abs(g[k]));
      }
      if (pg_inf < 1e-13) break;

      // Two-loop recursion restricted to the inactive coordinates.
      for (std::size_t k = 0; k < n; ++k) d[k] = active[k] ? 0.0 : -g[k];
      const std::size_t mcount = mem_s.size();
      std::vector<double> alpha(mcount);
      for (std::size_t j = mcount; j-- > 0;) {
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += mem_s[j][k] * d[k];
        alpha[j] = mem_rho[j] * dot;
        for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[j] * mem_y[j][k];
      }
      if (mcount > 0) {
        double sy = 0.0, yy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          sy += mem_s.back()[k] * mem_y.back()[k];
          yy += mem_y.back()[k] * mem_y.back()[k];
        }
        const double h0 = yy > 0.0 ? sy / yy : 1.0;
        for (auto& v : d) v *= h0;
      }
      for (std::size_t j = 0; j < mcount; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += mem_y[j][k] * d[k];
        const double beta = mem_rho[j] * dot;
        for (std::size_t k = 0; k < n; ++k) d[k] += mem_s[j][k] * (alpha[j] - beta);
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (active[k]) d[k] = 0.0;
      }
      double gd = 0.0;
      for (std::size_t k = 0; k < n; ++k) gd += g[k] * d[k];
      if (!(gd < 0.0)) {
        mem_s.clear();
        mem_y.clear();
        mem_rho.clear();
        for (std::size_t k = 0; k < n; ++k) d[k] = active[k] ? 0.0 : -g[k];
      }

      double step = 1.0;
      if (mem_s.empty()) {
        double dn = 0.0;
        for (double v : d) dn = std::max(dn, std::abs(v));
        if (dn > 0.0) step = std::min(1.0, 0.5 / dn);
      }
      bool accepted = false;
      double ft = f;
      for (int ls = 0; ls < 60; ++ls) {
        double decrease = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          xt[k] = std::clamp(x[k] + step * d[k], lower_[k], upper_[k]);
          decrease += g[k] * (xt[k] - x[k]);
        }
        if (decrease >= 0.0) {
          step *= 0.5;
          continue;
        }
        ft = eval(xt, gt);
        if (std::isfinite(ft) && ft <= f + 1e-4 * decrease) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;

      std::vector<double> sv(n), yv(n);
      double sy = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        sv[k] = xt[k] - x[k];
        yv[k] = gt[k] - g[k];
        sy += sv[k] * yv[k];
      }
      if (sy > 1e-300) {
        if (mem_s.size() == kMemory) {
          mem_s.erase(mem_s.begin());
          mem_y.erase(mem_y.begin());
          mem_rho.erase(mem_rho.begin());
        }
        mem_s.push_back(std::move(sv));
        mem_y.push_back(std::move(yv));
        mem_rho.push_back(1.0 / sy);
      }
      const double prev = f;
      x.swap(xt);
      g.swap(gt);
      f = ft;
      stalled = (prev - f) <= 1e-15 * prev ? stalled + 1 : 0;
      if (stalled >= 8) break;
    }
    return {expand(x), f};
  }

 private:
  std::array<double, kNumThroughputParams> expand(const std::vector<double>& x) const {
    std::array<double, kNumThroughputParams> theta{};
    for (std::size_t k = 0; k < index_.size(); ++k) theta[index_[k]] = x[k] * scale_[index_[k]];
    // gamma is never pinned, but keep a valid value if it were.
    if (std::find(index_.begin(), index_.end(), 6) == index_.end()) theta[6] = 1.0;
    return theta;
  }

  double eval(const std::vector<double>& x, std::vector<double>& g) const {
    const auto theta = expand(x);
    std::array<double, kNumThroughputParams> full{};
    const double f = obj_.value_and_gradient(theta, &full);
    for (std::size_t k = 0; k < index_.size(); ++k) g[k] = full[index_[k]] * scale_[index_[k]];
    return f;
  }

  const LogErrorObjective& obj_;
  std::array<double, kNumThroughputParams> scale_;
  std::vector<int> index_;
  std::vector<double> lower_, upper_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FitResult fit_throughput(std::span<const ProfilePoint> points, const ExplorationState& state,
                         const std::optional<ThroughputParams>& prev,
                         const FitOptions& options) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "fit_throughput needs at least one point");

  std::vector<Sample> samples;
  samples.reserve(points.size());
  std::vector<double> times, ms, extra;
  for (const auto& pt : points) {
    if (!(pt.observed_t_iter > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "observed iteration time must be > 0");
    }
    const auto p = Placement::of(pt.allocation);
    if (p.gpus < 1) throw Error(ErrorCode::kNoReplicas, "no replicas");
    samples.push_back({p.gpus, p.nodes, static_cast<double>(pt.batch.per_gpu_batch),
                       static_cast<double>(pt.batch.accum_steps), std::log(pt.observed_t_iter)});
    times.push_back(pt.observed_t_iter / (pt.batch.accum_steps + 1));
    ms.push_back(pt.batch.per_gpu_batch);
    if (p.gpus > 2) extra.push_back(p.gpus - 2);
  }
  const double t_scale = median(times);
  const double m_scale = std::max(1.0, median(ms));
  const double k_scale = extra.empty() ? 4.0 : std::max(1.0, median(extra));
  const std::array<double, kNumThroughputParams> scale = {
      t_scale, t_scale / m_scale, t_scale, t_scale / k_scale, t_scale, t_scale / k_scale, 1.0};

  const auto mask = prior_mask(state);
  const LogErrorObjective objective(std::move(samples));
  const BoxLbfgs solver(objective, mask, scale);

  auto masked = [&](std::array<double, kNumThroughputParams> theta) {
    for (int i = 0; i < kNumThroughputParams; ++i) {
      if (!mask[i]) theta[i] = 0.0;
    }
    theta[6] = std::clamp(theta[6], ThroughputParams::kMinGamma, ThroughputParams::kMaxGamma);
    return theta;
  };

  std::vector<std::array<double, kNumThroughputParams>> starts;
  if (prev) starts.push_back(masked(to_array(*prev)));
  starts.push_back(masked({0.2 * scale[0], 0.8 * scale[1], 0.1 * scale[2], 0.1 * scale[3],
                           0.2 * scale[4], 0.1 * scale[5], 1.5}));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.02, 1.5);
  std::uniform_real_distribution<double> gamma_dist(1.0, 4.0);
  while (static_cast<int>(starts.size()) < std::max(1, options.num_starts)) {
    std::array<double, kNumThroughputParams> theta{};
    for (int i = 0; i < 6; ++i) theta[i] = unit(rng) * scale[i];
    theta[6] = gamma_dist(rng);
    starts.push_back(masked(theta));
  }

  double best_f = std::numeric_limits<double>::infinity();
  std::array<double, kNumThroughputParams> best{};
  for (const auto& s : starts) {
    auto [theta, f] = solver.run(s, options.max_iterations);
    if (std::isfinite(f) && f < best_f) {
      best_f = f;
      best = theta;
    }
  }

  FitResult result;
  if (!std::isfinite(best_f)) {
    result.optimizer_failed = true;
    result.params = prev ? *prev : from_array(masked({0.0, t_scale / m_scale, 0, 0, 0, 0, 1.0}));
  } else {
    result.params = from_array(masked(best));
  }
  result.rmsle = rmsle(result.params, points);
  return result;
}

}  // namespace gsched
