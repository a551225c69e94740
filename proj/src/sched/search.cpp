// Two-objective (fitness, cluster utility) evolutionary search over
// allocation matrices with non-dominated sorting and crowding-distance
// survival. The operators work on whole rows (jobs) and elements
// (job, node) of the matrix.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "gsched/error.hpp"
#include "gsched/sched.hpp"

namespace gsched {
namespace {

struct Individual {
  AllocationMatrix state;
  double fitness = 0.0;
  double utility = 0.0;
  int rank = 0;
  double crowding = 0.0;
};

struct CellsHash {
  std::size_t operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ULL;
    for (int x : v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

class Search {
 public:
  Search(const FitnessEvaluator& eval, std::uint64_t seed) : eval_(eval), rng_(seed) {
    const int jobs = eval.num_jobs();
    for (int j = 0; j < jobs; ++j) {
      if (eval.job(j).pinned) order_.push_back(j);
    }
    num_pinned_ = static_cast<int>(order_.size());
    for (int j = 0; j < jobs; ++j) {
      if (!eval.job(j).pinned) order_.push_back(j);
    }
  }

  // Pinned jobs keep priority; the rest are visited in random order so that
  // no job systematically loses conflicts.
  void shuffle_order() { std::shuffle(order_.begin() + num_pinned_, order_.end(), rng_); }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  int randint(int lo, int hi) {  // inclusive
    if (hi <= lo) return lo;
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  void repair(AllocationMatrix& a) {
    const int jobs = a.jobs();
    const int nodes = a.nodes();
    const auto& base = eval_.base();
    const auto& cfg = eval_.config();
    for (int j = 0; j < jobs; ++j) {
      if (eval_.job(j).pinned) std::copy(base.row(j).begin(), base.row(j).end(), a.row(j).begin());
    }
    if (cfg.interference_avoidance) {
      distributed_.assign(jobs, false);
      for (int j = 0; j < jobs; ++j) distributed_[j] = a.nodes_used(j) > 1;
      for (int n = 0; n < nodes; ++n) {
        int sharing = 0;
        for (int j = 0; j < jobs; ++j) sharing += distributed_[j] && a.at(j, n) > 0 ? 1 : 0;
        if (sharing < 2) continue;
        shuffle_order();
        bool taken = false;
        for (int j : order_) {
          if (!distributed_[j] || a.at(j, n) == 0) continue;
          if (taken && !eval_.job(j).pinned) a.at(j, n) = 0;
          taken = true;
        }
      }
    }
    for (int j = 0; j < jobs; ++j) {
      if (eval_.job(j).pinned) continue;
      const int max_rep = eval_.job(j).max_replicas;
      if (a.replicas(j) <= max_rep && a.nodes_used(j) <= cfg.max_nodes_per_job) continue;
      shuffle_.resize(nodes);
      std::iota(shuffle_.begin(), shuffle_.end(), 0);
      std::shuffle(shuffle_.begin(), shuffle_.end(), rng_);
      int total = 0, used = 0;
      for (int n : shuffle_) {
        int& v = a.at(j, n);
        if (v == 0) continue;
        if (used >= cfg.max_nodes_per_job || total >= max_rep) {
          v = 0;
          continue;
        }
        v = std::min(v, max_rep - total);
        total += v;
        ++used;
      }
    }
    const int nr = static_cast<int>(eval_.resource_types().size());
    remaining_.resize(nr);
    for (int n = 0; n < nodes; ++n) {
      bool over = false;
      for (int r = 0; r < nr && !over; ++r) {
        int demand = 0;
        for (int j = 0; j < jobs; ++j) demand += a.at(j, n) * eval_.job_resource(j, r);
        over = demand > eval_.node_resource(n, r);
      }
      if (!over) continue;
      for (int r = 0; r < nr; ++r) remaining_[r] = eval_.node_resource(n, r);
      shuffle_order();
      for (int j : order_) {
        int& v = a.at(j, n);
        if (v == 0) continue;
        int fit = v;
        for (int r = 0; r < nr; ++r) {
          const int demand = eval_.job_resource(j, r);
          if (demand > 0) fit = std::min(fit, std::max(remaining_[r], 0) / demand);
        }
        v = fit;
        for (int r = 0; r < nr; ++r) remaining_[r] -= v * eval_.job_resource(j, r);
      }
    }
    for (int j = 0; j < jobs; ++j) {
      if (a.replicas(j) < eval_.job(j).min_replicas) std::fill(a.row(j).begin(), a.row(j).end(), 0);
    }
  }

  void mutate(AllocationMatrix& a) {
    const int jobs = a.jobs();
    const int nodes = a.nodes();
    const auto& base = eval_.base();
    for (int j = 0; j < jobs; ++j) {
      if (uniform() < 0.1) std::copy(base.row(j).begin(), base.row(j).end(), a.row(j).begin());
    }
    for (int j = 0; j < jobs; ++j) {
      if (uniform() >= 0.1) continue;
      for (int n = 0; n < nodes; ++n) {
        if (uniform() < 0.1) a.at(j, n) = 0;
      }
    }
    const int nr = static_cast<int>(eval_.resource_types().size());
    free_.assign(static_cast<std::size_t>(nodes) * nr, 0);
    for (int n = 0; n < nodes; ++n) {
      for (int r = 0; r < nr; ++r) {
        int used = 0;
        for (int j = 0; j < jobs; ++j) used += a.at(j, n) * eval_.job_resource(j, r);
        free_[n * nr + r] = eval_.node_resource(n, r) - used;
      }
    }
    fits_.resize(nodes);
    for (int j = 0; j < jobs; ++j) {
      int c1 = 0, c2 = 0;
      for (int n = 0; n < nodes; ++n) {
        bool ok = true;
        for (int r = 0; r < nr && ok; ++r) ok = eval_.job_resource(j, r) <= free_[n * nr + r];
        fits_[n] = ok;
        c1 += ok ? 1 : 0;
        c2 += (ok && a.at(j, n) > 0) ? 1 : 0;
      }
      if (c1 == 0) continue;
      const double p1 = 1.0 / c1;
      const double p2 = c2 > 0 ? 1.0 / c2 : 0.0;
      for (int n = 0; n < nodes; ++n) {
        if (!fits_[n]) continue;
        const double q2 = a.at(j, n) > 0 ? p2 : 0.0;
        if (uniform() < p1 + q2 - p1 * q2) {
          const int cur = a.at(j, n);
          a.at(j, n) = randint(cur, std::max(cur, eval_.max_replicas_on(j, n)));
        }
      }
    }
  }

  void crossover(AllocationMatrix& x, AllocationMatrix& y) {
    const int point = randint(0, x.jobs() - 1);
    for (int j = 0; j < point; ++j) {
      auto rx = x.row(j);
      auto ry = y.row(j);
      std::swap_ranges(rx.begin(), rx.end(), ry.begin());
    }
  }

  void evaluate(Individual& ind) {
    ind.fitness = eval_.fitness(ind.state);
    ind.utility = eval_.utility(ind.state);
  }

 private:
  const FitnessEvaluator& eval_;
  std::mt19937_64 rng_;
  std::vector<int> order_;
  int num_pinned_ = 0;
  std::vector<bool> distributed_;
  std::vector<int> shuffle_, remaining_, free_;
  std::vector<bool> fits_;
};

bool dominates(const Individual& a, const Individual& b) {
  return a.fitness >= b.fitness && a.utility >= b.utility &&
         (a.fitness > b.fitness || a.utility > b.utility);
}

// Assigns rank and crowding distance; returns indices ordered by
// (rank asc, crowding desc, position asc).
std::vector<int> rank_and_crowd(std::vector<Individual>& pop) {
  const int n = static_cast<int>(pop.size());
  // Two objectives: after sorting by fitness (then utility) descending, an
  // individual can only be dominated by ones before it.
  std::vector<int> by_fit(n);
  std::iota(by_fit.begin(), by_fit.end(), 0);
  std::sort(by_fit.begin(), by_fit.end(), [&](int a, int b) {
    if (pop[a].fitness != pop[b].fitness) return pop[a].fitness > pop[b].fitness;
    if (pop[a].utility != pop[b].utility) return pop[a].utility > pop[b].utility;
    return a < b;
  });
  // Front f keeps the best utility seen among its members; an individual
  // joins the first front none of whose members dominates it.
  std::vector<std::vector<int>> fronts;
  for (int i : by_fit) {
    std::size_t f = 0;
    for (; f < fronts.size(); ++f) {
      bool dominated = false;
      for (int k : fronts[f]) {
        if (dominates(pop[k], pop[i])) {
          dominated = true;
          break;
        }
      }
      if (!dominated) break;
    }
    if (f == fronts.size()) fronts.emplace_back();
    fronts[f].push_back(i);
    pop[i].rank = static_cast<int>(f);
  }
  for (auto& front : fronts) {
    for (int i : front) pop[i].crowding = 0.0;
    if (front.size() <= 2) {
      for (int i : front) pop[i].crowding = std::numeric_limits<double>::infinity();
      continue;
    }
    for (int obj = 0; obj < 2; ++obj) {
      auto key = [&](int i) { return obj == 0 ? pop[i].fitness : pop[i].utility; };
      std::vector<int> sorted = front;
      std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
        if (key(a) != key(b)) return key(a) < key(b);
        return a < b;
      });
      const double span = key(sorted.back()) - key(sorted.front());
      pop[sorted.front()].crowding = std::numeric_limits<double>::infinity();
      pop[sorted.back()].crowding = std::numeric_limits<double>::infinity();
      if (span <= 0.0) continue;
      for (std::size_t t = 1; t + 1 < sorted.size(); ++t) {
        pop[sorted[t]].crowding += (key(sorted[t + 1]) - key(sorted[t - 1])) / span;
      }
    }
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (pop[a].rank != pop[b].rank) return pop[a].rank < pop[b].rank;
    if (pop[a].crowding != pop[b].crowding) return pop[a].crowding > pop[b].crowding;
    return a < b;
  });
  return idx;
}

}  // namespace

SearchResult search_allocations(std::span<const SchedJobInfo> jobs,
                                std::span<const NodeSpec> nodes, const FitnessConfig& cfg,
                                std::uint64_t seed, const SearchOptions& options,
                                const WarmStart* warm) {
  if (jobs.empty()) throw Error(ErrorCode::kEmptyInput, "search needs at least one job");
  if (nodes.empty()) throw Error(ErrorCode::kEmptyInput, "search needs at least one node");
  const FitnessEvaluator eval(jobs, nodes, cfg);
  Search search(eval, seed);
  const int num_jobs = eval.num_jobs();
  const int num_nodes = eval.num_nodes();
  const int pop_size = std::max(2, options.population);

  std::unordered_set<std::vector<int>, CellsHash> seen;
  std::vector<Individual> pop;
  auto admit = [&](Individual&& ind) {
    if (!seen.insert(ind.state.cells()).second) return false;
    search.evaluate(ind);
    pop.push_back(std::move(ind));
    return true;
  };

  Individual incumbent{eval.base()};
  search.repair(incumbent.state);
  search.evaluate(incumbent);
  Individual best = incumbent;
  Individual empty{AllocationMatrix(num_jobs, num_nodes)};
  search.repair(empty.state);
  search.evaluate(empty);
  if (empty.fitness > best.fitness) best = empty;

  admit(Individual{incumbent});
  if (warm != nullptr) {
    for (const auto& entry : *warm) {
      if (static_cast<int>(pop.size()) >= pop_size) break;
      Individual ind{eval.base()};
      for (int j = 0; j < num_jobs; ++j) {
        auto it = entry.find(jobs[j].id);
        if (it != entry.end() && static_cast<int>(it->second.size()) == num_nodes) {
          std::copy(it->second.begin(), it->second.end(), ind.state.row(j).begin());
        }
      }
      search.repair(ind.state);
      admit(std::move(ind));
    }
  }
  for (int attempts = 0; static_cast<int>(pop.size()) < pop_size && attempts < 20 * pop_size;
       ++attempts) {
    Individual ind{eval.base()};
    search.mutate(ind.state);
    search.repair(ind.state);
    admit(std::move(ind));
  }
  if (static_cast<int>(pop.size()) < pop_size) {
    // Tiny search spaces: fewer distinct matrices exist than the population
    // size, so allow repeats.
    const std::size_t distinct = pop.size();
    for (std::size_t i = 0; static_cast<int>(pop.size()) < pop_size; ++i) {
      Individual copy = pop[i % distinct];
      pop.push_back(std::move(copy));
    }
  }
  for (const auto& ind : pop) {
    if (ind.fitness > best.fitness) best = ind;
  }
  rank_and_crowd(pop);

  auto tournament = [&]() -> const Individual& {
    const auto& a = pop[search.randint(0, pop_size - 1)];
    const auto& b = pop[search.randint(0, pop_size - 1)];
    if (a.rank != b.rank) return a.rank < b.rank ? a : b;
    return a.crowding >= b.crowding ? a : b;
  };

  int gens = 0;
  int stale = 0;
  for (; gens < options.generations; ++gens) {
    const std::size_t before = pop.size();
    for (int attempts = 0;
         static_cast<int>(pop.size() - before) < pop_size && attempts < 4 * pop_size; ++attempts) {
      Individual x{tournament().state};
      Individual y{tournament().state};
      search.crossover(x.state, y.state);
      search.mutate(x.state);
      search.mutate(y.state);
      search.repair(x.state);
      search.repair(y.state);
      admit(std::move(x));
      admit(std::move(y));
    }
    bool improved = false;
    for (std::size_t i = before; i < pop.size(); ++i) {
      if (pop[i].fitness > best.fitness) {
        best = pop[i];
        improved = true;
      }
    }
    const auto order = rank_and_crowd(pop);
    std::vector<Individual> next;
    next.reserve(pop_size);
    for (int i = 0; i < pop_size && i < static_cast<int>(order.size()); ++i) {
      next.push_back(std::move(pop[order[i]]));
    }
    pop = std::move(next);
    rank_and_crowd(pop);
    stale = improved ? 0 : stale + 1;
    if (options.patience > 0 && stale >= options.patience) {
      ++gens;
      break;
    }
  }

  SearchResult result;
  result.best = best.state;
  result.fitness = best.fitness;
  result.utility = best.utility;
  result.generations_run = gens;
  for (const auto& ind : pop) {
    std::map<std::string, std::vector<int>> rows;
    for (int j = 0; j < num_jobs; ++j) {
      auto r = ind.state.row(j);
      rows.emplace(jobs[j].id, std::vector<int>(r.begin(), r.end()));
    }
    result.population.push_back(std::move(rows));
    if (ind.rank == 0) result.front.emplace_back(ind.fitness, ind.utility);
  }
  std::sort(result.front.begin(), result.front.end());
  result.front.erase(std::unique(result.front.begin(), result.front.end()), result.front.end());
  return result;
}

}  // namespace gsched
