#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gsched/error.hpp"
#include "gsched/sched.hpp"

using namespace gsched;

namespace {

// Throughput proportional to GPUs and efficiency ~1: goodput is linear in K.
GoodputModel scalable_model() {
  GoodputModel g;
  g.params.alpha_grad = 0.0;
  g.params.beta_grad = 0.01;
  g.pgns = 1e300;
  g.init_batch = 1;
  g.max_per_gpu_batch = 64;
  return g;
}

GoodputModel typical_model(double pgns = 2000.0) {
  GoodputModel g;
  g.params.alpha_grad = 0.02;
  g.params.beta_grad = 0.0008;
  g.params.alpha_sync_local = 0.02;
  g.params.beta_sync_local = 0.002;
  g.params.alpha_sync_node = 0.1;
  g.params.beta_sync_node = 0.01;
  g.params.gamma = 1.5;
  g.pgns = pgns;
  g.init_batch = 128;
  g.max_batch = 8192;
  g.max_per_gpu_batch = 256;
  return g;
}

SchedJobInfo job(const std::string& id, GoodputModel g, std::vector<int> current = {}) {
  SchedJobInfo j;
  j.id = id;
  j.model = g;
  j.age = 1000.0;
  j.current_allocation = std::move(current);
  return j;
}

}  // namespace

TEST(FairShare, SingleJobOnLargeCluster) {
  const auto nodes = homogeneous_cluster(16, 4);
  std::vector<SchedJobInfo> jobs = {job("a", scalable_model())};
  const auto f = fair_share(jobs, nodes);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f[0].dominant_share, 1.0 / 64);
  EXPECT_EQ(f[0].replicas, 64);
  EXPECT_EQ(f[0].nodes, 1);
  EXPECT_GT(f[0].goodput, 0.0);
}

TEST(FairShare, OneGpuEachWhenJobsEqualGpus) {
  const auto nodes = homogeneous_cluster(16, 4);
  std::vector<SchedJobInfo> jobs;
  for (int i = 0; i < 64; ++i) jobs.push_back(job("j" + std::to_string(i), scalable_model()));
  for (const auto& f : fair_share(jobs, nodes)) EXPECT_EQ(f.replicas, 1);
}

TEST(FairShare, DominantResource) {
  std::vector<NodeSpec> nodes(2);
  for (auto& n : nodes) n.resources = {{kGpu, 4}, {"cpu", 32}};
  auto j = job("a", scalable_model());
  j.resources_per_replica = {{kGpu, 1}, {"cpu", 2}};
  std::vector<SchedJobInfo> jobs = {j};
  EXPECT_DOUBLE_EQ(fair_share(jobs, nodes)[0].dominant_share, 1.0 / 8);
  jobs[0].resources_per_replica = {{kGpu, 1}, {"cpu", 16}};
  EXPECT_DOUBLE_EQ(fair_share(jobs, nodes)[0].dominant_share, 16.0 / 64);
  jobs[0].resources_per_replica = {{kGpu, 1}, {"mem", 1}};
  EXPECT_THROW(fair_share(jobs, nodes), Error);
}

TEST(Speedup, Examples) {
  const auto nodes = homogeneous_cluster(4, 4);
  std::vector<SchedJobInfo> jobs = {job("a", scalable_model()), job("b", scalable_model()),
                                    job("c", scalable_model()), job("d", scalable_model())};
  const auto f = fair_share(jobs, nodes);
  ASSERT_EQ(f[0].replicas, 4);
  EXPECT_NEAR(speedup(jobs[0], AllocationVector({4, 0, 0, 0}), f[0]), 1.0, 1e-12);
  EXPECT_EQ(speedup(jobs[0], AllocationVector({0, 0, 0, 0}), f[0]), 0.0);
  EXPECT_NEAR(speedup(jobs[0], AllocationVector({4, 4, 0, 0}), f[0]), 2.0, 1e-9);
}

TEST(Speedup, InvariantToCommonGoodputScale) {
  const auto nodes = homogeneous_cluster(2, 4);
  auto g = typical_model();
  auto slow = g;
  for (double* v : {&slow.params.alpha_grad, &slow.params.beta_grad, &slow.params.alpha_sync_local,
                    &slow.params.beta_sync_local, &slow.params.alpha_sync_node, &slow.params.beta_sync_node}) {
    *v *= 5.0;
  }
  std::vector<SchedJobInfo> a = {job("a", g), job("b", g)}, b = {job("a", slow), job("b", slow)};
  AllocationMatrix m(2, 2);
  m.at(0, 0) = 3;
  m.at(1, 1) = 1;
  FitnessEvaluator ea(a, nodes, {}), eb(b, nodes, {});
  EXPECT_NEAR(ea.speedup(0, {3, 1}), eb.speedup(0, {3, 1}), 1e-9);
  EXPECT_NEAR(ea.fitness(m), eb.fitness(m), 1e-9);
}

TEST(ReallocFactor, Values) {
  SchedJobInfo j;
  j.age = 600;
  j.num_restarts = 1;
  EXPECT_NEAR(realloc_factor(j, 30), 570.0 / 630.0, 1e-12);
  j.num_restarts = 0;
  j.age = 1e9;
  EXPECT_NEAR(realloc_factor(j, 30), 1.0, 1e-6);
  j.age = 50;
  j.num_restarts = 3;
  EXPECT_EQ(realloc_factor(j, 30), 0.0);
  EXPECT_THROW(realloc_factor(j, -1), Error);
}

TEST(PowerMean, Definitions) {
  const double off = 1e-3;
  for (double p : {-5.0, -1.0, 0.0, 0.5, 1.0, 3.0}) {
    std::vector<double> same(7, 1.7);
    EXPECT_NEAR(power_mean_fitness(same, p), p == 0.0 ? 1.7 : 1.7 + off, 1e-12);
  }
  std::vector<double> s = {1.0, 3.0};
  EXPECT_NEAR(power_mean_fitness(s, 1.0), 2.0 + off, 1e-12);
  EXPECT_NEAR(power_mean_fitness(s, -1.0), 2.0 / (1.0 / (1.0 + off) + 1.0 / (3.0 + off)), 1e-12);
  EXPECT_NEAR(power_mean_fitness(s, -1.0), 1.5, 2e-3);
  EXPECT_NEAR(power_mean_fitness(s, 0.0), std::sqrt(3.0), 1e-12);
  std::vector<double> z = {0.0, 2.0};
  EXPECT_TRUE(std::isfinite(power_mean_fitness(z, -1.0)));
}

TEST(PowerMean, LimitAndMonotonicity) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> s(1 + i % 9);
    for (auto& v : s) v = u(rng);
    const double lo = *std::min_element(s.begin(), s.end());
    // min <= M_p <= min * n^(1/|p|) for p < 0, on the offset speedups.
    const double m50 = power_mean_fitness(s, -50.0);
    EXPECT_GE(m50, lo + 1e-3 - 1e-12);
    EXPECT_LE(m50, (lo + 1e-3) * std::pow(static_cast<double>(s.size()), 1.0 / 50.0) + 1e-12);
    const double before = power_mean_fitness(s, -1.0);
    s[i % s.size()] *= 0.5;
    EXPECT_LE(power_mean_fitness(s, -1.0), before + 1e-15);
  }
}

TEST(Fitness, ReallocPenaltyOnlyOnChangedRunningRows) {
  const auto nodes = homogeneous_cluster(1, 4);
  auto running = job("run", typical_model(), {2});
  running.age = 600;
  running.num_restarts = 1;
  auto fresh = job("new", typical_model());
  fresh.age = 0;
  std::vector<SchedJobInfo> jobs = {running, fresh};
  FitnessEvaluator ev(jobs, nodes, {});

  AllocationMatrix keep(2, 1), move(2, 1);
  keep.at(0, 0) = 2;
  keep.at(1, 0) = 2;
  move.at(0, 0) = 3;
  move.at(1, 0) = 1;
  std::vector<double> sk, sm;
  ev.penalized_speedups(keep, sk);
  ev.penalized_speedups(move, sm);
  EXPECT_NEAR(sk[0], ev.speedup(0, {2, 1}), 1e-12);
  EXPECT_NEAR(sk[1], ev.speedup(1, {2, 1}), 1e-12);  // first placement: no penalty
  EXPECT_NEAR(sm[0], ev.speedup(0, {3, 1}) * 570.0 / 630.0, 1e-12);
  EXPECT_NEAR(sm[1], ev.speedup(1, {1, 1}), 1e-12);
}

TEST(Utility, Examples) {
  const auto nodes = homogeneous_cluster(1, 4);
  std::vector<SchedJobInfo> jobs = {job("a", scalable_model())};
  AllocationMatrix full(1, 1), none(1, 1);
  full.at(0, 0) = 4;
  EXPECT_NEAR(cluster_utility(jobs, nodes, full), 1.0, 1e-9);
  EXPECT_EQ(cluster_utility(jobs, nodes, none), 0.0);
}

// Per-job utility is speedup x fair replicas / replicas, which is exactly 1
// for linear-scaling jobs, so the cluster utility is at most 1 for them.
TEST(Utility, BoundedForLinearJobs) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> g(0, 4);
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<SchedJobInfo> jobs = {job("a", scalable_model()), job("b", scalable_model()),
                                    job("c", scalable_model())};
  for (int i = 0; i < 200; ++i) {
    AllocationMatrix a(3, 2);
    int free0 = 4, free1 = 4;
    for (int j = 0; j < 3; ++j) {
      a.at(j, 0) = std::min(free0, g(rng));
      free0 -= a.at(j, 0);
      a.at(j, 1) = std::min(free1, g(rng));
      free1 -= a.at(j, 1);
    }
    const double u = cluster_utility(jobs, nodes, a);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0 + 1e-9);
  }
}

TEST(Validate, Violations) {
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<SchedJobInfo> jobs = {job("a", typical_model()), job("b", typical_model()),
                                    job("c", typical_model())};
  jobs[2].max_replicas = 2;
  jobs[1].min_replicas = 2;
  const ValidationOptions opt{true, 16};
  AllocationMatrix ok(3, 2);
  ok.at(0, 0) = 4;
  ok.at(1, 1) = 2;
  ok.at(2, 1) = 2;
  EXPECT_TRUE(validate(ok, jobs, nodes, opt).empty());
  EXPECT_NO_THROW(check_feasible(ok, jobs, nodes, opt));

  auto over = ok;
  over.at(0, 0) = 5;
  EXPECT_FALSE(validate(over, jobs, nodes, opt).empty());
  EXPECT_THROW(check_feasible(over, jobs, nodes, opt), Error);

  AllocationMatrix shared(3, 2);
  shared.at(0, 0) = 1;
  shared.at(0, 1) = 1;
  shared.at(1, 0) = 1;
  shared.at(1, 1) = 1;
  EXPECT_FALSE(validate(shared, jobs, nodes, opt).empty());
  EXPECT_TRUE(validate(shared, jobs, nodes, {false, 16}).empty());

  auto too_many = ok;
  too_many.at(2, 0) = 0;
  too_many.at(2, 1) = 2;
  too_many.at(0, 0) = 1;
  too_many.at(2, 0) = 3;
  EXPECT_FALSE(validate(too_many, jobs, nodes, opt).empty());

  auto too_few = ok;
  too_few.at(1, 1) = 1;
  EXPECT_FALSE(validate(too_few, jobs, nodes, opt).empty());

  AllocationMatrix wide(1, 2);
  wide.at(0, 0) = 1;
  wide.at(0, 1) = 1;
  std::vector<SchedJobInfo> one = {job("a", typical_model())};
  EXPECT_FALSE(validate(wide, one, nodes, {true, 1}).empty());
}

TEST(PackGpus, FewestNodes) {
  std::vector<int> free = {2, 4, 3, 4};
  EXPECT_EQ(pack_gpus(free, 3), (std::vector<int>{0, 0, 3, 0}));
  EXPECT_EQ(pack_gpus(free, 4), (std::vector<int>{0, 4, 0, 0}));
  const auto six = pack_gpus(free, 6);
  int used = 0, total = 0;
  for (std::size_t n = 0; n < six.size(); ++n) {
    used += six[n] > 0;
    total += six[n];
    EXPECT_LE(six[n], free[n]);
  }
  EXPECT_EQ(total, 6);
  EXPECT_EQ(used, 2);
  EXPECT_TRUE(pack_gpus(free, 14).empty());
}

TEST(AllocationMatrixType, Accessors) {
  AllocationMatrix a(2, 3);
  a.at(0, 0) = 2;
  a.at(0, 2) = 1;
  EXPECT_EQ(a.replicas(0), 3);
  EXPECT_EQ(a.nodes_used(0), 2);
  EXPECT_EQ(a.placement(0), (Placement{3, 2}));
  EXPECT_EQ(a.replicas(1), 0);
  const std::vector<int> row = {2, 0, 1};
  EXPECT_TRUE(a.row_equals(0, row));
  std::vector<SchedJobInfo> jobs = {job("a", typical_model(), {1, 0, 0}), job("b", typical_model())};
  const auto cur = current_matrix(jobs, 3);
  EXPECT_EQ(cur.at(0, 0), 1);
  EXPECT_EQ(cur.replicas(1), 0);
}
