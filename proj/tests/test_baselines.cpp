#include <gtest/gtest.h>

#include <random>

#include "gsched/sched.hpp"

using namespace gsched;

namespace {

bool node_usage_ok(const AllocationMatrix& a, std::span<const NodeSpec> nodes) {
  for (int n = 0; n < a.nodes(); ++n) {
    int used = 0;
    for (int j = 0; j < a.jobs(); ++j) {
      if (a.at(j, n) < 0) return false;
      used += a.at(j, n);
    }
    if (used > nodes[n].capacity(kGpu)) return false;
  }
  return true;
}

TiresiasJob tj(const std::string& id, int gpus, double attained, double submit) {
  TiresiasJob j;
  j.id = id;
  j.requested_gpus = gpus;
  j.attained_gpu_seconds = attained;
  j.submit_time = submit;
  return j;
}

OptimusJob oj(const std::string& id, ThroughputParams p, std::int64_t batch, double remaining) {
  OptimusJob j;
  j.id = id;
  j.params = p;
  j.max_per_gpu_batch = 256;
  j.batch_size = batch;
  j.remaining_examples = remaining;
  return j;
}

}  // namespace

TEST(Tiresias, SingleJobColocated) {
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<TiresiasJob> jobs = {tj("a", 4, 0, 0)};
  const auto a = tiresias_policy(jobs, nodes);
  EXPECT_EQ(a.replicas(0), 4);
  EXPECT_EQ(a.nodes_used(0), 1);
}

TEST(Tiresias, DemotedJobYieldsToFreshJob) {
  const auto nodes = homogeneous_cluster(1, 4);
  std::vector<TiresiasJob> jobs = {tj("old", 4, 2 * kDefaultTiresiasThreshold, 0), tj("new", 4, 0, 100)};
  jobs[0].current_allocation = {4};
  const auto a = tiresias_policy(jobs, nodes);
  EXPECT_EQ(a.replicas(0), 0);
  EXPECT_EQ(a.replicas(1), 4);
  // Below the threshold both are in the first queue and submission order wins.
  jobs[0].attained_gpu_seconds = 10;
  const auto b = tiresias_policy(jobs, nodes);
  EXPECT_EQ(b.replicas(0), 4);
  EXPECT_EQ(b.replicas(1), 0);
}

TEST(Tiresias, SkipsJobsThatDoNotFit) {
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<TiresiasJob> jobs = {tj("a", 6, 0, 0), tj("b", 4, 0, 1), tj("c", 1, 0, 2)};
  const auto a = tiresias_policy(jobs, nodes);
  EXPECT_EQ(a.replicas(0), 6);
  EXPECT_EQ(a.replicas(1), 0);
  EXPECT_EQ(a.replicas(2), 1);
}

TEST(Tiresias, AlwaysFeasible) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> g(1, 16), nn(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto nodes = homogeneous_cluster(nn(rng), 4);
    std::vector<TiresiasJob> jobs;
    for (int j = 0; j < 12; ++j) jobs.push_back(tj("j" + std::to_string(j), g(rng), u(rng) * 60000, u(rng) * 100));
    const auto a = tiresias_policy(jobs, nodes);
    EXPECT_TRUE(node_usage_ok(a, nodes));
    for (int j = 0; j < a.jobs(); ++j) {
      EXPECT_TRUE(a.replicas(j) == 0 || a.replicas(j) == jobs[j].requested_gpus);
    }
  }
}

TEST(Optimus, ScalableJobTakesAllGpus) {
  ThroughputParams p;
  p.beta_grad = 0.001;
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<OptimusJob> jobs = {oj("a", p, 1024, 1e6)};
  EXPECT_EQ(optimus_policy(jobs, nodes).replicas(0), 8);
  jobs[0].max_gpus = 3;
  EXPECT_EQ(optimus_policy(jobs, nodes).replicas(0), 3);
}

TEST(Optimus, SyncDominatedJobStopsEarly) {
  ThroughputParams p;
  p.alpha_grad = 0.01;
  p.beta_grad = 0.0001;
  p.alpha_sync_local = 0.5;
  p.alpha_sync_node = 2.0;
  p.gamma = 1.0;
  const auto nodes = homogeneous_cluster(4, 4);
  std::vector<OptimusJob> jobs = {oj("a", p, 64, 1e6)};
  const auto a = optimus_policy(jobs, nodes);
  EXPECT_GE(a.replicas(0), 1);
  EXPECT_LT(a.replicas(0), 16);
}

TEST(Optimus, GreedyFavoursLargerGainAndStaysFeasible) {
  ThroughputParams fast;
  fast.beta_grad = 0.001;
  ThroughputParams slow = fast;
  slow.alpha_sync_local = 0.05;
  slow.alpha_sync_node = 0.2;
  const auto nodes = homogeneous_cluster(2, 4);
  std::vector<OptimusJob> jobs = {oj("long", fast, 512, 1e7), oj("short", slow, 512, 1e4)};
  const auto a = optimus_policy(jobs, nodes);
  EXPECT_TRUE(node_usage_ok(a, nodes));
  EXPECT_GT(a.replicas(0), a.replicas(1));
  EXPECT_GE(a.replicas(1), 1);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<OptimusJob> many;
    for (int j = 0; j < 10; ++j) {
      ThroughputParams q;
      q.alpha_grad = 0.05 * u(rng);
      q.beta_grad = 0.002 * u(rng) + 1e-5;
      q.alpha_sync_local = 0.1 * u(rng);
      q.alpha_sync_node = 0.5 * u(rng);
      q.gamma = 1 + u(rng);
      many.push_back(oj("j" + std::to_string(j), q, 32 + static_cast<int>(u(rng) * 1000), 1e6 * u(rng)));
    }
    const auto b = optimus_policy(many, nodes);
    EXPECT_TRUE(node_usage_ok(b, nodes));
  }
}
