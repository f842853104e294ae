#include <gtest/gtest.h>

#include <vector>

#include "chainsim/cluster.h"

using namespace chainsim;

namespace {

Container with_free_slots(ContainerId id, int batch, int occupied) {
  Container c;
  c.id = id;
  c.batch_size = batch;
  c.state = ContainerState::kWarm;
  for (int i = 0; i < occupied; ++i) c.local_queue.push_back(i);
  return c;
}

std::vector<Node> powered_nodes(const std::vector<double>& available) {
  std::vector<Node> nodes;
  for (size_t i = 0; i < available.size(); ++i) {
    Node n;
    n.id = static_cast<int>(i) + 1;
    n.total_cores = 16;
    n.allocated_cores = 16 - available[i];
    n.powered = true;
    nodes.push_back(n);
  }
  return nodes;
}

SpawnRequest half_core(int stage = 0) {
  SpawnRequest r;
  r.stage = stage;
  r.microservice_id = "S";
  r.cpu_demand = 0.5;
  return r;
}

}  // namespace

TEST(SelectContainer, LeastPositiveFreeSlots) {
  const Container a = with_free_slots(0, 4, 1);  // 3 free
  const Container b = with_free_slots(1, 4, 3);  // 1 free
  const Container c = with_free_slots(2, 4, 4);  // full
  const std::vector<const Container*> all = {&a, &b, &c};
  EXPECT_EQ(select_container(all), &b);
  EXPECT_EQ(select_container(all, ContainerSelection::kMostFreeSlots), &a);
  const std::vector<const Container*> full = {&c};
  EXPECT_EQ(select_container(full), nullptr);
}

TEST(SelectContainer, WarmBeforeColdAndLowestIdOnTies) {
  Container warm = with_free_slots(5, 4, 0);
  Container cold = with_free_slots(1, 4, 3);
  cold.state = ContainerState::kColdStarting;
  const std::vector<const Container*> mixed = {&cold, &warm};
  EXPECT_EQ(select_container(mixed), &warm);

  const Container x = with_free_slots(7, 2, 1), y = with_free_slots(3, 2, 1);
  const std::vector<const Container*> tie = {&x, &y};
  EXPECT_EQ(select_container(tie), &y);
}

TEST(SelectNode, GreedyPacksTightestFit) {
  EXPECT_EQ(select_node(powered_nodes({8, 0.5, 2}), 0.5), std::optional<size_t>(1));
  EXPECT_EQ(select_node(powered_nodes({0.25, 0.25}), 0.5), std::nullopt);
  EXPECT_EQ(select_node(powered_nodes({1, 1}), 0.5), std::optional<size_t>(0));
}

TEST(SelectNode, PoweredNodesFirst) {
  auto nodes = powered_nodes({16, 16});
  nodes[0].powered = false;
  EXPECT_EQ(select_node(nodes, 0.5), std::optional<size_t>(1));
  nodes[1].allocated_cores = 16;
  EXPECT_EQ(select_node(nodes, 0.5), std::optional<size_t>(0));
}

TEST(SelectNode, SpreadPicksMostAvailable) {
  EXPECT_EQ(select_node(powered_nodes({8, 0.5, 12}), 0.5, 0, NodeSelection::kSpread), std::optional<size_t>(2));
}

TEST(Energy, IdlePlusPerCore) {
  auto nodes = powered_nodes({0});  // 16 cores allocated
  EXPECT_NEAR(energy_step(nodes, 10000), (100 + 5 * 16) * 10.0, 1e-9);
  EXPECT_NEAR(energy_step(nodes, 10000), 1800, 1e-9);
  nodes[0].powered = false;
  EXPECT_EQ(energy_step(nodes, 10000), 0);
}

TEST(Cluster, ReapBoundaryIsInclusive) {
  ClusterConfig cfg;
  cfg.nodes = 1;
  Rng rng(1);
  Cluster cluster(cfg);
  for (double now : {599999.0, 600000.0}) {
    const auto id = cluster.spawn(half_core(), 0, rng);
    ASSERT_TRUE(id);
    Container& c = cluster.container(*id);
    c.state = ContainerState::kWarm;
    c.last_used = 0;
    const auto reaped = cluster.reap_idle(now, 600000);
    EXPECT_EQ(reaped.size(), now >= 600000 ? 1u : 0u) << now;
    if (reaped.empty()) cluster.reap(*id, now);
  }
}

TEST(Cluster, PinnedAndBusyContainersSurviveReaping) {
  ClusterConfig cfg;
  cfg.nodes = 1;
  Rng rng(1);
  Cluster cluster(cfg);
  SpawnRequest pinned = half_core();
  pinned.pinned = true;
  const auto a = cluster.spawn(pinned, 0, rng);
  const auto b = cluster.spawn(half_core(), 0, rng);
  for (auto id : {*a, *b}) cluster.container(id).state = ContainerState::kWarm;
  cluster.container(*b).executing = 3;
  EXPECT_TRUE(cluster.reap_idle(1e9, 1).empty());
}

TEST(Cluster, ConservationUnderRandomChurn) {
  ClusterConfig cfg;
  cfg.nodes = 3;
  cfg.cores_per_node = 4;
  Cluster cluster(cfg);
  Rng rng(42);
  std::vector<ContainerId> live;
  for (int step = 0; step < 2000; ++step) {
    const double now = step;
    if (live.empty() || rng.uniform() < 0.55) {
      SpawnRequest r = half_core();
      r.cpu_demand = 0.25 * static_cast<double>(1 + rng.next() % 4);
      if (auto id = cluster.spawn(r, now, rng)) {
        cluster.container(*id).state = ContainerState::kWarm;
        live.push_back(*id);
      }
    } else {
      const size_t k = rng.next() % live.size();
      cluster.reap(live[k], now);
      live.erase(live.begin() + static_cast<long>(k));
    }
    ASSERT_TRUE(cluster.conservation_holds()) << "step " << step;
    ASSERT_EQ(cluster.live_containers(), static_cast<int>(live.size()));
    for (const Node& n : cluster.nodes()) ASSERT_LE(n.allocated_cores, n.total_cores + 1e-9);
  }
}

TEST(Cluster, GreedyPlacementFillsOneNodeFirst) {
  ClusterConfig cfg;
  cfg.nodes = 4;
  cfg.cores_per_node = 2;
  Cluster cluster(cfg);
  Rng rng(1);
  for (int i = 0; i < 4; ++i) ASSERT_TRUE(cluster.spawn(half_core(), 0, rng));
  EXPECT_EQ(cluster.powered_nodes(), 1);
  EXPECT_NEAR(cluster.nodes()[0].allocated_cores, 2, 1e-12);
  ASSERT_TRUE(cluster.spawn(half_core(), 0, rng));
  EXPECT_EQ(cluster.powered_nodes(), 2);
}

TEST(Cluster, ColdStartDrawnFromRange) {
  ClusterConfig cfg;
  Cluster cluster(cfg);
  Rng rng(3);
  SpawnRequest r = half_core();
  r.cold_start_min_ms = 2000;
  r.cold_start_max_ms = 9000;
  for (int i = 0; i < 50; ++i) {
    const auto id = cluster.spawn(r, 100, rng);
    ASSERT_TRUE(id);
    const Container& c = cluster.container(*id);
    EXPECT_GE(c.ready_at, 2100);
    EXPECT_LE(c.ready_at, 9100);
    EXPECT_EQ(c.state, ContainerState::kColdStarting);
  }
}

TEST(Cluster, NodesPowerOffAfterDelay) {
  ClusterConfig cfg;
  cfg.nodes = 1;
  Cluster cluster(cfg);
  Rng rng(1);
  const auto id = cluster.spawn(half_core(), 0, rng);
  cluster.container(*id).state = ContainerState::kWarm;
  cluster.reap(*id, 1000);
  EXPECT_TRUE(cluster.power_off_idle_nodes(1000 + cfg.node_off_delay_ms - 1).empty());
  EXPECT_EQ(cluster.power_off_idle_nodes(1000 + cfg.node_off_delay_ms).size(), 1u);
  EXPECT_EQ(cluster.powered_nodes(), 0);
}
