#pragma once

// Containers, nodes, placement, idle reaping and the node power model.

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chainsim/domain.h"
#include "chainsim/rng.h"

namespace chainsim {

using ContainerId = int;
using RequestId = int;

enum class ContainerState { kColdStarting, kWarm, kReaped };

struct Container {
  ContainerId id = -1;
  int stage = -1;              // engine stage (one per microservice)
  std::string microservice_id;
  int batch_size = 1;
  ContainerState state = ContainerState::kColdStarting;
  double spawned_at = 0;
  double ready_at = 0;
  double last_used = 0;
  double reaped_at = -1;
  int node_id = 0;             // 1-based
  double cpu_demand = 0;
  double mem_demand = 0;
  bool pinned = false;         // exempt from idle reaping
  std::deque<RequestId> local_queue;
  std::optional<RequestId> executing;
  long executed = 0;

  int occupancy() const { return static_cast<int>(local_queue.size()) + (executing ? 1 : 0); }
  int free_slots() const { return batch_size - occupancy(); }
  bool live() const { return state != ContainerState::kReaped; }
  bool idle() const { return state == ContainerState::kWarm && occupancy() == 0; }
};

struct Node {
  int id = 0;                  // 1..n
  double total_cores = 16;
  double allocated_cores = 0;
  double total_mem = 96.0 * 1024 * 1024 * 1024;
  double allocated_mem = 0;
  bool powered = false;
  double power_idle_w = 100;
  double power_per_core_w = 5;
  double zero_since = 0;       // when allocation last dropped to zero

  double available_cores() const { return total_cores - allocated_cores; }
  bool fits(double cpu, double mem) const {
    return available_cores() + 1e-9 >= cpu && total_mem - allocated_mem + 1e-9 >= mem;
  }
};

enum class ContainerSelection { kLeastFreeSlots, kMostFreeSlots };
enum class NodeSelection { kGreedyPack, kSpread };

// Least positive free slots, ties to the lowest id. Warm containers are
// preferred; cold-starting ones are used only if no warm container has room.
const Container* select_container(std::span<const Container* const> containers,
                                  ContainerSelection mode = ContainerSelection::kLeastFreeSlots);

// Greedy: fewest available cores among powered nodes that fit, ties to the
// lowest id; a powered-off node is switched on only if no powered node fits.
// Spread: most available cores over all nodes (powered or not).
// Returns an index into `nodes`.
std::optional<size_t> select_node(std::span<const Node> nodes, double cpu_demand, double mem_demand = 0,
                                  NodeSelection mode = NodeSelection::kGreedyPack);

// Joules drawn by powered nodes over interval_ms at their current allocation.
double energy_step(std::span<const Node> nodes, double interval_ms);

struct ClusterConfig {
  int nodes = 5;
  double cores_per_node = 16;
  double mem_per_node_bytes = 96.0 * 1024 * 1024 * 1024;
  double power_idle_w = 100;
  double power_per_core_w = 5;
  double node_off_delay_ms = 60000;
  bool nodes_start_powered = false;

  double total_cores() const { return nodes * cores_per_node; }
  void validate() const;
};

struct SpawnRequest {
  int stage = -1;
  std::string microservice_id;
  int batch_size = 1;
  double cold_start_min_ms = 0;
  double cold_start_max_ms = 0;
  double cpu_demand = 0.5;
  double mem_demand = 0;
  bool pinned = false;
};

class Cluster {
 public:
  explicit Cluster(const ClusterConfig& config);

  // Places a new cold-starting container, or returns nullopt when no node fits.
  std::optional<ContainerId> spawn(const SpawnRequest& request, double now, Rng& rng,
                                   NodeSelection placement = NodeSelection::kGreedyPack);

  // Reaps warm, unpinned containers idle for at least timeout_ms.
  std::vector<ContainerId> reap_idle(double now, double timeout_ms);

  // Reaps one specific idle container (used to free room under pressure).
  void reap(ContainerId id, double now);

  // Powers off nodes whose allocation has been zero for node_off_delay.
  std::vector<int> power_off_idle_nodes(double now);

  Container& container(ContainerId id) { return containers_.at(static_cast<size_t>(id)); }
  const Container& container(ContainerId id) const { return containers_.at(static_cast<size_t>(id)); }
  const std::deque<Container>& containers() const { return containers_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const ClusterConfig& config() const { return config_; }

  int live_containers() const { return live_; }
  int powered_nodes() const;
  double allocated_cores() const;

  // Σ allocated cores equals Σ cpu demand of live containers on every node.
  bool conservation_holds() const;

 private:
  void release(Container& c, double now);

  ClusterConfig config_;
  std::vector<Node> nodes_;
  std::deque<Container> containers_;  // stable references across spawns
  int live_ = 0;
};

}  // namespace chainsim
