#include "chainsim/cluster.h"

#include <cmath>
#include <stdexcept>

namespace chainsim {

const Container* select_container(std::span<const Container* const> containers, ContainerSelection mode) {
  const Container* best = nullptr;
  auto better = [mode](const Container* a, const Container* b) {
    // Warm beats cold-starting regardless of slot count.
    const bool a_warm = a->state == ContainerState::kWarm;
    const bool b_warm = b->state == ContainerState::kWarm;
    if (a_warm != b_warm) return a_warm;
    if (a->free_slots() != b->free_slots())
      return mode == ContainerSelection::kLeastFreeSlots ? a->free_slots() < b->free_slots()
                                                         : a->free_slots() > b->free_slots();
    return a->id < b->id;
  };
  for (const Container* c : containers) {
    if (c == nullptr || !c->live() || c->free_slots() <= 0) continue;
    if (best == nullptr || better(c, best)) best = c;
  }
  return best;
}

std::optional<size_t> select_node(std::span<const Node> nodes, double cpu_demand, double mem_demand,
                                  NodeSelection mode) {
  if (!(cpu_demand > 0)) throw std::invalid_argument("select_node: demand must be > 0");
  std::optional<size_t> best;
  if (mode == NodeSelection::kSpread) {
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].fits(cpu_demand, mem_demand)) continue;
      if (!best || nodes[i].available_cores() > nodes[*best].available_cores() + 1e-12) best = i;
    }
    return best;
  }
  for (int pass = 0; pass < 2 && !best; ++pass) {
    const bool want_powered = pass == 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].powered != want_powered || !nodes[i].fits(cpu_demand, mem_demand)) continue;
      if (!best || nodes[i].available_cores() < nodes[*best].available_cores() - 1e-12) best = i;
    }
  }
  return best;
}

double energy_step(std::span<const Node> nodes, double interval_ms) {
  if (!(interval_ms > 0)) throw std::invalid_argument("energy_step: interval must be > 0");
  double watts = 0;
  for (const Node& n : nodes)
    if (n.powered) watts += n.power_idle_w + n.power_per_core_w * n.allocated_cores;
  return watts * interval_ms / 1000.0;
}

void ClusterConfig::validate() const {
  if (nodes <= 0) throw std::invalid_argument("cluster needs at least one node");
  if (!(cores_per_node > 0)) throw std::invalid_argument("cores_per_node must be > 0");
  if (power_idle_w < 0 || power_per_core_w < 0) throw std::invalid_argument("power constants must be >= 0");
  if (node_off_delay_ms < 0) throw std::invalid_argument("node_off_delay_ms must be >= 0");
}

Cluster::Cluster(const ClusterConfig& config) : config_(config) {
  config_.validate();
  for (int i = 0; i < config.nodes; ++i) {
    Node n;
    n.id = i + 1;
    n.total_cores = config.cores_per_node;
    n.total_mem = config.mem_per_node_bytes;
    n.power_idle_w = config.power_idle_w;
    n.power_per_core_w = config.power_per_core_w;
    n.powered = config.nodes_start_powered;
    nodes_.push_back(n);
  }
}

std::optional<ContainerId> Cluster::spawn(const SpawnRequest& request, double now, Rng& rng,
                                          NodeSelection placement) {
  if (request.batch_size < 1) throw std::invalid_argument("spawn: batch size must be >= 1");
  if (request.cold_start_min_ms > request.cold_start_max_ms)
    throw std::invalid_argument("spawn: cold start range is invalid");
  const auto node_index = select_node(nodes_, request.cpu_demand, request.mem_demand, placement);
  if (!node_index) return std::nullopt;
  Node& node = nodes_[*node_index];
  node.powered = true;
  node.allocated_cores += request.cpu_demand;
  node.allocated_mem += request.mem_demand;

  Container c;
  c.id = static_cast<ContainerId>(containers_.size());
  c.stage = request.stage;
  c.microservice_id = request.microservice_id;
  c.batch_size = request.batch_size;
  c.state = ContainerState::kColdStarting;
  c.spawned_at = now;
  const double cold = request.cold_start_min_ms == request.cold_start_max_ms
                          ? request.cold_start_min_ms
                          : rng.uniform(request.cold_start_min_ms, request.cold_start_max_ms);
  c.ready_at = now + cold;
  c.last_used = c.ready_at;
  c.node_id = node.id;
  c.cpu_demand = request.cpu_demand;
  c.mem_demand = request.mem_demand;
  c.pinned = request.pinned;
  containers_.push_back(std::move(c));
  ++live_;
  return containers_.back().id;
}

void Cluster::release(Container& c, double now) {
  Node& node = nodes_.at(static_cast<size_t>(c.node_id - 1));
  node.allocated_cores -= c.cpu_demand;
  node.allocated_mem -= c.mem_demand;
  if (std::abs(node.allocated_cores) < 1e-9) {
    node.allocated_cores = 0;
    node.zero_since = now;
  }
  if (std::abs(node.allocated_mem) < 1e-3) node.allocated_mem = 0;
  c.state = ContainerState::kReaped;
  c.reaped_at = now;
  --live_;
}

std::vector<ContainerId> Cluster::reap_idle(double now, double timeout_ms) {
  std::vector<ContainerId> reaped;
  for (Container& c : containers_) {
    if (c.pinned || !c.idle()) continue;
    if (now - c.last_used >= timeout_ms) {
      release(c, now);
      reaped.push_back(c.id);
    }
  }
  return reaped;
}

void Cluster::reap(ContainerId id, double now) {
  Container& c = container(id);
  if (!c.idle()) throw std::logic_error("reap: container " + std::to_string(id) + " is not idle");
  release(c, now);
}

std::vector<int> Cluster::power_off_idle_nodes(double now) {
  std::vector<int> off;
  for (Node& n : nodes_) {
    if (n.powered && n.allocated_cores == 0 && now - n.zero_since >= config_.node_off_delay_ms) {
      n.powered = false;
      off.push_back(n.id);
    }
  }
  return off;
}

int Cluster::powered_nodes() const {
  int count = 0;
  for (const Node& n : nodes_) count += n.powered ? 1 : 0;
  return count;
}

double Cluster::allocated_cores() const {
  double total = 0;
  for (const Node& n : nodes_) total += n.allocated_cores;
  return total;
}

bool Cluster::conservation_holds() const {
  std::vector<double> per_node(nodes_.size(), 0.0);
  for (const Container& c : containers_)
    if (c.live()) per_node[static_cast<size_t>(c.node_id - 1)] += c.cpu_demand;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (std::abs(per_node[i] - nodes_[i].allocated_cores) > 1e-6) return false;
  return true;
}

}  // namespace chainsim
