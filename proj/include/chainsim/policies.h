#pragma once

// The five resource-management policies and their scaling arithmetic.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainsim/cluster.h"
#include "chainsim/domain.h"
#include "chainsim/predictor.h"

namespace chainsim {

enum class PolicyKind { kBline, kSBatch, kRScale, kBPred, kFifer };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);
std::vector<PolicyKind> all_policies();

enum class QueueOrder { kFifo, kLsfStatic, kLsfDynamic };

std::string_view to_string(QueueOrder order);

// The switches a policy kind turns on.
struct PolicySpec {
  PolicyKind kind = PolicyKind::kFifer;
  SlackPolicy slack_policy = SlackPolicy::kProportional;
  bool batch_one = false;          // force B = 1 at every stage
  QueueOrder queue_order = QueueOrder::kLsfDynamic;
  bool on_demand_spawn = false;    // one spawn per request that finds no slot
  bool warm_only = false;          // queued requests wait for a warm container
  bool reactive = false;           // delay-driven scaling at monitor ticks
  bool proactive = false;          // forecast-driven scaling at monitor ticks
  bool static_pool = false;        // fixed pool sized offline, never scaled
  NodeSelection placement = NodeSelection::kGreedyPack;
  ContainerSelection container_selection = ContainerSelection::kLeastFreeSlots;
  ForecasterConfig predictor;
};

// Builds the spec for `kind`. The predictor kind is forced to EWMA for BPred
// and LSTM for Fifer unless `predictor_override` is set; an override on BPred
// with a non-EWMA kind is allowed and reported through `warnings`.
PolicySpec policy_assemble(PolicyKind kind, const ForecasterConfig& predictor, bool predictor_override,
                           std::vector<std::string>* warnings = nullptr);
PolicySpec policy_assemble(PolicyKind kind);

struct ReactiveInput {
  double delay_ms = 0;             // largest observed queue wait
  double stage_slack_ms = 0;
  int pending = 0;                 // PQ_len
  double response_budget_ms = 0;   // S_r
  std::vector<int> container_batch_sizes;
  int batch_size = 1;              // B of new containers
  double cold_start_ms = 0;        // C_d
};

struct ReactiveDecision {
  bool triggered = false;          // delay >= slack
  double capacity = 0;             // L
  double total_delay_ms = 0;       // T_d
  double delay_factor_ms = 0;      // D_f (infinite when L = 0)
  int spawn = 0;                   // N_c
};

ReactiveDecision reactive_tick(const ReactiveInput& in);

// Concurrent requests implied by a forecast rate over one response budget.
double forecast_demand(double forecast_rate_per_s, double response_budget_ms);

// ceil((demand - live * B) / B) when demand exceeds capacity, else 0.
int proactive_tick(double demand, int live_containers, int batch_size);

// Offline fixed pool: max(1, ceil(avg_rate * S_r / 1000 / B)).
int sbatch_init(double avg_rate_per_s, double response_budget_ms, int batch_size);

}  // namespace chainsim
