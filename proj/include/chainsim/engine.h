#pragma once

// Discrete-event simulation of chained requests over a container cluster.

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chainsim/cluster.h"
#include "chainsim/domain.h"
#include "chainsim/metrics.h"
#include "chainsim/policies.h"
#include "chainsim/predictor.h"
#include "chainsim/workload.h"

namespace chainsim {

struct EngineConfig {
  double monitor_interval_ms = 10000;   // 0 disables monitor ticks
  double delay_lookback_ms = 10000;
  double idle_timeout_ms = 600000;
  double sample_interval_ms = 10000;
  double transition_delay_ms = 0;
  double exec_jitter_sigma_ms = 0;      // truncated Gaussian noise on execution time
  bool lsf_static = false;              // LSF on static chain slack instead of decayed slack
  bool evict_idle_on_pressure = true;   // reap the least recently used idle container when a spawn does not fit
  double evict_min_idle_ms = 60000;     // only containers idle this long are evicted
  int prewarmed_per_stage = 1;          // warm containers per stage at t=0; a static pool starts warm instead
  int batch_size_override = 0;          // > 0 forces this B at every stage

  void validate() const;
};

// Resolved per-stage parameters. Stages are keyed by microservice and shared
// by every chain that uses it; the tightest chain sets the budget.
struct StageParams {
  std::string microservice;
  double met_ms = 0;
  double slack_ms = 0;
  double response_budget_ms = 0;   // S_r
  int batch_size = 1;
  double cold_start_ms = 0;        // C_d, midpoint of the cold-start range
  std::vector<int> chains;         // indices of chains visiting this stage
};

struct ChainPlan {
  AppChain chain;
  std::vector<int> stage_index;    // engine stage of each chain position
};

struct StagePlan {
  std::vector<ChainPlan> chains;
  std::vector<StageParams> stages;

  int chain_index(const std::string& id) const;
};

// Chains from the mix (then any extra chains the trace names) with their
// stages resolved under the policy's slack split.
StagePlan plan_stages(const Catalog& catalog, const WorkloadMix& mix, const ArrivalTrace& trace,
                      const PolicySpec& policy, const EngineConfig& config);

// Returns the forecaster a proactive policy needs, trained on the first
// train_fraction of the trace's windowed-max series when it is a model kind.
std::unique_ptr<Forecaster> prepare_forecaster(const PolicySpec& policy, const ArrivalTrace& trace);

// Ordering of one stage's global queue.
class StageQueue {
 public:
  struct Entry {
    int request = -1;
    double arrival = 0;
    double lsf_key = 0;   // remaining slack + now, or static slack, or sequence
  };

  explicit StageQueue(QueueOrder order = QueueOrder::kFifo) : order_(order) {}

  void push(const Entry& e);
  // Smallest remaining slack at `now`; requests whose slack is exhausted tie
  // at zero and leave in arrival order.
  int pop(double now);
  bool empty() const { return active_.empty() && expired_.empty(); }
  size_t size() const { return active_.size() + expired_.size(); }
  std::vector<int> requests() const;

 private:
  QueueOrder order_;
  long seq_ = 0;
  std::set<std::tuple<double, double, long, int>> active_;  // key, arrival, seq, request
  std::set<std::tuple<double, long, int>> expired_;         // arrival, seq, request
};

struct RunInputs {
  const Catalog* catalog = nullptr;
  WorkloadMix mix;
  const ArrivalTrace* trace = nullptr;
  PolicySpec policy;
  ClusterConfig cluster;
  EngineConfig engine;
  uint64_t seed = 1;
  const Forecaster* forecaster = nullptr;   // trained; built from the trace when null
};

struct RunResult {
  MetricsReport report;
  std::vector<RequestRecord> requests;
  std::vector<Container> containers;
  bool conservation_held = true;
  bool ready_respected = true;   // no execution began before its container was ready
};

RunResult run(const RunInputs& inputs);

}  // namespace chainsim
