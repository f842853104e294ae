#pragma once

// Brute-force time-stepped reference for small instances, used to check the
// event engine.

#include <cstdint>
#include <string>
#include <vector>

#include "chainsim/rng.h"

namespace chainsim {

// One chain of 1-2 stages with integer-millisecond timing.
struct MicroInstance {
  enum class Mode { kStaticPool, kOnDemand };

  Mode mode = Mode::kStaticPool;
  std::vector<int> met_ms;            // per stage
  std::vector<int> arrivals_ms;       // distinct, sorted
  int batch_size = 1;                 // static pool only; on-demand uses 1
  int pool_per_stage = 1;             // static pool only
  int max_containers = 3;             // on-demand capacity cap
  int cold_start_ms = 0;              // on-demand only
  int slo_ms = 1000;                  // total slack = slo - sum(met)

  std::string describe() const;
};

struct MicroOutcome {
  std::vector<double> completion_ms;  // per request, in arrival order
  long spawns = 0;
  // Set when two same-kind events touch one stage in the same step, which
  // leaves the outcome dependent on processing order.
  bool order_sensitive = false;
};

MicroInstance random_micro_instance(Rng& rng);

// Steps time in increments of 0.01 ms.
MicroOutcome simulate_time_stepped(const MicroInstance& instance);

// The same instance through the event engine.
MicroOutcome simulate_event_engine(const MicroInstance& instance);

struct OracleComparison {
  int instances = 0;
  int matched = 0;
  double max_abs_diff_ms = 0;
  bool spawns_match = true;
  std::vector<std::string> failures;
};

// Draws order-insensitive instances until `count` have been compared.
OracleComparison compare_with_oracle(int count, uint64_t seed);

}  // namespace chainsim
