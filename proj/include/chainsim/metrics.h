#pragma once

// Per-request records, latency decomposition and the run report.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace chainsim {

struct StageRecord {
  std::string microservice;
  double enqueue = -1;
  double dispatch = -1;
  double exec_start = -1;
  double exec_end = -1;
  double cold_wait = 0;        // part of the wait spent on a not-yet-ready container
  double transition = 0;       // delay before this stage's enqueue
  int container = -1;
};

struct RequestRecord {
  int id = -1;
  std::string chain_id;
  double arrival = 0;
  double completion = -1;
  double slo_ms = 1000;
  std::vector<StageRecord> stages;

  bool completed() const { return completion >= 0; }
  double latency() const { return completion - arrival; }
};

// Inclusive bound: a latency equal to the SLO passes.
bool classify_slo(double latency_ms, double slo_ms);
bool classify_slo(const RequestRecord& request);

struct LatencyBreakdown {
  double exec = 0;
  double cold_wait = 0;
  double batch_wait = 0;
  double transition = 0;
};

LatencyBreakdown decompose_latency(const RequestRecord& request);

// Nearest-rank quantile of a sorted sample: element ceil(q * n), 1-based.
double nearest_rank(std::span<const double> sorted, double q);

double rpc(long executions, long containers_spawned);

struct ContainerSample {
  double time_ms = 0;
  int total = 0;
  std::vector<int> per_stage;
};

struct StageStats {
  std::string microservice;
  int batch_size = 1;
  long spawned = 0;
  long executions = 0;
  double rpc = 0;
  double mean_containers = 0;
  int peak_containers = 0;
};

struct SpawnBreakdown {
  long on_demand = 0;
  long reactive = 0;
  long proactive = 0;
  long static_pool = 0;
  long prewarmed = 0;         // warm at t=0, not cold starts
  long deferred = 0;          // spawn attempts refused for lack of capacity
  long evictions = 0;
};

struct MetricsReport {
  std::string policy;
  uint64_t seed = 0;
  long requests = 0;
  long completed = 0;
  double slo_violation_pct = 0;
  double avg_containers = 0;                 // mean of the periodic samples
  double avg_containers_time_weighted = 0;
  int peak_containers = 0;
  double p50_ms = 0;
  double p95_ms = 0;
  double p99_ms = 0;
  double mean_latency_ms = 0;
  LatencyBreakdown mean_breakdown;
  long cold_start_count = 0;
  SpawnBreakdown spawns;
  double energy_joules = 0;
  double window_end_ms = 0;
  std::vector<StageStats> stages;
  std::vector<ContainerSample> container_timeseries;

  const StageStats* stage(const std::string& microservice) const;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
  std::string timeseries_csv() const;
};

// Fills the latency and SLO fields of `report` from completed requests.
void summarize_requests(std::span<const RequestRecord> requests, MetricsReport& report);

}  // namespace chainsim
