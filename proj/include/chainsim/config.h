#pragma once

// Experiment configuration: JSON schema, defaults and validation.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "chainsim/cluster.h"
#include "chainsim/domain.h"
#include "chainsim/engine.h"
#include "chainsim/policies.h"
#include "chainsim/predictor.h"
#include "chainsim/workload.h"

namespace chainsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorkloadConfig {
  TraceSource kind = TraceSource::kPoisson;
  double rate_per_s = 50;              // poisson rate, diurnal/spike base rate
  double amplitude_per_s = 0;          // diurnal
  double period_ms = 600000;           // diurnal
  double peak_rate_per_s = 0;          // spike
  std::vector<double> spike_starts_ms;
  double spike_len_ms = 30000;
  std::string path;                    // replay CSV
  double prehistory_ms = 100000;       // arrivals before t=0 seen only by the monitor
  WorkloadMix mix = WorkloadMix::heavy();
};

struct ExperimentConfig {
  Catalog catalog = default_catalog();
  WorkloadConfig workload;
  ClusterConfig cluster;
  EngineConfig engine;
  ForecasterConfig predictor;
  bool predictor_override = false;     // keep predictor.kind for BPred/Fifer
  std::vector<PolicyKind> policies = all_policies();
  std::vector<uint64_t> seeds = {1};
  double horizon_ms = 600000;
  std::string output_dir = "out";

  // Referential integrity, chain feasibility and parameter ranges.
  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Trace for one seed, including the monitor pre-history.
ArrivalTrace make_trace(const ExperimentConfig& config, uint64_t seed);

}  // namespace chainsim
