#pragma once

// Runs (policy x seed) cells and writes reports and comparison tables.

#include <filesystem>
#include <string>
#include <vector>

#include "chainsim/config.h"
#include "chainsim/engine.h"

namespace chainsim {

struct Cell {
  PolicyKind policy = PolicyKind::kBline;
  uint64_t seed = 1;
  MetricsReport report;
  std::vector<std::string> warnings;
};

RunInputs make_inputs(const ExperimentConfig& config, PolicyKind policy, uint64_t seed, const ArrivalTrace& trace,
                      std::vector<std::string>* warnings = nullptr);

Cell run_cell(const ExperimentConfig& config, PolicyKind policy, uint64_t seed);

// Every policy on every seed; cells run on a worker pool and come back in
// (policy, seed) order.
std::vector<Cell> run_sweep(const ExperimentConfig& config, unsigned workers = 0);

// One row per policy with seed-averaged metrics, containers and energy also
// normalized to Bline when Bline is present.
std::string comparison_csv(const std::vector<Cell>& cells);

std::string report_basename(const Cell& cell);

// Writes <policy>_seed<N>.json, .txt and _timeseries.csv per cell plus
// comparison.csv, all atomically.
void write_reports(const std::vector<Cell>& cells, const std::filesystem::path& dir);

}  // namespace chainsim
