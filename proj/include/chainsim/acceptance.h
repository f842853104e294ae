#pragma once

// Scaled experiments that check the simulator against the expected trends.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainsim/config.h"
#include "chainsim/experiment.h"

namespace chainsim {

class UnknownSuite : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

// Desk-scale setups shared by the suites.
ExperimentConfig poisson_trends_config();
ExperimentConfig spike_config();
ExperimentConfig diurnal_predictor_config();
std::vector<uint64_t> acceptance_seeds();

// trends-poisson | spike | predictor | oracle | formulas | determinism | all
std::vector<std::string> suite_names();

using ProgressFn = std::function<void(const std::string&)>;

std::vector<CriterionResult> run_suite(const std::string& name, const ProgressFn& progress = nullptr);

std::string format_results(const std::vector<CriterionResult>& results);

}  // namespace chainsim
