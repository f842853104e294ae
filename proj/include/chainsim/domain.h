#pragma once

// Microservice catalog, application chains and the slack/batch arithmetic
// that sizes every stage.

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MicroserviceProfile {
  std::string id;
  double met_ref_ms = 0;        // mean execution time at reference_size
  double met_slope_ms = 0;      // per input-size unit
  double reference_size = 0;
  double cold_start_min_ms = 2000;
  double cold_start_max_ms = 9000;
  double cpu_demand = 0.5;      // fractional cores
  double mem_demand_bytes = 512.0 * 1024 * 1024;

  double cold_start_midpoint_ms() const { return 0.5 * (cold_start_min_ms + cold_start_max_ms); }
  void validate() const;
};

inline constexpr double kDefaultMetFloorMs = 0.01;

// Linear input-size model, clamped below at met_floor_ms.
double estimate_met(const MicroserviceProfile& profile, double input_size,
                    double met_floor_ms = kDefaultMetFloorMs);

enum class SlackPolicy { kProportional, kEqualDivision };

std::string_view to_string(SlackPolicy policy);
SlackPolicy slack_policy_from_string(std::string_view name);

// Splits total_slack_ms across stages. Throws DomainError if the slack is not
// positive (the SLO cannot be met by this chain).
std::vector<double> allocate_slack(double total_slack_ms, std::span<const double> stage_met_ms,
                                   SlackPolicy policy);

// max(1, floor(stage_slack / met)).
int batch_size(double stage_slack_ms, double met_ms);

// Declarative description of a chain, as written in a catalog file.
struct ChainSpec {
  std::string id;
  std::vector<std::string> stages;
  double slo_ms = 1000;
  double overhead_margin_ms = 200;
};

// A chain with its per-stage budgets resolved.
struct AppChain {
  std::string id;
  std::vector<std::string> stages;
  double slo_ms = 0;
  double overhead_margin_ms = 0;
  double total_slack_ms = 0;
  SlackPolicy slack_policy = SlackPolicy::kProportional;
  std::vector<double> stage_met_ms;
  std::vector<double> stage_slack_ms;
  std::vector<int> stage_batch_size;

  size_t size() const { return stages.size(); }
  double total_met_ms() const;
  // S_r: allocated slack plus execution time.
  double response_budget_ms(size_t stage) const { return stage_slack_ms.at(stage) + stage_met_ms.at(stage); }
};

struct StageRuntimeProfile {
  std::string chain_id;
  int stage_index = 0;
  double met_ms = 0;
  double slack_ms = 0;
  int batch_size = 1;
  double response_budget_ms = 0;
};

StageRuntimeProfile stage_profile(const AppChain& chain, size_t stage);

class Catalog {
 public:
  void add_microservice(MicroserviceProfile profile);
  void add_chain(ChainSpec spec);

  bool has_microservice(std::string_view id) const;
  bool has_chain(std::string_view id) const;
  const MicroserviceProfile& microservice(std::string_view id) const;
  const ChainSpec& chain_spec(std::string_view id) const;

  const std::map<std::string, MicroserviceProfile, std::less<>>& microservices() const { return microservices_; }
  const std::map<std::string, ChainSpec, std::less<>>& chains() const { return chains_; }

  double input_size() const { return input_size_; }
  void set_input_size(double size) { input_size_ = size; }

  double met_ms(std::string_view microservice_id) const;

  // Resolves slack and batch sizes for one chain.
  AppChain build_chain(std::string_view chain_id, SlackPolicy policy) const;

  // Checks referential integrity and per-chain slack feasibility.
  void validate() const;

 private:
  std::map<std::string, MicroserviceProfile, std::less<>> microservices_;
  std::map<std::string, ChainSpec, std::less<>> chains_;
  double input_size_ = 0;
};

// Stock microservices with their profiled execution times and the four
// stock chains at a 1000 ms SLO.
Catalog default_catalog();

}  // namespace chainsim
