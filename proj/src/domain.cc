#include "chainsim/domain.h"

#include <cmath>
#include <numeric>

namespace chainsim {

void MicroserviceProfile::validate() const {
  if (id.empty()) throw DomainError("microservice id is empty");
  if (!(met_ref_ms > 0)) throw DomainError("microservice " + id + ": met_ref_ms must be > 0");
  if (!(cold_start_min_ms >= 0) || cold_start_min_ms > cold_start_max_ms)
    throw DomainError("microservice " + id + ": cold start range is invalid");
  if (!(cpu_demand > 0) || cpu_demand > 1)
    throw DomainError("microservice " + id + ": cpu_demand must lie in (0, 1]");
  if (mem_demand_bytes < 0) throw DomainError("microservice " + id + ": negative memory demand");
}

double estimate_met(const MicroserviceProfile& profile, double input_size, double met_floor_ms) {
  if (input_size < 0) throw DomainError("estimate_met: input size must be >= 0");
  const double met = profile.met_ref_ms + profile.met_slope_ms * (input_size - profile.reference_size);
  return std::max(met, met_floor_ms);
}

std::string_view to_string(SlackPolicy policy) {
  return policy == SlackPolicy::kProportional ? "proportional" : "equal-division";
}

SlackPolicy slack_policy_from_string(std::string_view name) {
  if (name == "proportional") return SlackPolicy::kProportional;
  if (name == "equal-division" || name == "ed") return SlackPolicy::kEqualDivision;
  throw DomainError("unknown slack policy: " + std::string(name));
}

std::vector<double> allocate_slack(double total_slack_ms, std::span<const double> stage_met_ms,
                                   SlackPolicy policy) {
  if (!(total_slack_ms > 0)) throw DomainError("allocate_slack: total slack must be > 0 (SLO infeasible)");
  if (stage_met_ms.empty()) throw DomainError("allocate_slack: chain has no stages");
  const double n = static_cast<double>(stage_met_ms.size());
  std::vector<double> out;
  out.reserve(stage_met_ms.size());
  if (policy == SlackPolicy::kEqualDivision) {
    out.assign(stage_met_ms.size(), total_slack_ms / n);
    return out;
  }
  const double total_met = std::accumulate(stage_met_ms.begin(), stage_met_ms.end(), 0.0);
  if (!(total_met > 0)) throw DomainError("allocate_slack: execution times must be positive");
  for (double met : stage_met_ms) out.push_back(total_slack_ms * met / total_met);
  return out;
}

int batch_size(double stage_slack_ms, double met_ms) {
  if (!(met_ms > 0)) throw DomainError("batch_size: execution time must be > 0");
  if (stage_slack_ms < 0) throw DomainError("batch_size: slack must be >= 0");
  // Guard against 2.9999999 from proportional rounding turning exact ratios down.
  const double ratio = stage_slack_ms / met_ms;
  const double floored = std::floor(ratio + 1e-9);
  return std::max(1, static_cast<int>(floored));
}

double AppChain::total_met_ms() const {
  return std::accumulate(stage_met_ms.begin(), stage_met_ms.end(), 0.0);
}

StageRuntimeProfile stage_profile(const AppChain& chain, size_t stage) {
  StageRuntimeProfile p;
  p.chain_id = chain.id;
  p.stage_index = static_cast<int>(stage);
  p.met_ms = chain.stage_met_ms.at(stage);
  p.slack_ms = chain.stage_slack_ms.at(stage);
  p.batch_size = chain.stage_batch_size.at(stage);
  p.response_budget_ms = p.slack_ms + p.met_ms;
  return p;
}

void Catalog::add_microservice(MicroserviceProfile profile) {
  profile.validate();
  std::string id = profile.id;
  microservices_.insert_or_assign(std::move(id), std::move(profile));
}

void Catalog::add_chain(ChainSpec spec) {
  if (spec.id.empty()) throw DomainError("chain id is empty");
  if (spec.stages.empty()) throw DomainError("chain " + spec.id + " has no stages");
  std::string id = spec.id;
  chains_.insert_or_assign(std::move(id), std::move(spec));
}

bool Catalog::has_microservice(std::string_view id) const { return microservices_.find(id) != microservices_.end(); }

bool Catalog::has_chain(std::string_view id) const { return chains_.find(id) != chains_.end(); }

const MicroserviceProfile& Catalog::microservice(std::string_view id) const {
  auto it = microservices_.find(id);
  if (it == microservices_.end()) throw DomainError("unknown microservice: " + std::string(id));
  return it->second;
}

const ChainSpec& Catalog::chain_spec(std::string_view id) const {
  auto it = chains_.find(id);
  if (it == chains_.end()) throw DomainError("unknown chain: " + std::string(id));
  return it->second;
}

double Catalog::met_ms(std::string_view microservice_id) const {
  return estimate_met(microservice(microservice_id), input_size_);
}

AppChain Catalog::build_chain(std::string_view chain_id, SlackPolicy policy) const {
  const ChainSpec& spec = chain_spec(chain_id);
  AppChain chain;
  chain.id = spec.id;
  chain.stages = spec.stages;
  chain.slo_ms = spec.slo_ms;
  chain.overhead_margin_ms = spec.overhead_margin_ms;
  chain.slack_policy = policy;
  for (const auto& stage : spec.stages) {
    if (!has_microservice(stage))
      throw DomainError("chain " + spec.id + " references unknown microservice " + stage);
    chain.stage_met_ms.push_back(met_ms(stage));
  }
  chain.total_slack_ms = spec.slo_ms - chain.total_met_ms() - spec.overhead_margin_ms;
  if (!(chain.total_slack_ms > 0))
    throw DomainError("chain " + spec.id + " has no slack under its SLO");
  chain.stage_slack_ms = allocate_slack(chain.total_slack_ms, chain.stage_met_ms, policy);
  for (size_t i = 0; i < chain.size(); ++i)
    chain.stage_batch_size.push_back(batch_size(chain.stage_slack_ms[i], chain.stage_met_ms[i]));
  return chain;
}

void Catalog::validate() const {
  for (const auto& [id, profile] : microservices_) profile.validate();
  for (const auto& [id, spec] : chains_) build_chain(id, SlackPolicy::kProportional);
}

Catalog default_catalog() {
  Catalog catalog;
  auto add = [&catalog](const char* id, double met) {
    MicroserviceProfile p;
    p.id = id;
    p.met_ref_ms = met;
    catalog.add_microservice(p);
  };
  add("IMC", 43.5);
  add("AP", 30.3);
  add("HS", 151.2);
  add("FACER", 5.5);
  add("FACED", 6.1);
  add("ASR", 46.1);
  add("POS", 0.100);
  add("NER", 0.09);
  add("QA", 56.1);
  // The chains' language stage runs tagging and entity recognition back to back.
  add("NLP", 0.100 + 0.09);

  catalog.add_chain({"face-security", {"FACED", "FACER"}});
  catalog.add_chain({"img", {"IMC", "NLP", "QA"}});
  catalog.add_chain({"ipa", {"ASR", "NLP", "QA"}});
  catalog.add_chain({"detect-fatigue", {"HS", "AP", "FACED", "FACER"}});
  return catalog;
}

}  // namespace chainsim
