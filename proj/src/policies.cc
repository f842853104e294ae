#include "chainsim/policies.h"

#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chainsim {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kBline: return "Bline";
    case PolicyKind::kSBatch: return "SBatch";
    case PolicyKind::kRScale: return "RScale";
    case PolicyKind::kBPred: return "BPred";
    case PolicyKind::kFifer: return "Fifer";
  }
  return "?";
}

std::vector<PolicyKind> all_policies() {
  return {PolicyKind::kBline, PolicyKind::kSBatch, PolicyKind::kRScale, PolicyKind::kBPred, PolicyKind::kFifer};
}

PolicyKind policy_kind_from_string(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (PolicyKind k : all_policies()) {
    std::string candidate(to_string(k));
    for (char& c : candidate) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (candidate == lower) return k;
  }
  throw std::invalid_argument("unknown policy: " + std::string(name));
}

std::string_view to_string(QueueOrder order) {
  switch (order) {
    case QueueOrder::kFifo: return "fifo";
    case QueueOrder::kLsfStatic: return "lsf-static";
    case QueueOrder::kLsfDynamic: return "lsf-dynamic";
  }
  return "?";
}

PolicySpec policy_assemble(PolicyKind kind, const ForecasterConfig& predictor, bool predictor_override,
                           std::vector<std::string>* warnings) {
  PolicySpec p;
  p.kind = kind;
  p.predictor = predictor;
  switch (kind) {
    case PolicyKind::kBline:
      p.batch_one = true;
      p.queue_order = QueueOrder::kFifo;
      p.on_demand_spawn = true;
      p.warm_only = true;
      p.placement = NodeSelection::kSpread;
      break;
    case PolicyKind::kSBatch:
      p.slack_policy = SlackPolicy::kEqualDivision;
      p.queue_order = QueueOrder::kFifo;
      p.static_pool = true;
      p.placement = NodeSelection::kSpread;
      break;
    case PolicyKind::kRScale:
      p.reactive = true;
      break;
    case PolicyKind::kBPred:
      p.batch_one = true;
      p.on_demand_spawn = true;
      p.warm_only = true;
      p.proactive = true;
      p.placement = NodeSelection::kSpread;
      if (!predictor_override) {
        p.predictor.kind = ForecasterKind::kEwma;
      } else if (predictor.kind != ForecasterKind::kEwma && warnings) {
        warnings->push_back("BPred configured with predictor '" + std::string(to_string(predictor.kind)) +
                            "' instead of ewma");
      }
      break;
    case PolicyKind::kFifer:
      p.reactive = true;
      p.proactive = true;
      if (!predictor_override) p.predictor.kind = ForecasterKind::kLstm;
      break;
  }
  return p;
}

PolicySpec policy_assemble(PolicyKind kind) { return policy_assemble(kind, ForecasterConfig{}, false, nullptr); }

ReactiveDecision reactive_tick(const ReactiveInput& in) {
  if (in.batch_size < 1) throw std::invalid_argument("reactive_tick: batch size must be >= 1");
  if (in.pending < 0) throw std::invalid_argument("reactive_tick: negative queue length");
  ReactiveDecision d;
  if (in.delay_ms < in.stage_slack_ms) return d;
  d.triggered = true;
  for (int b : in.container_batch_sizes) d.capacity += b;
  d.total_delay_ms = in.pending * in.response_budget_ms;
  const int wanted = static_cast<int>(std::ceil(static_cast<double>(in.pending) / in.batch_size));
  if (d.capacity <= 0) {
    d.delay_factor_ms = std::numeric_limits<double>::infinity();
    d.spawn = std::max(1, wanted);
    return d;
  }
  d.delay_factor_ms = d.total_delay_ms / d.capacity;
  if (d.delay_factor_ms > in.cold_start_ms) d.spawn = wanted;
  return d;
}

double forecast_demand(double forecast_rate_per_s, double response_budget_ms) {
  if (forecast_rate_per_s < 0) throw std::invalid_argument("forecast_demand: negative forecast");
  return forecast_rate_per_s * response_budget_ms / 1000.0;
}

int proactive_tick(double demand, int live_containers, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("proactive_tick: batch size must be >= 1");
  const double capacity = static_cast<double>(live_containers) * batch_size;
  if (demand <= capacity + 1e-9) return 0;
  return static_cast<int>(std::ceil((demand - capacity) / batch_size - 1e-9));
}

int sbatch_init(double avg_rate_per_s, double response_budget_ms, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("sbatch_init: batch size must be >= 1");
  if (avg_rate_per_s < 0) throw std::invalid_argument("sbatch_init: negative rate");
  const double concurrent = avg_rate_per_s * response_budget_ms / 1000.0;
  return std::max(1, static_cast<int>(std::ceil(concurrent / batch_size - 1e-9)));
}

}  // namespace chainsim
