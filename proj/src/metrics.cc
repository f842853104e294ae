#include "chainsim/metrics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace chainsim {

bool classify_slo(double latency_ms, double slo_ms) { return latency_ms > slo_ms; }

bool classify_slo(const RequestRecord& request) {
  if (!request.completed()) throw std::logic_error("classify_slo: request has not completed");
  return classify_slo(request.latency(), request.slo_ms);
}

LatencyBreakdown decompose_latency(const RequestRecord& request) {
  if (!request.completed()) throw std::logic_error("decompose_latency: request has not completed");
  LatencyBreakdown b;
  for (const StageRecord& s : request.stages) {
    b.exec += s.exec_end - s.exec_start;
    b.cold_wait += s.cold_wait;
    b.transition += s.transition;
  }
  b.batch_wait = request.latency() - b.exec - b.cold_wait - b.transition;
  // Round-off from subtracting large timestamps.
  if (std::abs(b.batch_wait) < 1e-9) b.batch_wait = 0;
  return b;
}

double nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0;
  if (q <= 0) return sorted.front();
  const auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-12));
  return sorted[std::min(sorted.size(), std::max<size_t>(rank, 1)) - 1];
}

double rpc(long executions, long containers_spawned) {
  return containers_spawned > 0 ? static_cast<double>(executions) / static_cast<double>(containers_spawned) : 0.0;
}

const StageStats* MetricsReport::stage(const std::string& microservice) const {
  for (const StageStats& s : stages)
    if (s.microservice == microservice) return &s;
  return nullptr;
}

void summarize_requests(std::span<const RequestRecord> requests, MetricsReport& report) {
  std::vector<double> latencies;
  latencies.reserve(requests.size());
  long violations = 0;
  LatencyBreakdown sum;
  report.requests = static_cast<long>(requests.size());
  for (const RequestRecord& r : requests) {
    if (!r.completed()) continue;
    latencies.push_back(r.latency());
    violations += classify_slo(r) ? 1 : 0;
    const LatencyBreakdown b = decompose_latency(r);
    sum.exec += b.exec;
    sum.cold_wait += b.cold_wait;
    sum.batch_wait += b.batch_wait;
    sum.transition += b.transition;
  }
  report.completed = static_cast<long>(latencies.size());
  if (latencies.empty()) return;
  const double n = static_cast<double>(latencies.size());
  std::sort(latencies.begin(), latencies.end());
  report.slo_violation_pct = 100.0 * static_cast<double>(violations) / n;
  report.p50_ms = nearest_rank(latencies, 0.50);
  report.p95_ms = nearest_rank(latencies, 0.95);
  report.p99_ms = nearest_rank(latencies, 0.99);
  double total = 0;
  for (double l : latencies) total += l;
  report.mean_latency_ms = total / n;
  report.mean_breakdown = {sum.exec / n, sum.cold_wait / n, sum.batch_wait / n, sum.transition / n};
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["policy"] = policy;
  j["seed"] = seed;
  j["requests"] = requests;
  j["completed"] = completed;
  j["slo_violation_pct"] = slo_violation_pct;
  j["avg_containers"] = avg_containers;
  j["avg_containers_time_weighted"] = avg_containers_time_weighted;
  j["peak_containers"] = peak_containers;
  j["latency_ms"] = {{"p50", p50_ms}, {"p95", p95_ms}, {"p99", p99_ms}, {"mean", mean_latency_ms}};
  j["latency_breakdown_ms"] = {{"exec", mean_breakdown.exec},
                               {"cold_wait", mean_breakdown.cold_wait},
                               {"batch_wait", mean_breakdown.batch_wait},
                               {"transition", mean_breakdown.transition}};
  j["cold_start_count"] = cold_start_count;
  j["spawns"] = {{"on_demand", spawns.on_demand}, {"reactive", spawns.reactive},
                 {"proactive", spawns.proactive}, {"static_pool", spawns.static_pool}, {"prewarmed", spawns.prewarmed},
                 {"deferred", spawns.deferred},   {"evictions", spawns.evictions}};
  j["energy_joules"] = energy_joules;
  j["window_end_ms"] = window_end_ms;
  auto& st = j["stages"] = nlohmann::ordered_json::array();
  for (const StageStats& s : stages) {
    st.push_back({{"microservice", s.microservice},
                  {"batch_size", s.batch_size},
                  {"spawned", s.spawned},
                  {"executions", s.executions},
                  {"rpc", s.rpc},
                  {"mean_containers", s.mean_containers},
                  {"peak_containers", s.peak_containers}});
  }
  return j;
}

std::string MetricsReport::to_text() const {
  std::string out;
  out += fmt::format("{:<28}{}\n", "policy", policy);
  out += fmt::format("{:<28}{}\n", "seed", seed);
  out += fmt::format("{:<28}{} / {}\n", "completed / requests", completed, requests);
  out += fmt::format("{:<28}{:.3f}\n", "slo violations (%)", slo_violation_pct);
  out += fmt::format("{:<28}{:.2f} (time-weighted {:.2f}, peak {})\n", "avg containers", avg_containers,
                     avg_containers_time_weighted, peak_containers);
  out += fmt::format("{:<28}{:.1f} / {:.1f} / {:.1f}\n", "p50 / p95 / p99 (ms)", p50_ms, p95_ms, p99_ms);
  out += fmt::format("{:<28}exec {:.1f}  cold {:.1f}  batch {:.1f}\n", "mean breakdown (ms)", mean_breakdown.exec,
                     mean_breakdown.cold_wait, mean_breakdown.batch_wait);
  out += fmt::format("{:<28}{} (on-demand {}, reactive {}, proactive {}, static {})\n", "cold starts",
                     cold_start_count, spawns.on_demand, spawns.reactive, spawns.proactive, spawns.static_pool);
  out += fmt::format("{:<28}{:.0f}\n", "energy (J)", energy_joules);
  out += fmt::format("\n{:<10}{:>4}{:>10}{:>12}{:>10}{:>10}{:>8}\n", "stage", "B", "spawned", "executions", "rpc",
                     "mean", "peak");
  for (const StageStats& s : stages)
    out += fmt::format("{:<10}{:>4}{:>10}{:>12}{:>10.2f}{:>10.2f}{:>8}\n", s.microservice, s.batch_size, s.spawned,
                       s.executions, s.rpc, s.mean_containers, s.peak_containers);
  return out;
}

std::string MetricsReport::timeseries_csv() const {
  std::string out = "time_ms,total";
  for (const StageStats& s : stages) out += "," + s.microservice;
  out += "\n";
  for (const ContainerSample& c : container_timeseries) {
    out += fmt::format("{},{}", c.time_ms, c.total);
    for (int v : c.per_stage) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

}  // namespace chainsim
