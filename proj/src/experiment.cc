#include "chainsim/experiment.h"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "chainsim/atomic_file.h"

namespace chainsim {

RunInputs make_inputs(const ExperimentConfig& config, PolicyKind policy, uint64_t seed, const ArrivalTrace& trace,
                      std::vector<std::string>* warnings) {
  RunInputs in;
  in.catalog = &config.catalog;
  in.mix = config.workload.mix;
  in.trace = &trace;
  in.policy = policy_assemble(policy, config.predictor, config.predictor_override, warnings);
  in.cluster = config.cluster;
  in.engine = config.engine;
  in.seed = seed;
  return in;
}

Cell run_cell(const ExperimentConfig& config, PolicyKind policy, uint64_t seed) {
  Cell cell;
  cell.policy = policy;
  cell.seed = seed;
  const ArrivalTrace trace = make_trace(config, seed);
  const RunInputs in = make_inputs(config, policy, seed, trace, &cell.warnings);
  cell.report = run(in).report;
  return cell;
}

std::vector<Cell> run_sweep(const ExperimentConfig& config, unsigned workers) {
  std::vector<std::pair<PolicyKind, uint64_t>> jobs;
  for (PolicyKind p : config.policies)
    for (uint64_t s : config.seeds) jobs.emplace_back(p, s);
  std::vector<Cell> cells(jobs.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  auto work = [&] {
    for (size_t i = next++; i < jobs.size(); i = next++) {
      try {
        cells[i] = run_cell(config, jobs[i].first, jobs[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return cells;
}

std::string comparison_csv(const std::vector<Cell>& cells) {
  struct Acc {
    double n = 0, containers = 0, peak = 0, slo = 0, p50 = 0, p99 = 0, cold = 0, energy = 0, rpc = 0;
  };
  std::vector<PolicyKind> order;
  std::map<PolicyKind, Acc> acc;
  for (const Cell& c : cells) {
    if (!acc.count(c.policy)) order.push_back(c.policy);
    Acc& a = acc[c.policy];
    const MetricsReport& r = c.report;
    a.n += 1;
    a.containers += r.avg_containers;
    a.peak += r.peak_containers;
    a.slo += r.slo_violation_pct;
    a.p50 += r.p50_ms;
    a.p99 += r.p99_ms;
    a.cold += static_cast<double>(r.cold_start_count);
    a.energy += r.energy_joules;
    double rpc_sum = 0;
    for (const StageStats& s : r.stages) rpc_sum += s.rpc;
    a.rpc += r.stages.empty() ? 0 : rpc_sum / static_cast<double>(r.stages.size());
  }
  const Acc* base = acc.count(PolicyKind::kBline) ? &acc[PolicyKind::kBline] : nullptr;
  auto norm = [](double v, double b) { return b > 0 ? fmt::format("{:.4f}", v / b) : std::string(""); };
  std::string out =
      "policy,runs,avg_containers,avg_containers_norm,peak_containers,peak_containers_norm,slo_violation_pct,"
      "p50_ms,p99_ms,cold_starts,mean_rpc,energy_joules,energy_norm\n";
  for (PolicyKind k : order) {
    const Acc& a = acc[k];
    const double n = a.n;
    out += fmt::format("{},{},{:.4f},{},{:.2f},{},{:.4f},{:.3f},{:.3f},{:.1f},{:.4f},{:.1f},{}\n", to_string(k), n,
                       a.containers / n, base ? norm(a.containers / n, base->containers / base->n) : "", a.peak / n,
                       base ? norm(a.peak / n, base->peak / base->n) : "", a.slo / n, a.p50 / n, a.p99 / n, a.cold / n,
                       a.rpc / n, a.energy / n, base ? norm(a.energy / n, base->energy / base->n) : "");
  }
  return out;
}

std::string report_basename(const Cell& cell) { return fmt::format("{}_seed{}", to_string(cell.policy), cell.seed); }

void write_reports(const std::vector<Cell>& cells, const std::filesystem::path& dir) {
  for (const Cell& c : cells) {
    const std::string base = report_basename(c);
    write_file_atomic(dir / (base + ".json"), c.report.to_json().dump(2) + "\n");
    write_file_atomic(dir / (base + ".txt"), c.report.to_text());
    write_file_atomic(dir / (base + "_timeseries.csv"), c.report.timeseries_csv());
  }
  write_file_atomic(dir / "comparison.csv", comparison_csv(cells));
}

}  // namespace chainsim
