#include "chainsim/acceptance.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "chainsim/oracle.h"
#include "chainsim/policies.h"
#include "chainsim/predictor.h"

namespace chainsim {

namespace {

// Tolerances.
constexpr double kFiferContainerCut = 0.40;   // Fifer at least this far below Bline
constexpr double kSloParityPoints = 3.0;
constexpr double kSBatchSloGapPoints = 10.0;
constexpr double kColdVsRScale = 0.5;
constexpr double kColdVsBPred = 1.0 / 3.0;
constexpr double kEnergyRatio = 0.85;
constexpr double kLstmTrainBudgetS = 300.0;
constexpr int kOracleInstances = 50;
constexpr uint64_t kOracleSeed = 2024;
constexpr double kFormulaEps = 0.01;

using Clock = std::chrono::steady_clock;

void note(const ProgressFn& progress, const std::string& msg) {
  if (progress) progress(msg);
}

// Cells keyed by policy then seed.
using Grid = std::map<PolicyKind, std::map<uint64_t, MetricsReport>>;

Grid to_grid(const std::vector<Cell>& cells) {
  Grid g;
  for (const Cell& c : cells) g[c.policy][c.seed] = c.report;
  return g;
}

template <typename F>
double seed_mean(const Grid& g, PolicyKind p, F field) {
  const auto& runs = g.at(p);
  double sum = 0;
  for (const auto& [seed, rep] : runs) sum += field(rep);
  return sum / static_cast<double>(runs.size());
}

std::vector<CriterionResult> trends_poisson(const ProgressFn& progress) {
  ExperimentConfig cfg = poisson_trends_config();
  note(progress, "trends-poisson: running Bline, RScale, BPred and Fifer on 3 seeds");
  const Grid g = to_grid(run_sweep(cfg));
  const auto bl = PolicyKind::kBline, rs = PolicyKind::kRScale, bp = PolicyKind::kBPred, fi = PolicyKind::kFifer;

  std::vector<CriterionResult> out;
  {
    CriterionResult r{1, "Container reduction ordering", true, ""};
    for (uint64_t seed : cfg.seeds) {
      const double f = g.at(fi).at(seed).avg_containers, s = g.at(rs).at(seed).avg_containers,
                   b = g.at(bp).at(seed).avg_containers, l = g.at(bl).at(seed).avg_containers;
      const bool ok = f < s && s < b && b < l && f <= (1.0 - kFiferContainerCut) * l;
      r.pass = r.pass && ok;
      r.detail += fmt::format("{}seed {}: Fifer {:.1f} RScale {:.1f} BPred {:.1f} Bline {:.1f}{}",
                              r.detail.empty() ? "" : "; ", seed, f, s, b, l, ok ? "" : " (violated)");
    }
    out.push_back(r);
  }
  {
    CriterionResult r{2, "SLO parity of Fifer", true, ""};
    for (uint64_t seed : cfg.seeds) {
      const double f = g.at(fi).at(seed).slo_violation_pct, l = g.at(bl).at(seed).slo_violation_pct;
      const bool ok = f <= l + kSloParityPoints;
      r.pass = r.pass && ok;
      r.detail += fmt::format("{}seed {}: Fifer {:.2f}% Bline {:.2f}%", r.detail.empty() ? "" : "; ", seed, f, l);
    }
    out.push_back(r);
  }
  {
    CriterionResult r{6, "RPC ordering", true, ""};
    const auto& fifer_stages = g.at(fi).begin()->second.stages;
    for (size_t st = 0; st < fifer_stages.size(); ++st) {
      auto stage_rpc = [&](PolicyKind p) {
        return seed_mean(g, p, [st](const MetricsReport& m) { return m.stages[st].rpc; });
      };
      const double f = stage_rpc(fi), s = stage_rpc(rs), l = stage_rpc(bl);
      const bool ok = f >= s && s >= l;
      r.pass = r.pass && ok;
      r.detail += fmt::format("{}{} {:.0f}/{:.0f}/{:.0f}", r.detail.empty() ? "Fifer/RScale/Bline " : ", ",
                              fifer_stages[st].microservice, f, s, l);
    }
    out.push_back(r);
  }
  {
    const auto energy = [](const MetricsReport& m) { return m.energy_joules; };
    const double f = seed_mean(g, fi, energy), l = seed_mean(g, bl, energy);
    out.push_back({7, "Energy direction", f <= kEnergyRatio * l,
                   fmt::format("Fifer {:.0f} J vs Bline {:.0f} J (ratio {:.3f}, limit {:.2f})", f, l, f / l,
                               kEnergyRatio)});
  }
  return out;
}

std::vector<CriterionResult> spike(const ProgressFn& progress) {
  ExperimentConfig cfg = spike_config();
  note(progress, "spike: running all policies on 3 seeds");
  const Grid g = to_grid(run_sweep(cfg));
  const auto bl = PolicyKind::kBline, sb = PolicyKind::kSBatch, rs = PolicyKind::kRScale, bp = PolicyKind::kBPred,
             fi = PolicyKind::kFifer;
  const auto slo = [](const MetricsReport& m) { return m.slo_violation_pct; };
  const auto cold = [](const MetricsReport& m) { return static_cast<double>(m.cold_start_count); };
  const auto p50 = [](const MetricsReport& m) { return m.p50_ms; };
  const auto p99 = [](const MetricsReport& m) { return m.p99_ms; };

  std::vector<CriterionResult> out;
  {
    const double s = seed_mean(g, sb, slo), f = seed_mean(g, fi, slo);
    out.push_back({3, "SBatch under dynamism", s >= f + kSBatchSloGapPoints,
                   fmt::format("SBatch {:.2f}% vs Fifer {:.2f}% (gap {:.2f}, need {:.0f})", s, f, s - f,
                               kSBatchSloGapPoints)});
  }
  {
    const double f = seed_mean(g, fi, cold), s = seed_mean(g, rs, cold), b = seed_mean(g, bp, cold);
    out.push_back({4, "Cold-start counts", f <= kColdVsRScale * s && f <= kColdVsBPred * b,
                   fmt::format("Fifer {:.1f}, RScale {:.1f}, BPred {:.1f}", f, s, b)});
  }
  {
    const double f50 = seed_mean(g, fi, p50), l50 = seed_mean(g, bl, p50);
    const double f99 = seed_mean(g, fi, p99), s99 = seed_mean(g, rs, p99), b99 = seed_mean(g, sb, p99);
    out.push_back({5, "Latency shape", f50 > l50 && f99 <= s99 && f99 <= b99,
                   fmt::format("P50 Fifer {:.0f} > Bline {:.0f}; P99 Fifer {:.0f} <= RScale {:.0f}, SBatch {:.0f}",
                               f50, l50, f99, s99, b99)});
  }
  return out;
}

std::vector<CriterionResult> predictor(const ProgressFn& progress) {
  const ExperimentConfig cfg = diurnal_predictor_config();
  const ArrivalTrace trace = make_trace(cfg, cfg.seeds.front());
  std::vector<double> times;
  times.reserve(trace.events.size());
  for (const Arrival& a : trace.events) times.push_back(a.time_ms);
  const auto series = windowed_max_series(times, trace.start_ms, trace.horizon_ms, cfg.predictor);

  std::map<ForecasterKind, double> rmse;
  double lstm_seconds = 0;
  for (ForecasterKind k : {ForecasterKind::kMwa, ForecasterKind::kEwma, ForecasterKind::kLinReg,
                           ForecasterKind::kLogReg, ForecasterKind::kLstm}) {
    note(progress, fmt::format("predictor: evaluating {}", to_string(k)));
    ForecasterConfig fc = cfg.predictor;
    fc.kind = k;
    auto f = make_forecaster(fc);
    const auto t0 = Clock::now();
    rmse[k] = evaluate_rmse(*f, series, fc.train_fraction, fc).rmse;
    if (k == ForecasterKind::kLstm) lstm_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  double worst = 0;
  for (const auto& [k, v] : rmse) worst = std::max(worst, v);
  const double lstm = rmse[ForecasterKind::kLstm], ewma = rmse[ForecasterKind::kEwma];
  std::string detail;
  for (const auto& [k, v] : rmse) detail += fmt::format("{}={:.3f} ", to_string(k), v);
  detail += fmt::format("(LSTM train+eval {:.1f} s)", lstm_seconds);
  return {{8, "Predictor quality", lstm < ewma && ewma < worst && lstm_seconds < kLstmTrainBudgetS, detail}};
}

std::vector<CriterionResult> oracle(const ProgressFn& progress) {
  note(progress, fmt::format("oracle: comparing {} micro-instances", kOracleInstances));
  const OracleComparison cmp = compare_with_oracle(kOracleInstances, kOracleSeed);
  std::string detail = fmt::format("{}/{} matched, max |diff| {:.4f} ms, spawn counts {}", cmp.matched,
                                   cmp.instances, cmp.max_abs_diff_ms, cmp.spawns_match ? "equal" : "differ");
  if (!cmp.failures.empty()) detail += "; first failure: " + cmp.failures.front();
  return {{9, "Oracle equivalence", cmp.instances == kOracleInstances && cmp.matched == cmp.instances, detail}};
}

std::vector<CriterionResult> formulas(const ProgressFn& progress) {
  note(progress, "formulas: evaluating closed-form examples");
  std::vector<std::string> failed;
  auto check = [&failed](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  auto near = [](double a, double b) { return std::abs(a - b) <= kFormulaEps; };

  // Detect-fatigue stages: each share is 572 * met / 193.1.
  const std::vector<double> met = {151.2, 30.3, 6.1, 5.5};
  const auto slack = allocate_slack(572, met, SlackPolicy::kProportional);
  for (size_t i = 0; i < met.size(); ++i) {
    const double want = 572.0 * met[i] / 193.1;
    check(near(slack[i], want), fmt::format("allocate_slack[{}] = {:.3f}, want {:.3f}", i, slack[i], want));
  }
  const auto equal = allocate_slack(572, met, SlackPolicy::kEqualDivision);
  for (double v : equal) check(near(v, 143), "equal-division share");
  check(batch_size(447.87, 151.2) == 2, "batch_size(447.87, 151.2)");
  check(batch_size(0, 50) == 1, "batch_size(0, 50)");
  check(batch_size(500, 100) == 5, "batch_size(500, 100)");

  ReactiveInput in;
  in.delay_ms = 1000;
  in.stage_slack_ms = 100;
  in.pending = 20;
  in.response_budget_ms = 200;
  in.container_batch_sizes = {4, 4};
  in.batch_size = 4;
  in.cold_start_ms = 3000;
  ReactiveDecision d = reactive_tick(in);
  check(d.capacity == 8 && near(d.total_delay_ms, 4000) && near(d.delay_factor_ms, 500) && d.spawn == 0,
        "reactive D_f = 500 case");
  in.response_budget_ms = 2000;
  d = reactive_tick(in);
  check(near(d.delay_factor_ms, 5000) && d.spawn == 5, "reactive D_f = 5000 case");

  check(proactive_tick(55, 10, 4) == 4, "proactive 55 vs 40, B = 4");
  check(sbatch_init(50, 300, 3) == 5, "sbatch 50 req/s, S_r 300, B 3");

  std::string detail = failed.empty() ? "all closed-form examples reproduced" : "failed: ";
  for (size_t i = 0; i < failed.size(); ++i) detail += (i ? ", " : "") + failed[i];
  return {{10, "Formula unit tests", failed.empty(), detail}};
}

std::vector<CriterionResult> determinism(const ProgressFn& progress) {
  const ExperimentConfig cfg = poisson_trends_config();
  const uint64_t seed = cfg.seeds.front();
  bool same = true;
  std::string detail;
  for (PolicyKind p : {PolicyKind::kFifer, PolicyKind::kRScale}) {
    note(progress, fmt::format("determinism: running {} seed {} twice", to_string(p), seed));
    const std::string a = run_cell(cfg, p, seed).report.to_json().dump(2);
    const std::string b = run_cell(cfg, p, seed).report.to_json().dump(2);
    same = same && a == b;
    detail += fmt::format("{}{} {} ({} bytes)", detail.empty() ? "" : "; ", to_string(p),
                          a == b ? "identical" : "differs", a.size());
  }
  return {{11, "Determinism", same, detail}};
}

}  // namespace

std::vector<uint64_t> acceptance_seeds() { return {1, 2, 3}; }

ExperimentConfig poisson_trends_config() {
  ExperimentConfig c;
  c.policies = {PolicyKind::kBline, PolicyKind::kRScale, PolicyKind::kBPred, PolicyKind::kFifer};
  c.seeds = acceptance_seeds();
  return c;
}

ExperimentConfig spike_config() {
  ExperimentConfig c;
  // 300 and 1200 req/s shrunk by 80/2500, the ratio of this cluster to the
  // trace-scale one.
  c.workload.kind = TraceSource::kSpike;
  c.workload.rate_per_s = 9.6;
  c.workload.peak_rate_per_s = 38.4;
  c.workload.spike_starts_ms = {120000, 300000, 480000};
  c.workload.spike_len_ms = 30000;
  c.seeds = acceptance_seeds();
  return c;
}

ExperimentConfig diurnal_predictor_config() {
  ExperimentConfig c;
  c.workload.kind = TraceSource::kDiurnal;
  c.workload.rate_per_s = 50;
  c.workload.amplitude_per_s = 30;
  c.workload.period_ms = 600000;
  c.horizon_ms = 3600000;
  c.seeds = {1};
  return c;
}

std::vector<std::string> suite_names() {
  return {"trends-poisson", "spike", "predictor", "oracle", "formulas", "determinism", "all"};
}

std::vector<CriterionResult> run_suite(const std::string& name, const ProgressFn& progress) {
  using Suite = std::vector<CriterionResult> (*)(const ProgressFn&);
  static const std::vector<std::pair<std::string, Suite>> suites = {
      {"trends-poisson", trends_poisson}, {"spike", spike},       {"predictor", predictor},
      {"oracle", oracle},                 {"formulas", formulas}, {"determinism", determinism}};
  std::vector<CriterionResult> out;
  for (const auto& [id, fn] : suites) {
    if (name != "all" && name != id) continue;
    auto part = fn(progress);
    out.insert(out.end(), part.begin(), part.end());
  }
  if (out.empty()) throw UnknownSuite("unknown suite '" + name + "'");
  std::sort(out.begin(), out.end(), [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
  return out;
}

std::string format_results(const std::vector<CriterionResult>& results) {
  std::string s;
  for (const CriterionResult& r : results)
    s += fmt::format("{} {:>2}. {}: {}\n", r.pass ? "PASS" : "FAIL", r.id, r.name, r.detail);
  return s;
}

}  // namespace chainsim
