// Command-line driver: single runs, policy sweeps, trace generation,
// predictor evaluation and the acceptance suites.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "chainsim/acceptance.h"
#include "chainsim/atomic_file.h"
#include "chainsim/config.h"
#include "chainsim/experiment.h"
#include "chainsim/predictor.h"

namespace {

using namespace chainsim;

constexpr int kExitValidation = 2;

struct Overrides {
  std::string config;
  std::string policy;
  std::optional<uint64_t> seed;
  std::optional<double> rate;
  std::string trace;
  std::string out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON experiment config (defaults when omitted)");
  cmd->add_option("--policy", o.policy, "Bline | SBatch | RScale | BPred | Fifer");
  cmd->add_option("--seed", o.seed, "Single seed, replacing the config's seed list");
  cmd->add_option("--rate", o.rate, "Arrival rate in req/s");
  cmd->add_option("--trace", o.trace, "Replay this CSV trace");
  cmd->add_option("--out", o.out, "Output directory or file");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.policy.empty()) {
    try {
      c.policies = {policy_kind_from_string(o.policy)};
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.seed) c.seeds = {*o.seed};
  if (o.rate) c.workload.rate_per_s = *o.rate;
  if (!o.trace.empty()) {
    c.workload.kind = TraceSource::kReplay;
    c.workload.path = o.trace;
  }
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

int cmd_run(const Overrides& o, bool sweep) {
  ExperimentConfig c = resolve(o);
  if (!sweep && c.policies.size() > 1) c.policies = {c.policies.front()};
  const std::vector<Cell> cells = run_sweep(c);
  for (const Cell& cell : cells)
    for (const std::string& w : cell.warnings) fmt::print(stderr, "warning: {}\n", w);
  write_reports(cells, c.output_dir);
  if (sweep) {
    std::cout << comparison_csv(cells);
  } else {
    for (const Cell& cell : cells) std::cout << cell.report.to_text() << "\n";
  }
  fmt::print(stderr, "reports written to {}\n", c.output_dir);
  return 0;
}

int cmd_trace_gen(const Overrides& o) {
  ExperimentConfig c = resolve(o);
  const ArrivalTrace trace = make_trace(c, c.seeds.front());
  const std::string out = o.out.empty() ? "trace.csv" : o.out;
  write_trace_csv(trace, out);
  fmt::print(stderr, "{} arrivals ({} executed) written to {}\n", trace.events.size(), trace.executed_count(), out);
  return 0;
}

int cmd_predict_eval(const Overrides& o, const std::string& save_model) {
  ExperimentConfig c = resolve(o);
  const ArrivalTrace trace = make_trace(c, c.seeds.front());
  std::vector<double> times;
  for (const Arrival& a : trace.events) times.push_back(a.time_ms);
  const auto series = windowed_max_series(times, trace.start_ms, trace.horizon_ms, c.predictor);
  std::string csv = "predictor,rmse\n";
  for (ForecasterKind k : {ForecasterKind::kMwa, ForecasterKind::kEwma, ForecasterKind::kLinReg,
                           ForecasterKind::kLogReg, ForecasterKind::kLstm}) {
    ForecasterConfig fc = c.predictor;
    fc.kind = k;
    auto f = make_forecaster(fc);
    const RmseResult r = evaluate_rmse(*f, series, fc.train_fraction, fc);
    csv += fmt::format("{},{:.4f}\n", to_string(k), r.rmse);
    if (k == ForecasterKind::kLstm && !save_model.empty())
      static_cast<const LstmForecaster&>(*f).save(save_model);
  }
  std::cout << csv;
  if (!o.out.empty()) write_file_atomic(o.out, csv);
  return 0;
}

int cmd_accept(const std::string& suite) {
  const auto results = run_suite(suite, [](const std::string& msg) { fmt::print(stderr, "{}\n", msg); });
  std::cout << format_results(results);
  for (const CriterionResult& r : results)
    if (!r.pass) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serverless function-chain cluster simulator"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, trace_o, pred_o;
  auto* run_cmd = app.add_subcommand("run", "Run one policy (the first configured, or --policy) over the seeds");
  add_overrides(run_cmd, run_o);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every configured policy and write a comparison table");
  add_overrides(sweep_cmd, sweep_o);
  auto* trace_cmd = app.add_subcommand("trace-gen", "Write the configured workload as a CSV trace");
  add_overrides(trace_cmd, trace_o);
  auto* pred_cmd = app.add_subcommand("predict-eval", "RMSE of every forecaster on the configured workload");
  add_overrides(pred_cmd, pred_o);
  std::string save_model;
  pred_cmd->add_option("--save-model", save_model, "Write the trained LSTM here");
  std::string suite;
  auto* accept_cmd = app.add_subcommand("accept", "Run an acceptance suite");
  accept_cmd->add_option("suite", suite, "trends-poisson | spike | predictor | oracle | formulas | determinism | all")
      ->required();
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration as JSON");
  Overrides config_o;
  add_overrides(config_cmd, config_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_o, false);
    if (*sweep_cmd) return cmd_run(sweep_o, true);
    if (*trace_cmd) return cmd_trace_gen(trace_o);
    if (*pred_cmd) return cmd_predict_eval(pred_o, save_model);
    if (*accept_cmd) return cmd_accept(suite);
    if (*config_cmd) {
      std::cout << to_json(resolve(config_o)).dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitValidation;
  } catch (const UnknownSuite& e) {
    fmt::print(stderr, "{}\n", e.what());
    return kExitValidation;
  } catch (const TraceError& e) {
    fmt::print(stderr, "trace error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
