#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "chainsim/config.h"
#include "chainsim/engine.h"
#include "chainsim/experiment.h"
#include "chainsim/oracle.h"

using namespace chainsim;

namespace {

// One chain of stages "S0".."Sn" with the given execution times.
struct Micro {
  Catalog catalog;
  ArrivalTrace trace;
  RunInputs in;

  Micro(std::vector<double> met, std::vector<double> arrivals, double cold_ms, PolicyKind kind) {
    ChainSpec spec;
    spec.id = "c";
    spec.overhead_margin_ms = 0;
    for (size_t i = 0; i < met.size(); ++i) {
      MicroserviceProfile p;
      p.id = "S" + std::to_string(i);
      p.met_ref_ms = met[i];
      p.cold_start_min_ms = p.cold_start_max_ms = cold_ms;
      catalog.add_microservice(p);
      spec.stages.push_back(p.id);
    }
    catalog.add_chain(spec);
    for (double a : arrivals) trace.events.push_back({a, "c"});
    trace.horizon_ms = arrivals.empty() ? 1 : arrivals.back() + 1;
    trace.source = TraceSource::kReplay;
    in.catalog = &catalog;
    in.mix = {"micro", {{"c", 1.0}}};
    in.trace = &trace;
    in.policy = policy_assemble(kind);
    in.engine.monitor_interval_ms = 0;
    in.cluster.nodes = 1;
  }

  RunResult go() { return run(in); }
};

ExperimentConfig short_config(PolicyKind kind) {
  ExperimentConfig c;
  c.policies = {kind};
  c.horizon_ms = 120000;
  c.workload.rate_per_s = 20;
  c.workload.prehistory_ms = 100000;
  c.predictor.lstm.epochs = 5;
  c.predictor.lstm.hidden = 8;
  c.predictor_override = false;
  return c;
}

}  // namespace

TEST(Engine, WarmContainerServesImmediately) {
  Micro m({100}, {0}, 3000, PolicyKind::kBline);
  const RunResult r = m.go();
  ASSERT_EQ(r.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(r.requests[0].completion, 100);
  EXPECT_EQ(r.report.cold_start_count, 0);
}

TEST(Engine, ColdStartAddsToLatency) {
  Micro m({100}, {0}, 3000, PolicyKind::kBline);
  m.in.engine.prewarmed_per_stage = 0;
  const RunResult r = m.go();
  ASSERT_EQ(r.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(r.requests[0].completion, 3100);
  EXPECT_DOUBLE_EQ(r.requests[0].stages[0].cold_wait, 3000);
  EXPECT_EQ(r.report.spawns.on_demand, 1);
  const LatencyBreakdown b = decompose_latency(r.requests[0]);
  EXPECT_DOUBLE_EQ(b.exec, 100);
  EXPECT_DOUBLE_EQ(b.cold_wait, 3000);
  EXPECT_DOUBLE_EQ(b.batch_wait, 0);
}

TEST(Engine, BatchedContainerRunsRequestsBackToBack) {
  Micro m({100}, {0, 0}, 3000, PolicyKind::kRScale);
  m.in.engine.batch_size_override = 2;
  const RunResult r = m.go();
  ASSERT_EQ(r.requests.size(), 2u);
  std::vector<double> done = {r.requests[0].completion, r.requests[1].completion};
  std::sort(done.begin(), done.end());
  EXPECT_DOUBLE_EQ(done[0], 100);
  EXPECT_DOUBLE_EQ(done[1], 200);
  EXPECT_EQ(r.report.spawns.on_demand + r.report.spawns.reactive, 0);
}

TEST(Engine, ChainStagesRunInSequence) {
  Micro m({40, 60}, {0}, 3000, PolicyKind::kBline);
  m.in.engine.transition_delay_ms = 5;
  const RunResult r = m.go();
  ASSERT_EQ(r.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(r.requests[0].completion, 105);
  EXPECT_DOUBLE_EQ(decompose_latency(r.requests[0]).transition, 5);
}

TEST(StageQueue, LeastSlackFirst) {
  StageQueue q(QueueOrder::kLsfDynamic);
  q.push({0, 0, 300});
  q.push({1, 0, 150});
  q.push({2, 0, 600});
  EXPECT_EQ(q.pop(0), 1);
  EXPECT_EQ(q.pop(0), 0);
  EXPECT_EQ(q.pop(0), 2);
  EXPECT_TRUE(q.empty());
}

TEST(StageQueue, FifoIgnoresSlack) {
  StageQueue q(QueueOrder::kFifo);
  q.push({0, 0, 300});
  q.push({1, 0, 150});
  q.push({2, 0, 600});
  EXPECT_EQ(q.pop(0), 0);
  EXPECT_EQ(q.pop(0), 1);
  EXPECT_EQ(q.pop(0), 2);
}

TEST(StageQueue, ExhaustedSlackLeavesInArrivalOrder) {
  StageQueue q(QueueOrder::kLsfDynamic);
  q.push({0, 20, 400});
  q.push({1, 10, 450});
  q.push({2, 30, 900});
  EXPECT_EQ(q.pop(500), 1);
  EXPECT_EQ(q.pop(500), 0);
  EXPECT_EQ(q.pop(500), 2);
  EXPECT_THROW(q.pop(500), std::logic_error);
}

TEST(PlanStages, SharedStageTakesTightestBudget) {
  const Catalog catalog = default_catalog();
  ArrivalTrace trace;
  const PolicySpec fifer = policy_assemble(PolicyKind::kFifer);
  const WorkloadMix both{"both", {{"img", 0.5}, {"ipa", 0.5}}};
  const StagePlan plan = plan_stages(catalog, both, trace, fifer, EngineConfig{});
  const auto img = catalog.build_chain("img", SlackPolicy::kProportional);
  const auto ipa = catalog.build_chain("ipa", SlackPolicy::kProportional);
  const auto nlp = std::find_if(plan.stages.begin(), plan.stages.end(),
                                [](const StageParams& s) { return s.microservice == "NLP"; });
  ASSERT_NE(nlp, plan.stages.end());
  EXPECT_DOUBLE_EQ(nlp->slack_ms, std::min(img.stage_slack_ms[1], ipa.stage_slack_ms[1]));
  EXPECT_EQ(nlp->batch_size, std::min(img.stage_batch_size[1], ipa.stage_batch_size[1]));
  EXPECT_EQ(nlp->chains.size(), 2u);
  for (const StageParams& s : plan.stages) EXPECT_DOUBLE_EQ(s.response_budget_ms, s.slack_ms + s.met_ms);
}

TEST(PlanStages, BatchOneForcesSingleSlots) {
  const StagePlan plan = plan_stages(default_catalog(), WorkloadMix::heavy(), ArrivalTrace{},
                                     policy_assemble(PolicyKind::kBline), EngineConfig{});
  for (const StageParams& s : plan.stages) EXPECT_EQ(s.batch_size, 1);
}

namespace chainsim {
void PrintTo(PolicyKind k, std::ostream* os) { *os << to_string(k); }
}  // namespace chainsim

class PolicyInvariants : public ::testing::TestWithParam<PolicyKind> {};

TEST_P(PolicyInvariants, HoldOnShortPoissonRun) {
  const ExperimentConfig cfg = short_config(GetParam());
  const ArrivalTrace trace = make_trace(cfg, 1);
  const RunInputs in = make_inputs(cfg, GetParam(), 1, trace);
  const RunResult r = run(in);
  EXPECT_TRUE(r.conservation_held);
  EXPECT_TRUE(r.ready_respected);
  EXPECT_EQ(r.report.completed, r.report.requests);
  EXPECT_EQ(static_cast<size_t>(r.report.requests), trace.executed_count());

  std::map<int, std::vector<std::pair<double, double>>> runs;
  for (const RequestRecord& rec : r.requests) {
    ASSERT_TRUE(rec.completed());
    const AppChain chain = cfg.catalog.build_chain(rec.chain_id, in.policy.slack_policy);
    EXPECT_GE(rec.latency() + 1e-6, chain.total_met_ms());
    double prev_end = rec.arrival;
    for (const StageRecord& s : rec.stages) {
      EXPECT_GE(s.exec_start + 1e-9, s.enqueue);
      EXPECT_GE(s.enqueue + 1e-9, prev_end);
      prev_end = s.exec_end;
      runs[s.container].push_back({s.exec_start, s.exec_end});
      const Container& c = r.containers.at(static_cast<size_t>(s.container));
      EXPECT_GE(s.exec_start + 1e-9, c.ready_at);
    }
  }
  // A container executes one request at a time.
  for (auto& [id, spans] : runs) {
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i) EXPECT_GE(spans[i].first + 1e-9, spans[i - 1].second) << id;
  }
  if (in.policy.batch_one)
    for (const Container& c : r.containers) EXPECT_EQ(c.batch_size, 1);
}

INSTANTIATE_TEST_SUITE_P(AllPolicies, PolicyInvariants,
                         ::testing::Values(PolicyKind::kBline, PolicyKind::kSBatch, PolicyKind::kRScale,
                                           PolicyKind::kBPred, PolicyKind::kFifer),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Engine, SBatchNeverScales) {
  const ExperimentConfig cfg = short_config(PolicyKind::kSBatch);
  const Cell cell = run_cell(cfg, PolicyKind::kSBatch, 2);
  const SpawnBreakdown& s = cell.report.spawns;
  EXPECT_EQ(s.on_demand + s.reactive + s.proactive, 0);
  EXPECT_GT(s.prewarmed + s.static_pool, 0);
}

TEST(Engine, SameSeedSameReport) {
  const ExperimentConfig cfg = short_config(PolicyKind::kFifer);
  const std::string a = run_cell(cfg, PolicyKind::kFifer, 4).report.to_json().dump();
  const std::string b = run_cell(cfg, PolicyKind::kFifer, 4).report.to_json().dump();
  EXPECT_EQ(a, b);
}

TEST(Oracle, EventEngineMatchesTimeSteppedReference) {
  const OracleComparison cmp = compare_with_oracle(30, 77);
  EXPECT_EQ(cmp.instances, 30);
  EXPECT_EQ(cmp.matched, cmp.instances);
  EXPECT_TRUE(cmp.spawns_match);
  EXPECT_LE(cmp.max_abs_diff_ms, 0.01);
  for (const std::string& f : cmp.failures) ADD_FAILURE() << f;
}
