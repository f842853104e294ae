#include <gtest/gtest.h>

#include <cmath>

#include "chainsim/policies.h"

using namespace chainsim;

namespace {

ReactiveInput base_reactive() {
  ReactiveInput in;
  in.delay_ms = 1000;
  in.stage_slack_ms = 100;
  in.pending = 20;
  in.response_budget_ms = 200;
  in.container_batch_sizes = {4, 4};
  in.batch_size = 4;
  in.cold_start_ms = 3000;
  return in;
}

}  // namespace

TEST(Reactive, DelayFactorBelowColdStartSpawnsNothing) {
  const ReactiveDecision d = reactive_tick(base_reactive());
  EXPECT_TRUE(d.triggered);
  EXPECT_EQ(d.capacity, 8);
  EXPECT_NEAR(d.total_delay_ms, 4000, 1e-9);
  EXPECT_NEAR(d.delay_factor_ms, 500, 1e-9);
  EXPECT_EQ(d.spawn, 0);
}

TEST(Reactive, DelayFactorAboveColdStartSpawnsPendingOverBatch) {
  ReactiveInput in = base_reactive();
  in.response_budget_ms = 2000;
  const ReactiveDecision d = reactive_tick(in);
  EXPECT_NEAR(d.delay_factor_ms, 5000, 1e-9);
  EXPECT_EQ(d.spawn, 5);
}

TEST(Reactive, NotTriggeredWithinSlack) {
  ReactiveInput in = base_reactive();
  in.delay_ms = 99;
  in.response_budget_ms = 2000;
  const ReactiveDecision d = reactive_tick(in);
  EXPECT_FALSE(d.triggered);
  EXPECT_EQ(d.spawn, 0);
}

TEST(Reactive, NoCapacitySpawnsAtLeastOne) {
  ReactiveInput in = base_reactive();
  in.container_batch_sizes.clear();
  in.pending = 0;
  const ReactiveDecision d = reactive_tick(in);
  EXPECT_EQ(d.capacity, 0);
  EXPECT_TRUE(std::isinf(d.delay_factor_ms));
  EXPECT_EQ(d.spawn, 1);
  in.pending = 9;
  EXPECT_EQ(reactive_tick(in).spawn, 3);
}

TEST(Proactive, SpawnsShortfallInBatches) {
  EXPECT_EQ(proactive_tick(55, 10, 4), 4);
  EXPECT_EQ(proactive_tick(40, 10, 4), 0);
  EXPECT_EQ(proactive_tick(41, 10, 4), 1);
  EXPECT_EQ(proactive_tick(0, 0, 1), 0);
}

TEST(Proactive, DemandIsLittlesLaw) {
  EXPECT_NEAR(forecast_demand(50, 300), 15, 1e-12);
  EXPECT_NEAR(forecast_demand(0, 300), 0, 1e-12);
}

TEST(SBatch, InitialPool) {
  EXPECT_EQ(sbatch_init(50, 300, 3), 5);
  EXPECT_EQ(sbatch_init(0, 300, 3), 1);
  EXPECT_EQ(sbatch_init(10, 100, 1), 1);
}

TEST(Assemble, SwitchMatrix) {
  const PolicySpec bline = policy_assemble(PolicyKind::kBline);
  EXPECT_TRUE(bline.batch_one && bline.on_demand_spawn && bline.warm_only);
  EXPECT_FALSE(bline.reactive || bline.proactive || bline.static_pool);
  EXPECT_EQ(bline.queue_order, QueueOrder::kFifo);

  const PolicySpec sbatch = policy_assemble(PolicyKind::kSBatch);
  EXPECT_TRUE(sbatch.static_pool);
  EXPECT_FALSE(sbatch.batch_one || sbatch.reactive || sbatch.proactive || sbatch.on_demand_spawn);

  const PolicySpec rscale = policy_assemble(PolicyKind::kRScale);
  EXPECT_TRUE(rscale.reactive);
  EXPECT_FALSE(rscale.proactive || rscale.batch_one);

  const PolicySpec bpred = policy_assemble(PolicyKind::kBPred);
  EXPECT_TRUE(bpred.proactive && bpred.batch_one);
  EXPECT_EQ(bpred.predictor.kind, ForecasterKind::kEwma);

  const PolicySpec fifer = policy_assemble(PolicyKind::kFifer);
  EXPECT_TRUE(fifer.reactive && fifer.proactive);
  EXPECT_FALSE(fifer.batch_one);
  EXPECT_EQ(fifer.predictor.kind, ForecasterKind::kLstm);
}

TEST(Assemble, PredictorOverrideWarnsForBPred) {
  ForecasterConfig fc;
  fc.kind = ForecasterKind::kMwa;
  std::vector<std::string> warnings;
  EXPECT_EQ(policy_assemble(PolicyKind::kBPred, fc, false, &warnings).predictor.kind, ForecasterKind::kEwma);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(policy_assemble(PolicyKind::kBPred, fc, true, &warnings).predictor.kind, ForecasterKind::kMwa);
  EXPECT_FALSE(warnings.empty());
}

TEST(PolicyKind, NamesRoundTrip) {
  for (PolicyKind k : all_policies()) EXPECT_EQ(policy_kind_from_string(to_string(k)), k);
  EXPECT_THROW(policy_kind_from_string("Nope"), std::exception);
}
