#include <gtest/gtest.h>

#include <vector>

#include "chainsim/metrics.h"

using namespace chainsim;

namespace {

StageRecord stage(double enqueue, double exec_start, double met, double cold = 0, double transition = 0) {
  StageRecord s;
  s.enqueue = enqueue;
  s.dispatch = enqueue;
  s.exec_start = exec_start;
  s.exec_end = exec_start + met;
  s.cold_wait = cold;
  s.transition = transition;
  return s;
}

}  // namespace

TEST(Slo, EqualToBoundPasses) {
  EXPECT_FALSE(classify_slo(1000, 1000));
  EXPECT_TRUE(classify_slo(1000.001, 1000));
  EXPECT_FALSE(classify_slo(0, 1000));
}

TEST(Decompose, WarmPathIsAllExecution) {
  RequestRecord r;
  r.arrival = 0;
  r.stages = {stage(0, 0, 43.5), stage(43.5, 43.5, 0.19), stage(43.69, 43.69, 56.1)};
  r.completion = 43.5 + 0.19 + 56.1;
  const LatencyBreakdown b = decompose_latency(r);
  EXPECT_NEAR(b.exec, 99.79, 1e-9);
  EXPECT_EQ(b.cold_wait, 0);
  EXPECT_EQ(b.batch_wait, 0);
  EXPECT_EQ(b.transition, 0);
}

TEST(Decompose, QueueingBehindABatch) {
  RequestRecord r;
  r.arrival = 0;
  r.stages = {stage(0, 100, 100)};
  r.completion = 200;
  const LatencyBreakdown b = decompose_latency(r);
  EXPECT_NEAR(b.exec, 100, 1e-9);
  EXPECT_NEAR(b.batch_wait, 100, 1e-9);
}

TEST(Decompose, PartsSumToLatency) {
  RequestRecord r;
  r.arrival = 10;
  r.stages = {stage(10, 3010, 50, 3000), stage(3065, 3080, 20, 0, 5)};
  r.completion = 3100;
  const LatencyBreakdown b = decompose_latency(r);
  EXPECT_NEAR(b.exec + b.cold_wait + b.batch_wait + b.transition, r.latency(), 1e-9);
  EXPECT_NEAR(b.cold_wait, 3000, 1e-9);
  EXPECT_NEAR(b.transition, 5, 1e-9);
  EXPECT_NEAR(b.batch_wait, 15, 1e-9);
}

TEST(Decompose, RejectsIncompleteRequest) {
  RequestRecord r;
  EXPECT_THROW(decompose_latency(r), std::logic_error);
}

TEST(NearestRank, Examples) {
  const std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(nearest_rank(v, 0.5), 5);
  EXPECT_EQ(nearest_rank(v, 0.95), 10);
  EXPECT_EQ(nearest_rank(v, 0.9), 9);
  EXPECT_EQ(nearest_rank(v, 0.01), 1);
  EXPECT_EQ(nearest_rank(v, 1.0), 10);
  EXPECT_EQ(nearest_rank(std::vector<double>{}, 0.5), 0);
}

TEST(Rpc, ExecutionsPerContainer) {
  EXPECT_DOUBLE_EQ(rpc(300, 4), 75);
  EXPECT_DOUBLE_EQ(rpc(300, 0), 0);
}

TEST(Summary, ViolationsAndQuantiles) {
  std::vector<RequestRecord> rs;
  for (int i = 1; i <= 20; ++i) {
    RequestRecord r;
    r.id = i;
    r.arrival = 0;
    r.stages = {stage(0, 0, i * 100.0)};
    r.completion = i * 100.0;
    rs.push_back(r);
  }
  RequestRecord pending;
  pending.id = 99;
  rs.push_back(pending);
  MetricsReport m;
  summarize_requests(rs, m);
  EXPECT_EQ(m.requests, 21);
  EXPECT_EQ(m.completed, 20);
  EXPECT_NEAR(m.slo_violation_pct, 50, 1e-9);  // 1100..2000 ms
  EXPECT_EQ(m.p50_ms, 1000);
  EXPECT_EQ(m.p95_ms, 1900);
  EXPECT_EQ(m.p99_ms, 2000);
  EXPECT_NEAR(m.mean_latency_ms, 1050, 1e-9);
}

TEST(Report, JsonCarriesHeadlineFields) {
  MetricsReport m;
  m.policy = "Fifer";
  m.seed = 3;
  m.slo_violation_pct = 1.5;
  const auto j = m.to_json();
  EXPECT_EQ(j["policy"], "Fifer");
  EXPECT_EQ(j["seed"], 3);
  EXPECT_DOUBLE_EQ(j["slo_violation_pct"].get<double>(), 1.5);
  EXPECT_FALSE(m.to_text().empty());
}
