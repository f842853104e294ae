#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "chainsim/domain.h"

using namespace chainsim;

TEST(AllocateSlack, ProportionalSharesFollowExecutionTime) {
  const std::vector<double> met = {151.2, 30.3, 6.1, 5.5};
  const double total_met = std::accumulate(met.begin(), met.end(), 0.0);
  const auto slack = allocate_slack(572, met, SlackPolicy::kProportional);
  ASSERT_EQ(slack.size(), met.size());
  for (size_t i = 0; i < met.size(); ++i) EXPECT_NEAR(slack[i], 572.0 * met[i] / total_met, 1e-9);
  EXPECT_NEAR(std::accumulate(slack.begin(), slack.end(), 0.0), 572.0, 1e-9);
}

TEST(AllocateSlack, EqualDivision) {
  const std::vector<double> met = {151.2, 30.3, 6.1, 5.5};
  for (double v : allocate_slack(572, met, SlackPolicy::kEqualDivision)) EXPECT_NEAR(v, 143.0, 1e-9);
}

TEST(AllocateSlack, RejectsNonPositiveSlack) {
  const std::vector<double> met = {10, 20};
  EXPECT_THROW(allocate_slack(0, met, SlackPolicy::kProportional), DomainError);
  EXPECT_THROW(allocate_slack(-5, met, SlackPolicy::kEqualDivision), DomainError);
}

TEST(BatchSize, FloorOfSlackOverMet) {
  EXPECT_EQ(batch_size(447.87, 151.2), 2);
  EXPECT_EQ(batch_size(0, 50), 1);
  EXPECT_EQ(batch_size(500, 100), 5);
  EXPECT_EQ(batch_size(99.9, 100), 1);
}

TEST(BatchSize, NeverBelowOneAndMonotoneInSlack) {
  int prev = 1;
  for (double s = 0; s < 2000; s += 7.3) {
    const int b = batch_size(s, 43.5);
    EXPECT_GE(b, 1);
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(EstimateMet, LinearModelWithFloor) {
  MicroserviceProfile p;
  p.id = "x";
  p.met_ref_ms = 100;
  p.met_slope_ms = 2;
  p.reference_size = 10;
  EXPECT_NEAR(estimate_met(p, 10), 100, 1e-12);
  EXPECT_NEAR(estimate_met(p, 15), 110, 1e-12);
  p.met_slope_ms = -20;
  EXPECT_NEAR(estimate_met(p, 20), kDefaultMetFloorMs, 1e-12);
  EXPECT_THROW(estimate_met(p, -1), std::exception);
}

TEST(Catalog, BuildChainResolvesBudgets) {
  const Catalog c = default_catalog();
  const AppChain chain = c.build_chain("detect-fatigue", SlackPolicy::kProportional);
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_NEAR(chain.total_met_ms(), 193.1, 1e-9);
  EXPECT_NEAR(chain.total_slack_ms, 1000 - 193.1 - 200, 1e-9);
  for (size_t i = 0; i < chain.size(); ++i) {
    EXPECT_NEAR(chain.stage_slack_ms[i], chain.total_slack_ms * chain.stage_met_ms[i] / 193.1, 1e-9);
    EXPECT_EQ(chain.stage_batch_size[i], batch_size(chain.stage_slack_ms[i], chain.stage_met_ms[i]));
    EXPECT_NEAR(chain.response_budget_ms(i), chain.stage_slack_ms[i] + chain.stage_met_ms[i], 1e-9);
  }
}

TEST(Catalog, ValidationCatchesBadReferencesAndInfeasibleChains) {
  Catalog c = default_catalog();
  c.add_chain({"broken", {"IMC", "NOPE"}});
  EXPECT_THROW(c.validate(), DomainError);

  Catalog tight = default_catalog();
  tight.add_chain({"tight", {"HS", "HS"}, 400, 200});
  EXPECT_THROW(tight.validate(), DomainError);
  EXPECT_THROW(tight.build_chain("tight", SlackPolicy::kProportional), DomainError);

  EXPECT_NO_THROW(default_catalog().validate());
}

TEST(SlackPolicy, NamesRoundTrip) {
  for (SlackPolicy p : {SlackPolicy::kProportional, SlackPolicy::kEqualDivision})
    EXPECT_EQ(slack_policy_from_string(to_string(p)), p);
}
