#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "chainsim/predictor.h"
#include "chainsim/rng.h"

using namespace chainsim;

namespace {

LstmConfig small_lstm() {
  LstmConfig c;
  c.layers = 2;
  c.hidden = 4;
  c.seq_len = 2;
  c.epochs = 40;
  c.seed = 3;
  return c;
}

double persistence_rmse(const std::vector<double>& series, size_t from) {
  double s = 0;
  size_t n = 0;
  for (size_t i = from; i < series.size(); ++i, ++n) s += std::pow(series[i] - series[i - 1], 2);
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace

TEST(Forecast, ClosedFormExamples) {
  const std::vector<double> three = {10, 20, 30};
  EXPECT_NEAR(MwaForecaster(3).forecast(three), 20, 1e-12);
  EXPECT_NEAR(EwmaForecaster(0.5).forecast(std::vector<double>{10, 20}), 15, 1e-12);
  EXPECT_NEAR(LinRegForecaster().forecast(three), 40, 1e-9);
}

TEST(Forecast, MwaUsesLastK) {
  EXPECT_NEAR(MwaForecaster(2).forecast(std::vector<double>{100, 10, 20}), 15, 1e-12);
  EXPECT_NEAR(MwaForecaster(10).forecast(std::vector<double>{4, 8}), 6, 1e-12);
}

TEST(Forecast, EwmaLimits) {
  const std::vector<double> s = {7, 3, 11, 5};
  EXPECT_DOUBLE_EQ(EwmaForecaster(1.0).forecast(s), 5);
  EXPECT_NEAR(EwmaForecaster(1e-9).forecast(s), 7, 1e-6);
}

TEST(Forecast, NeverNegative) {
  const std::vector<double> falling = {30, 20, 10, 0};
  EXPECT_EQ(LinRegForecaster().forecast(falling), 0);
  EXPECT_GE(LogRegForecaster().forecast(falling), 0);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng.next() % 20);
    for (double& x : s) x = rng.uniform(0, 100);
    EXPECT_GE(MwaForecaster(5).forecast(s), 0);
    EXPECT_GE(EwmaForecaster(0.3).forecast(s), 0);
    EXPECT_GE(LinRegForecaster().forecast(s), 0);
    EXPECT_GE(LogRegForecaster().forecast(s), 0);
  }
}

TEST(Forecast, LogRegTracksSaturatingGrowth) {
  std::vector<double> s;
  for (int i = 0; i < 20; ++i) s.push_back(100.0 / (1 + std::exp(-(i - 10) * 0.5)));
  const double next = 100.0 / (1 + std::exp(-(20 - 10) * 0.5));
  EXPECT_NEAR(LogRegForecaster().forecast(s), next, 5.0);
}

TEST(Sampling, EmptyLogIsAllZero) {
  ForecasterConfig cfg;
  const auto w = sample_windows(std::vector<double>{}, 200000, cfg);
  ASSERT_EQ(static_cast<int>(w.size()), cfg.windows());
  for (const LoadSample& s : w) EXPECT_EQ(s.max_rate, 0);
}

TEST(Sampling, SingleBurstLandsInOneWindow) {
  ForecasterConfig cfg;
  std::vector<double> arrivals;
  for (int i = 0; i < 7; ++i) arrivals.push_back(150200 + i);
  const auto w = sample_windows(arrivals, 200000, cfg);
  int nonzero = 0;
  for (const LoadSample& s : w) {
    if (s.max_rate > 0) {
      ++nonzero;
      EXPECT_NEAR(s.max_rate, 7, 1e-12);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(Sampling, MatchesBruteForceBinCounts) {
  ForecasterConfig cfg;
  Rng rng(21);
  std::vector<double> arrivals;
  for (double t = rng.exponential(20); t < 200000; t += rng.exponential(20)) arrivals.push_back(t);
  const double now = 200000;
  const auto w = sample_windows(arrivals, now, cfg);
  for (const LoadSample& s : w) {
    double best = 0;
    for (double b = s.window_start_ms; b < s.window_start_ms + s.window_len_ms - 1e-9; b += cfg.sub_bin_ms) {
      const auto n = std::count_if(arrivals.begin(), arrivals.end(),
                                   [&](double t) { return t >= b && t < b + cfg.sub_bin_ms; });
      best = std::max(best, static_cast<double>(n) * 1000.0 / cfg.sub_bin_ms);
    }
    EXPECT_NEAR(s.max_rate, best, 1e-9);
    EXPECT_NEAR(s.max_rate, 50, 3 * std::sqrt(50.0) + 15);
  }
}

TEST(Rmse, ConstantLoadGivesZeroForMwa) {
  ForecasterConfig cfg;
  const std::vector<double> series(200, 42.0);
  MwaForecaster f(cfg.mwa_k);
  EXPECT_NEAR(evaluate_rmse(f, series, 0.6, cfg).rmse, 0, 1e-12);
}

TEST(Rmse, EwmaAlphaOneIsPersistence) {
  ForecasterConfig cfg;
  Rng rng(9);
  std::vector<double> series(120);
  for (double& x : series) x = rng.uniform(10, 60);
  EwmaForecaster f(1.0);
  const RmseResult r = evaluate_rmse(f, series, 0.6, cfg);
  const size_t from = series.size() - r.actual.size();
  EXPECT_NEAR(r.rmse, persistence_rmse(series, from), 1e-9);
}

TEST(Rmse, LstmBeatsMwaOnSquareWave) {
  ForecasterConfig cfg;
  cfg.lstm = small_lstm();
  cfg.lstm.hidden = 8;
  cfg.lstm.seq_len = 8;
  cfg.lstm.epochs = 60;
  std::vector<double> series;
  for (int i = 0; i < 240; ++i) series.push_back((i / 4) % 2 ? 80.0 : 20.0);
  LstmForecaster lstm(cfg.lstm);
  MwaForecaster mwa(cfg.mwa_k);
  const double r_lstm = evaluate_rmse(lstm, series, 0.6, cfg).rmse;
  const double r_mwa = evaluate_rmse(mwa, series, 0.6, cfg).rmse;
  EXPECT_LT(r_lstm, r_mwa);
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  Lstm model(small_lstm());
  const std::vector<double> seq = {0.3, 0.8};
  const double target = 0.5;
  Lstm::Gradients g;
  g.d.assign(model.params().size(), 0.0);
  model.loss(seq, target, &g);
  double worst = 0;
  const double h = 1e-6;
  for (size_t i = 0; i < model.params().size(); ++i) {
    const double keep = model.params()[i];
    model.params()[i] = keep + h;
    const double up = model.loss(seq, target, nullptr);
    model.params()[i] = keep - h;
    const double down = model.loss(seq, target, nullptr);
    model.params()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(g.d[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - g.d[i]) / scale);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Lstm, GateActivationsBounded) {
  Lstm model(small_lstm());
  for (double& p : model.params()) p *= 5;  // push towards saturation
  Lstm::Trace trace;
  model.predict_traced(std::vector<double>{0.1, 2.0, -1.5, 0.7}, trace);
  ASSERT_FALSE(trace.gates.empty());
  for (double g : trace.gates) {
    EXPECT_GT(g, 0);
    EXPECT_LT(g, 1);
  }
  for (double c : trace.candidates) {
    EXPECT_GE(c, -1);
    EXPECT_LE(c, 1);
  }
}

TEST(Lstm, UntrainedForecastThrows) {
  LstmForecaster f(small_lstm());
  EXPECT_THROW(f.forecast(std::vector<double>{1, 2, 3}), PredictorError);
}

TEST(Lstm, TrainingIsDeterministicAndSaveLoadRoundTrips) {
  std::vector<double> series;
  for (int i = 0; i < 60; ++i) series.push_back(30 + 20 * std::sin(i * 0.4));
  LstmForecaster a(small_lstm()), b(small_lstm());
  a.train(series);
  b.train(series);
  EXPECT_EQ(a.model().params(), b.model().params());
  const std::vector<double> recent(series.end() - 10, series.end());
  EXPECT_EQ(a.forecast(recent), b.forecast(recent));

  const auto path = std::filesystem::temp_directory_path() / "chainsim_lstm.bin";
  a.save(path);
  const LstmForecaster c = LstmForecaster::load(path);
  EXPECT_TRUE(c.trained());
  EXPECT_EQ(c.model().params(), a.model().params());
  EXPECT_DOUBLE_EQ(c.scale(), a.scale());
  EXPECT_DOUBLE_EQ(c.forecast(recent), a.forecast(recent));
  std::filesystem::remove(path);
}

TEST(Lstm, LoadRejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "chainsim_bad.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a model", f);
    std::fclose(f);
  }
  EXPECT_THROW(LstmForecaster::load(path), PredictorError);
  std::filesystem::remove(path);
}

TEST(ForecasterKind, NamesRoundTrip) {
  for (ForecasterKind k : {ForecasterKind::kMwa, ForecasterKind::kEwma, ForecasterKind::kLinReg,
                           ForecasterKind::kLogReg, ForecasterKind::kLstm})
    EXPECT_EQ(forecaster_kind_from_string(to_string(k)), k);
}
