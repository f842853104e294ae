#pragma once

// Arrival-rate forecasters over windowed-max load samples.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

class PredictorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ForecasterKind { kMwa, kEwma, kLinReg, kLogReg, kLstm };

std::string_view to_string(ForecasterKind kind);
ForecasterKind forecaster_kind_from_string(std::string_view name);

struct LstmConfig {
  int layers = 2;
  int hidden = 32;
  int epochs = 100;
  int seq_len = 20;
  double learning_rate = 0.01;
  double forget_bias = 1.0;
  uint64_t seed = 7;
};

struct ForecasterConfig {
  ForecasterKind kind = ForecasterKind::kLstm;
  double window_ms = 5000;       // W_s
  double history_ms = 100000;
  double horizon_ms = 600000;    // W_p
  double sub_bin_ms = 1000;
  int mwa_k = 20;
  double ewma_alpha = 0.5;
  double train_fraction = 0.6;
  LstmConfig lstm;

  int windows() const { return static_cast<int>(history_ms / window_ms + 0.5); }
  void validate() const;
};

struct LoadSample {
  double window_start_ms = 0;
  double window_len_ms = 0;
  double max_rate = 0;           // req/s
};

// history/W_s adjacent windows ending at `now`. Each sample is the largest
// per-sub-bin rate inside its window. Windows before the first arrival read 0.
// `arrivals` must be sorted.
std::vector<LoadSample> sample_windows(std::span<const double> arrivals, double now, const ForecasterConfig& cfg);

// Windowed-max series over [start, end) in steps of W_s.
std::vector<double> windowed_max_series(std::span<const double> arrivals, double start_ms, double end_ms,
                                        const ForecasterConfig& cfg);

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual ForecasterKind kind() const = 0;
  // Fits model parameters on a windowed-max series; a no-op for the
  // statistical kinds.
  virtual void train(std::span<const double> series) { (void)series; }
  virtual bool trained() const { return true; }
  // Predicted next windowed max, never negative. `samples` must be non-empty.
  virtual double forecast(std::span<const double> samples) const = 0;
};

class MwaForecaster : public Forecaster {
 public:
  explicit MwaForecaster(int k) : k_(k) {}
  ForecasterKind kind() const override { return ForecasterKind::kMwa; }
  double forecast(std::span<const double> samples) const override;

 private:
  int k_;
};

class EwmaForecaster : public Forecaster {
 public:
  explicit EwmaForecaster(double alpha) : alpha_(alpha) {}
  ForecasterKind kind() const override { return ForecasterKind::kEwma; }
  double forecast(std::span<const double> samples) const override;

 private:
  double alpha_;
};

// Least squares over (index, value), extrapolated one step.
class LinRegForecaster : public Forecaster {
 public:
  ForecasterKind kind() const override { return ForecasterKind::kLinReg; }
  double forecast(std::span<const double> samples) const override;
};

// Logistic curve over index, fit by IRLS on min-max normalized values and
// rescaled.
class LogRegForecaster : public Forecaster {
 public:
  ForecasterKind kind() const override { return ForecasterKind::kLogReg; }
  double forecast(std::span<const double> samples) const override;
};

struct LstmCache;

// Stacked LSTM with a linear read-out, trained by backprop through time with
// plain SGD. All parameters live in one flat vector; see layout().
class Lstm {
 public:
  struct Gradients {
    std::vector<double> d;
  };

  struct LayerOffsets {
    size_t w;        // 4H x (in + H), rows ordered i, f, g, o
    size_t b;        // 4H
    int in;
  };

  explicit Lstm(const LstmConfig& cfg, int input_dim = 1);

  const LstmConfig& config() const { return cfg_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<LayerOffsets>& layout() const { return layout_; }
  size_t out_w() const { return out_w_; }
  size_t out_b() const { return out_b_; }

  // Output for a normalized input sequence.
  double predict(std::span<const double> seq) const;

  // Half squared error against target; accumulates into grads when given.
  double loss(std::span<const double> seq, double target, Gradients* grads) const;

  // Forward pass that also records every gate activation.
  struct Trace {
    std::vector<double> gates;       // sigmoid gates
    std::vector<double> candidates;  // tanh candidates
  };
  double predict_traced(std::span<const double> seq, Trace& trace) const;

  void sgd_step(const Gradients& grads, double lr);

 private:
  double forward(std::span<const double> seq, LstmCache* cache, Trace* trace) const;

  LstmConfig cfg_;
  int input_dim_;
  std::vector<LayerOffsets> layout_;
  size_t out_w_ = 0;
  size_t out_b_ = 0;
  std::vector<double> params_;
};

class LstmForecaster : public Forecaster {
 public:
  explicit LstmForecaster(const LstmConfig& cfg) : model_(cfg) {}
  ForecasterKind kind() const override { return ForecasterKind::kLstm; }

  // Trains on sliding windows of seq_len values predicting the next one.
  // Inputs are divided by the training-set max.
  void train(std::span<const double> series) override;
  bool trained() const override { return trained_; }
  double forecast(std::span<const double> samples) const override;

  double scale() const { return scale_; }
  const Lstm& model() const { return model_; }

  // Flat little-endian layout: "CSLSTM01", u32 layers, u32 hidden,
  // u32 seq_len, f64 scale, u64 n, n x f64 params.
  void save(const std::filesystem::path& path) const;
  static LstmForecaster load(const std::filesystem::path& path, const LstmConfig& base = {});

 private:
  Lstm model_;
  double scale_ = 1;
  bool trained_ = false;
};

std::unique_ptr<Forecaster> make_forecaster(const ForecasterConfig& cfg);

struct RmseResult {
  double rmse = 0;
  std::vector<double> predictions;
  std::vector<double> actual;
};

// Trains on the first `split` of the series (model kinds only), then predicts
// each later value from the preceding history/W_s values.
RmseResult evaluate_rmse(Forecaster& forecaster, std::span<const double> series, double split,
                         const ForecasterConfig& cfg);

}  // namespace chainsim
