#include "chainsim/predictor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "chainsim/atomic_file.h"
#include "chainsim/rng.h"

namespace chainsim {

std::string_view to_string(ForecasterKind kind) {
  switch (kind) {
    case ForecasterKind::kMwa: return "mwa";
    case ForecasterKind::kEwma: return "ewma";
    case ForecasterKind::kLinReg: return "linreg";
    case ForecasterKind::kLogReg: return "logreg";
    case ForecasterKind::kLstm: return "lstm";
  }
  return "?";
}

ForecasterKind forecaster_kind_from_string(std::string_view name) {
  for (auto k : {ForecasterKind::kMwa, ForecasterKind::kEwma, ForecasterKind::kLinReg, ForecasterKind::kLogReg,
                 ForecasterKind::kLstm})
    if (name == to_string(k)) return k;
  throw PredictorError("unknown predictor: " + std::string(name));
}

void ForecasterConfig::validate() const {
  if (!(window_ms > 0)) throw PredictorError("window_ms must be > 0");
  if (!(sub_bin_ms > 0) || sub_bin_ms > window_ms) throw PredictorError("sub_bin_ms must lie in (0, window_ms]");
  const double ratio = history_ms / window_ms;
  if (!(history_ms > 0) || std::abs(ratio - std::round(ratio)) > 1e-9)
    throw PredictorError("history_ms must be a positive multiple of window_ms");
  if (mwa_k < 1) throw PredictorError("mwa_k must be >= 1");
  if (!(ewma_alpha > 0) || ewma_alpha > 1) throw PredictorError("ewma_alpha must lie in (0, 1]");
  if (!(train_fraction > 0) || !(train_fraction < 1)) throw PredictorError("train_fraction must lie in (0, 1)");
  if (lstm.layers < 1 || lstm.hidden < 1 || lstm.epochs < 0 || lstm.seq_len < 1)
    throw PredictorError("invalid LSTM dimensions");
  if (!(lstm.learning_rate > 0)) throw PredictorError("LSTM learning rate must be > 0");
}

namespace {

// Largest sub-bin count in [lo, hi), as a rate in req/s.
double window_max_rate(std::span<const double> arrivals, double lo, double hi, double sub_bin_ms) {
  double best = 0;
  auto it = std::lower_bound(arrivals.begin(), arrivals.end(), lo);
  for (double b = lo; b < hi - 1e-9; b += sub_bin_ms) {
    const double end = std::min(b + sub_bin_ms, hi);
    auto stop = std::lower_bound(it, arrivals.end(), end);
    const double count = static_cast<double>(stop - it);
    best = std::max(best, count * 1000.0 / (end - b));
    it = stop;
  }
  return best;
}

}  // namespace

std::vector<LoadSample> sample_windows(std::span<const double> arrivals, double now, const ForecasterConfig& cfg) {
  const int n = cfg.windows();
  std::vector<LoadSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    LoadSample s;
    s.window_start_ms = now - cfg.history_ms + i * cfg.window_ms;
    s.window_len_ms = cfg.window_ms;
    s.max_rate = window_max_rate(arrivals, s.window_start_ms, s.window_start_ms + cfg.window_ms, cfg.sub_bin_ms);
    out.push_back(s);
  }
  return out;
}

std::vector<double> windowed_max_series(std::span<const double> arrivals, double start_ms, double end_ms,
                                        const ForecasterConfig& cfg) {
  std::vector<double> out;
  for (double t = start_ms; t + cfg.window_ms <= end_ms + 1e-9; t += cfg.window_ms)
    out.push_back(window_max_rate(arrivals, t, t + cfg.window_ms, cfg.sub_bin_ms));
  return out;
}

double MwaForecaster::forecast(std::span<const double> samples) const {
  if (samples.empty()) throw PredictorError("forecast: no samples");
  const size_t k = std::min(samples.size(), static_cast<size_t>(k_));
  const double sum = std::accumulate(samples.end() - static_cast<long>(k), samples.end(), 0.0);
  return std::max(0.0, sum / static_cast<double>(k));
}

double EwmaForecaster::forecast(std::span<const double> samples) const {
  if (samples.empty()) throw PredictorError("forecast: no samples");
  double s = samples[0];
  for (size_t i = 1; i < samples.size(); ++i) s = alpha_ * samples[i] + (1 - alpha_) * s;
  return std::max(0.0, s);
}

double LinRegForecaster::forecast(std::span<const double> samples) const {
  if (samples.empty()) throw PredictorError("forecast: no samples");
  const double n = static_cast<double>(samples.size());
  if (samples.size() == 1) return std::max(0.0, samples[0]);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += samples[i];
    sxx += x * x;
    sxy += x * samples[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  return std::max(0.0, intercept + slope * n);
}

double LogRegForecaster::forecast(std::span<const double> samples) const {
  if (samples.empty()) throw PredictorError("forecast: no samples");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-12) return std::max(0.0, lo);
  const size_t n = samples.size();
  // Index scaled to [0, 1] keeps the Newton system well conditioned.
  const double xs = n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
  double a = 0, b = 0;
  constexpr double kRidge = 1e-6;
  for (int iter = 0; iter < 50; ++iter) {
    double g0 = -kRidge * a, g1 = -kRidge * b;
    double h00 = kRidge, h01 = 0, h11 = kRidge;
    for (size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) * xs;
      const double y = (samples[i] - lo) / (hi - lo);
      const double p = 1.0 / (1.0 + std::exp(-(a + b * x)));
      const double w = std::max(p * (1 - p), 1e-10);
      g0 += y - p;
      g1 += (y - p) * x;
      h00 += w;
      h01 += w * x;
      h11 += w * x * x;
    }
    const double det = h00 * h11 - h01 * h01;
    if (std::abs(det) < 1e-300) break;
    const double da = (h11 * g0 - h01 * g1) / det;
    const double db = (h00 * g1 - h01 * g0) / det;
    a += da;
    b += db;
    if (std::abs(da) + std::abs(db) < 1e-10) break;
  }
  const double x_next = static_cast<double>(n) * xs;
  const double p = 1.0 / (1.0 + std::exp(-(a + b * x_next)));
  return std::max(0.0, lo + p * (hi - lo));
}

// ---------------------------------------------------------------------------
// LSTM

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

struct LstmCache {
  struct Step {
    std::vector<double> z, i, f, g, o, c, tc, c_prev;
  };
  std::vector<std::vector<Step>> layers;  // [layer][t]
  double y = 0;
};

Lstm::Lstm(const LstmConfig& cfg, int input_dim) : cfg_(cfg), input_dim_(input_dim) {
  const int h = cfg.hidden;
  size_t offset = 0;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerOffsets lo;
    lo.in = l == 0 ? input_dim : h;
    lo.w = offset;
    offset += static_cast<size_t>(4 * h) * static_cast<size_t>(lo.in + h);
    lo.b = offset;
    offset += static_cast<size_t>(4 * h);
    layout_.push_back(lo);
  }
  out_w_ = offset;
  offset += static_cast<size_t>(h);
  out_b_ = offset;
  offset += 1;
  params_.assign(offset, 0.0);

  Rng rng(cfg.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& p : params_) p = rng.uniform(-bound, bound);
  for (const LayerOffsets& lo : layout_) {
    for (int k = 0; k < 4 * h; ++k) params_[lo.b + static_cast<size_t>(k)] = 0;
    for (int k = h; k < 2 * h; ++k) params_[lo.b + static_cast<size_t>(k)] = cfg.forget_bias;
  }
  params_[out_b_] = 0;
}

double Lstm::forward(std::span<const double> seq, LstmCache* cache, Trace* trace) const {
  const int h = cfg_.hidden;
  const size_t hs = static_cast<size_t>(h);
  const size_t steps = seq.size();
  std::vector<std::vector<double>> inputs(steps);
  for (size_t t = 0; t < steps; ++t) inputs[t] = {seq[t]};
  if (cache) cache->layers.assign(layout_.size(), {});

  std::vector<double> a(4 * hs);
  for (size_t l = 0; l < layout_.size(); ++l) {
    const LayerOffsets& lo = layout_[l];
    const size_t cols = static_cast<size_t>(lo.in) + hs;
    std::vector<double> hprev(hs, 0.0), cprev(hs, 0.0);
    std::vector<std::vector<double>> outputs(steps);
    for (size_t t = 0; t < steps; ++t) {
      std::vector<double> z(cols);
      std::copy(inputs[t].begin(), inputs[t].end(), z.begin());
      std::copy(hprev.begin(), hprev.end(), z.begin() + lo.in);
      for (size_t r = 0; r < 4 * hs; ++r) {
        const double* w = &params_[lo.w + r * cols];
        double acc = params_[lo.b + r];
        for (size_t k = 0; k < cols; ++k) acc += w[k] * z[k];
        a[r] = acc;
      }
      std::vector<double> ig(hs), fg(hs), gg(hs), og(hs), c(hs), tc(hs), hn(hs);
      for (size_t k = 0; k < hs; ++k) {
        ig[k] = sigmoid(a[k]);
        fg[k] = sigmoid(a[hs + k]);
        gg[k] = std::tanh(a[2 * hs + k]);
        og[k] = sigmoid(a[3 * hs + k]);
        c[k] = fg[k] * cprev[k] + ig[k] * gg[k];
        tc[k] = std::tanh(c[k]);
        hn[k] = og[k] * tc[k];
      }
      if (trace) {
        trace->gates.insert(trace->gates.end(), ig.begin(), ig.end());
        trace->gates.insert(trace->gates.end(), fg.begin(), fg.end());
        trace->gates.insert(trace->gates.end(), og.begin(), og.end());
        trace->candidates.insert(trace->candidates.end(), gg.begin(), gg.end());
      }
      if (cache)
        cache->layers[l].push_back({std::move(z), std::move(ig), std::move(fg), std::move(gg), std::move(og), c,
                                    std::move(tc), cprev});
      cprev = std::move(c);
      hprev = hn;
      outputs[t] = std::move(hn);
    }
    inputs = std::move(outputs);
  }
  double y = params_[out_b_];
  for (size_t k = 0; k < hs; ++k) y += params_[out_w_ + k] * inputs.back()[k];
  if (cache) cache->y = y;
  return y;
}

double Lstm::predict(std::span<const double> seq) const {
  if (seq.empty()) throw PredictorError("lstm: empty input sequence");
  return forward(seq, nullptr, nullptr);
}

double Lstm::predict_traced(std::span<const double> seq, Trace& trace) const {
  if (seq.empty()) throw PredictorError("lstm: empty input sequence");
  return forward(seq, nullptr, &trace);
}

double Lstm::loss(std::span<const double> seq, double target, Gradients* grads) const {
  if (seq.empty()) throw PredictorError("lstm: empty input sequence");
  LstmCache cache;
  const double y = forward(seq, grads ? &cache : nullptr, nullptr);
  const double err = y - target;
  if (!grads) return 0.5 * err * err;
  if (grads->d.size() != params_.size()) grads->d.assign(params_.size(), 0.0);
  std::vector<double>& d = grads->d;

  const size_t hs = static_cast<size_t>(cfg_.hidden);
  const size_t steps = seq.size();
  const auto& top = cache.layers.back();
  for (size_t k = 0; k < hs; ++k) {
    const double h_last = top[steps - 1].o[k] * top[steps - 1].tc[k];
    d[out_w_ + k] += err * h_last;
  }
  d[out_b_] += err;

  // Gradient flowing into each layer's hidden output at each step.
  std::vector<std::vector<double>> dh_above(steps, std::vector<double>(hs, 0.0));
  for (size_t k = 0; k < hs; ++k) dh_above[steps - 1][k] = err * params_[out_w_ + k];

  std::vector<double> da(4 * hs);
  for (size_t l = layout_.size(); l-- > 0;) {
    const LayerOffsets& lo = layout_[l];
    const size_t in = static_cast<size_t>(lo.in);
    const size_t cols = in + hs;
    std::vector<std::vector<double>> dx(steps, std::vector<double>(in, 0.0));
    std::vector<double> dh_next(hs, 0.0), dc_next(hs, 0.0);
    for (size_t t = steps; t-- > 0;) {
      const LstmCache::Step& s = cache.layers[l][t];
      for (size_t k = 0; k < hs; ++k) {
        const double dh = dh_above[t][k] + dh_next[k];
        const double dc = dc_next[k] + dh * s.o[k] * (1 - s.tc[k] * s.tc[k]);
        da[k] = dc * s.g[k] * s.i[k] * (1 - s.i[k]);
        da[hs + k] = dc * s.c_prev[k] * s.f[k] * (1 - s.f[k]);
        da[2 * hs + k] = dc * s.i[k] * (1 - s.g[k] * s.g[k]);
        da[3 * hs + k] = dh * s.tc[k] * s.o[k] * (1 - s.o[k]);
        dc_next[k] = dc * s.f[k];
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (size_t r = 0; r < 4 * hs; ++r) {
        const double g = da[r];
        if (g == 0) continue;
        const size_t row = lo.w + r * cols;
        d[lo.b + r] += g;
        for (size_t k = 0; k < cols; ++k) d[row + k] += g * s.z[k];
        for (size_t k = 0; k < in; ++k) dx[t][k] += params_[row + k] * g;
        for (size_t k = 0; k < hs; ++k) dh_next[k] += params_[row + in + k] * g;
      }
    }
    if (l > 0) dh_above = std::move(dx);
  }
  return 0.5 * err * err;
}

void Lstm::sgd_step(const Gradients& grads, double lr) {
  for (size_t k = 0; k < params_.size(); ++k) params_[k] -= lr * grads.d[k];
}

void LstmForecaster::train(std::span<const double> series) {
  const LstmConfig& cfg = model_.config();
  const size_t len = static_cast<size_t>(cfg.seq_len);
  if (series.size() < len + 1)
    throw PredictorError("lstm: training series needs at least " + std::to_string(len + 1) + " samples");
  const double peak = *std::max_element(series.begin(), series.end());
  scale_ = peak > 0 ? peak : 1.0;
  std::vector<double> norm(series.size());
  for (size_t i = 0; i < series.size(); ++i) norm[i] = series[i] / scale_;

  std::vector<size_t> order(series.size() - len);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, 1));
  Lstm::Gradients grads;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next() % i]);
    for (size_t start : order) {
      std::fill(grads.d.begin(), grads.d.end(), 0.0);
      model_.loss(std::span(norm).subspan(start, len), norm[start + len], &grads);
      model_.sgd_step(grads, cfg.learning_rate);
    }
  }
  trained_ = true;
}

double LstmForecaster::forecast(std::span<const double> samples) const {
  if (!trained_) throw PredictorError("lstm forecaster is untrained: call train() or load() first");
  if (samples.empty()) throw PredictorError("forecast: no samples");
  const size_t len = static_cast<size_t>(model_.config().seq_len);
  std::vector<double> seq;
  seq.reserve(len);
  // Short histories are left-padded with their first value.
  for (size_t i = samples.size(); i < len; ++i) seq.push_back(samples.front() / scale_);
  const size_t from = samples.size() > len ? samples.size() - len : 0;
  for (size_t i = from; i < samples.size(); ++i) seq.push_back(samples[i] / scale_);
  return std::max(0.0, model_.predict(seq) * scale_);
}

namespace {

constexpr char kMagic[8] = {'C', 'S', 'L', 'S', 'T', 'M', '0', '1'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw PredictorError("truncated model file: " + path.string());
  return value;
}

}  // namespace

void LstmForecaster::save(const std::filesystem::path& path) const {
  if (!trained_) throw PredictorError("refusing to save an untrained model");
  std::string out(kMagic, sizeof(kMagic));
  const LstmConfig& cfg = model_.config();
  put<uint32_t>(out, static_cast<uint32_t>(cfg.layers));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.hidden));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.seq_len));
  put<double>(out, scale_);
  put<uint64_t>(out, model_.params().size());
  for (double p : model_.params()) put<double>(out, p);
  write_file_atomic(path, out);
}

LstmForecaster LstmForecaster::load(const std::filesystem::path& path, const LstmConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PredictorError("cannot open model file: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw PredictorError("not an LSTM model file: " + path.string());
  LstmConfig cfg = base;
  cfg.layers = static_cast<int>(get<uint32_t>(in, path));
  cfg.hidden = static_cast<int>(get<uint32_t>(in, path));
  cfg.seq_len = static_cast<int>(get<uint32_t>(in, path));
  const double scale = get<double>(in, path);
  const uint64_t n = get<uint64_t>(in, path);
  LstmForecaster f(cfg);
  if (n != f.model_.params().size()) throw PredictorError("model file dimensions disagree: " + path.string());
  for (double& p : f.model_.params()) p = get<double>(in, path);
  f.scale_ = scale;
  f.trained_ = true;
  return f;
}

std::unique_ptr<Forecaster> make_forecaster(const ForecasterConfig& cfg) {
  switch (cfg.kind) {
    case ForecasterKind::kMwa: return std::make_unique<MwaForecaster>(cfg.mwa_k);
    case ForecasterKind::kEwma: return std::make_unique<EwmaForecaster>(cfg.ewma_alpha);
    case ForecasterKind::kLinReg: return std::make_unique<LinRegForecaster>();
    case ForecasterKind::kLogReg: return std::make_unique<LogRegForecaster>();
    case ForecasterKind::kLstm: return std::make_unique<LstmForecaster>(cfg.lstm);
  }
  throw PredictorError("unknown predictor kind");
}

RmseResult evaluate_rmse(Forecaster& forecaster, std::span<const double> series, double split,
                         const ForecasterConfig& cfg) {
  if (!(split > 0) || !(split < 1)) throw PredictorError("evaluate_rmse: split must lie in (0, 1)");
  const size_t cut = std::max<size_t>(1, static_cast<size_t>(std::floor(split * static_cast<double>(series.size()))));
  if (cut >= series.size()) throw PredictorError("evaluate_rmse: nothing left to evaluate");
  if (forecaster.kind() == ForecasterKind::kLstm) forecaster.train(series.first(cut));
  const size_t history = static_cast<size_t>(cfg.windows());
  RmseResult result;
  double sq = 0;
  for (size_t t = cut; t < series.size(); ++t) {
    const size_t from = t > history ? t - history : 0;
    const double p = forecaster.forecast(series.subspan(from, t - from));
    result.predictions.push_back(p);
    result.actual.push_back(series[t]);
    sq += (p - series[t]) * (p - series[t]);
  }
  result.rmse = std::sqrt(sq / static_cast<double>(result.predictions.size()));
  return result;
}

}  // namespace chainsim
