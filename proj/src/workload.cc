#include "chainsim/workload.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chainsim/atomic_file.h"
#include "chainsim/rng.h"

namespace chainsim {
namespace {

constexpr uint64_t kGapStream = 1;
constexpr uint64_t kMixStream = 2;
constexpr uint64_t kThinStream = 3;

// Shared by every generator: draws a chain id per arrival from its own stream
// so chain assignment does not perturb arrival times.
class ChainPicker {
 public:
  ChainPicker(const WorkloadMix& mix, uint64_t seed) : mix_(mix), weights_(mix.weights()), rng_(derive_seed(seed, kMixStream)) {}
  const std::string& next() { return mix_.chains[rng_.pick(weights_)].first; }

 private:
  const WorkloadMix& mix_;
  std::vector<double> weights_;
  Rng rng_;
};

void check_horizon(double start_ms, double horizon_ms) {
  if (horizon_ms < 0) throw TraceError("horizon must be >= 0");
  if (start_ms > 0) throw TraceError("trace start must be <= 0");
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, size_t line_no) {
  double value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw TraceError("line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
  return value;
}

}  // namespace

std::string_view to_string(TraceSource source) {
  switch (source) {
    case TraceSource::kPoisson: return "poisson";
    case TraceSource::kDiurnal: return "diurnal";
    case TraceSource::kSpike: return "spike";
    case TraceSource::kReplay: return "replay";
  }
  return "unknown";
}

void ArrivalTrace::validate(const Catalog* catalog) const {
  double prev = start_ms;
  for (size_t i = 0; i < events.size(); ++i) {
    const Arrival& a = events[i];
    if (!std::isfinite(a.time_ms) || a.time_ms < prev)
      throw TraceError("arrival " + std::to_string(i) + " is out of order");
    if (a.time_ms >= horizon_ms && horizon_ms > start_ms)
      throw TraceError("arrival " + std::to_string(i) + " lies beyond the horizon");
    if (catalog != nullptr && !catalog->has_chain(a.chain_id))
      throw TraceError("arrival " + std::to_string(i) + " references unknown chain " + a.chain_id);
    prev = a.time_ms;
  }
}

size_t ArrivalTrace::executed_count() const {
  return static_cast<size_t>(std::count_if(events.begin(), events.end(), [](const Arrival& a) { return a.time_ms >= 0; }));
}

double ArrivalTrace::mean_rate_per_s() const {
  if (horizon_ms <= 0) return 0;
  return static_cast<double>(executed_count()) * 1000.0 / horizon_ms;
}

void WorkloadMix::validate(const Catalog* catalog) const {
  if (chains.empty()) throw TraceError("workload mix " + name + " has no chains");
  double total = 0;
  for (const auto& [id, w] : chains) {
    if (!(w >= 0)) throw TraceError("workload mix " + name + ": negative weight for " + id);
    if (catalog != nullptr && !catalog->has_chain(id))
      throw TraceError("workload mix " + name + " references unknown chain " + id);
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw TraceError("workload mix " + name + ": weights must sum to 1");
}

std::vector<double> WorkloadMix::weights() const {
  std::vector<double> w;
  for (const auto& c : chains) w.push_back(c.second);
  return w;
}

WorkloadMix WorkloadMix::heavy() { return {"heavy", {{"ipa", 0.5}, {"detect-fatigue", 0.5}}}; }
WorkloadMix WorkloadMix::medium() { return {"medium", {{"ipa", 0.5}, {"img", 0.5}}}; }
WorkloadMix WorkloadMix::light() { return {"light", {{"img", 0.5}, {"face-security", 0.5}}}; }

WorkloadMix WorkloadMix::by_name(std::string_view name) {
  if (name == "heavy") return heavy();
  if (name == "medium") return medium();
  if (name == "light") return light();
  throw TraceError("unknown workload mix: " + std::string(name));
}

ArrivalTrace gen_poisson(double rate_per_s, double horizon_ms, const WorkloadMix& mix, uint64_t seed,
                         double start_ms) {
  if (!(rate_per_s > 0)) throw TraceError("gen_poisson: rate must be > 0");
  check_horizon(start_ms, horizon_ms);
  mix.validate();
  ArrivalTrace trace;
  trace.start_ms = start_ms;
  trace.horizon_ms = horizon_ms;
  trace.source = TraceSource::kPoisson;
  Rng gaps(derive_seed(seed, kGapStream));
  ChainPicker picker(mix, seed);
  const double mean_gap = 1000.0 / rate_per_s;
  for (double t = start_ms + gaps.exponential(mean_gap); t < horizon_ms; t += gaps.exponential(mean_gap))
    trace.events.push_back({t, picker.next()});
  return trace;
}

ArrivalTrace gen_diurnal(double base_rate_per_s, double amplitude_per_s, double period_ms, double horizon_ms,
                         const WorkloadMix& mix, uint64_t seed, double start_ms) {
  if (!(amplitude_per_s >= 0) || !(base_rate_per_s > amplitude_per_s))
    throw TraceError("gen_diurnal: need base > amplitude >= 0");
  if (!(period_ms > 0)) throw TraceError("gen_diurnal: period must be > 0");
  check_horizon(start_ms, horizon_ms);
  mix.validate();
  ArrivalTrace trace;
  trace.start_ms = start_ms;
  trace.horizon_ms = horizon_ms;
  trace.source = TraceSource::kDiurnal;
  Rng gaps(derive_seed(seed, kGapStream));
  Rng thin(derive_seed(seed, kThinStream));
  ChainPicker picker(mix, seed);
  const double peak = base_rate_per_s + amplitude_per_s;
  const double mean_gap = 1000.0 / peak;
  for (double t = start_ms + gaps.exponential(mean_gap); t < horizon_ms; t += gaps.exponential(mean_gap)) {
    const double rate = base_rate_per_s + amplitude_per_s * std::sin(2.0 * M_PI * t / period_ms);
    if (thin.uniform() * peak < rate) trace.events.push_back({t, picker.next()});
  }
  return trace;
}

ArrivalTrace gen_spike(double base_rate_per_s, double peak_rate_per_s, std::span<const double> spike_starts_ms,
                       double spike_len_ms, double horizon_ms, const WorkloadMix& mix, uint64_t seed,
                       double start_ms) {
  if (!(base_rate_per_s > 0) || peak_rate_per_s < base_rate_per_s)
    throw TraceError("gen_spike: need peak >= base > 0");
  if (spike_len_ms < 0) throw TraceError("gen_spike: spike length must be >= 0");
  check_horizon(start_ms, horizon_ms);
  mix.validate();

  // Segment boundaries where the rate changes.
  std::vector<std::pair<double, double>> windows;
  for (double s : spike_starts_ms) windows.emplace_back(s, s + spike_len_ms);
  std::sort(windows.begin(), windows.end());
  auto rate_at = [&](double t) {
    for (const auto& [a, b] : windows)
      if (t >= a && t < b) return peak_rate_per_s;
    return base_rate_per_s;
  };
  auto next_boundary = [&](double t) {
    double next = horizon_ms;
    for (const auto& [a, b] : windows) {
      if (a > t) next = std::min(next, a);
      if (b > t) next = std::min(next, b);
    }
    return next;
  };

  ArrivalTrace trace;
  trace.start_ms = start_ms;
  trace.horizon_ms = horizon_ms;
  trace.source = TraceSource::kSpike;
  Rng gaps(derive_seed(seed, kGapStream));
  ChainPicker picker(mix, seed);
  double t = start_ms;
  while (t < horizon_ms) {
    const double boundary = next_boundary(t);
    const double candidate = t + gaps.exponential(1000.0 / rate_at(t));
    if (candidate >= boundary) {
      // Memorylessness lets the draw restart at the rate change.
      t = boundary;
      continue;
    }
    t = candidate;
    trace.events.push_back({t, picker.next()});
  }
  return trace;
}

ArrivalTrace load_trace_csv(const std::filesystem::path& path, const WorkloadMix& mix, uint64_t seed,
                            const Catalog* catalog) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file " + path.string());
  mix.validate(catalog);

  std::string line;
  size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(trim(line));
      break;
    }
  }
  if (header.empty()) throw TraceError("trace file " + path.string() + " is empty");

  const bool per_second = header[0] == "timestamp_s";
  if (!per_second && header[0] != "timestamp_ms")
    throw TraceError("line " + std::to_string(line_no) + ": expected header timestamp_ms or timestamp_s,count");
  if (per_second && (header.size() < 2 || header[1] != "count"))
    throw TraceError("line " + std::to_string(line_no) + ": per-second traces need a count column");
  const size_t chain_col = per_second ? 2 : 1;
  const bool has_chain = header.size() > chain_col && header[chain_col] == "chain_id";

  ArrivalTrace trace;
  trace.source = TraceSource::kReplay;
  ChainPicker picker(mix, seed);
  Rng jitter(derive_seed(seed, kGapStream));
  auto chain_for = [&](const std::vector<std::string>& fields) -> std::string {
    if (has_chain && fields.size() > chain_col && !fields[chain_col].empty()) {
      if (catalog != nullptr && !catalog->has_chain(fields[chain_col]))
        throw TraceError("line " + std::to_string(line_no) + ": unknown chain id " + fields[chain_col]);
      return fields[chain_col];
    }
    return picker.next();
  };

  double last_end = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty() || row[0] == '#') continue;
    const auto fields = split_csv(row);
    if (per_second) {
      if (fields.size() < 2) throw TraceError("line " + std::to_string(line_no) + ": expected timestamp_s,count");
      const double second = parse_number(fields[0], line_no);
      const double count = parse_number(fields[1], line_no);
      if (count < 0 || count != std::floor(count))
        throw TraceError("line " + std::to_string(line_no) + ": count must be a non-negative integer");
      std::vector<double> times;
      for (int k = 0; k < static_cast<int>(count); ++k) times.push_back(1000.0 * (second + jitter.uniform()));
      std::sort(times.begin(), times.end());
      for (double t : times) trace.events.push_back({t, chain_for(fields)});
      last_end = std::max(last_end, 1000.0 * (second + 1));
    } else {
      const double t = parse_number(fields[0], line_no);
      trace.events.push_back({t, chain_for(fields)});
      last_end = std::max(last_end, t);
    }
    if (trace.events.size() >= 2 && trace.events.back().time_ms < trace.events[trace.events.size() - 2].time_ms)
      throw TraceError("line " + std::to_string(line_no) + ": timestamps must be non-decreasing");
  }
  if (!trace.events.empty()) trace.start_ms = std::min(0.0, trace.events.front().time_ms);
  // One-arrival-per-row traces end just after the last arrival.
  trace.horizon_ms = per_second ? last_end : std::nextafter(last_end, INFINITY);
  if (trace.events.empty()) trace.horizon_ms = 0;
  trace.validate(catalog);
  return trace;
}

std::string trace_to_csv(const ArrivalTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "timestamp_ms,chain_id\n";
  for (const auto& a : trace.events) out << a.time_ms << ',' << a.chain_id << '\n';
  return out.str();
}

void write_trace_csv(const ArrivalTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

std::vector<int> bin_counts(const ArrivalTrace& trace, double bin_ms) {
  if (!(bin_ms > 0)) throw TraceError("bin width must be > 0");
  const size_t n = static_cast<size_t>(std::ceil(trace.horizon_ms / bin_ms));
  std::vector<int> counts(n, 0);
  for (const auto& a : trace.events) {
    if (a.time_ms < 0) continue;
    const size_t bin = static_cast<size_t>(a.time_ms / bin_ms);
    if (bin < n) ++counts[bin];
  }
  return counts;
}

}  // namespace chainsim
