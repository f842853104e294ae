#pragma once

// Request-arrival traces: synthetic generators and CSV replay.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chainsim/domain.h"

namespace chainsim {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TraceSource { kPoisson, kDiurnal, kSpike, kReplay };

std::string_view to_string(TraceSource source);

struct Arrival {
  double time_ms = 0;
  std::string chain_id;

  bool operator==(const Arrival&) const = default;
};

// Arrivals may start before t=0: those events form a pre-history that the
// engine feeds to its load monitor without executing them.
struct ArrivalTrace {
  std::vector<Arrival> events;
  double start_ms = 0;
  double horizon_ms = 0;
  TraceSource source = TraceSource::kPoisson;

  // Non-decreasing times inside [start_ms, horizon_ms); chain ids known when
  // a catalog is supplied.
  void validate(const Catalog* catalog = nullptr) const;

  // Arrivals at or after t=0 divided by the horizon, in req/s.
  double mean_rate_per_s() const;
  size_t executed_count() const;
};

struct WorkloadMix {
  std::string name = "custom";
  std::vector<std::pair<std::string, double>> chains;

  void validate(const Catalog* catalog = nullptr) const;
  std::vector<double> weights() const;

  static WorkloadMix heavy();
  static WorkloadMix medium();
  static WorkloadMix light();
  // heavy | medium | light
  static WorkloadMix by_name(std::string_view name);
};

ArrivalTrace gen_poisson(double rate_per_s, double horizon_ms, const WorkloadMix& mix, uint64_t seed,
                         double start_ms = 0);

// Sinusoid-modulated Poisson process, rate(t) = base + amplitude*sin(2*pi*t/period),
// sampled by thinning.
ArrivalTrace gen_diurnal(double base_rate_per_s, double amplitude_per_s, double period_ms, double horizon_ms,
                         const WorkloadMix& mix, uint64_t seed, double start_ms = 0);

// Piecewise-homogeneous Poisson: peak_rate inside [s, s + spike_len) for every
// s in spike_starts_ms, base_rate elsewhere.
ArrivalTrace gen_spike(double base_rate_per_s, double peak_rate_per_s, std::span<const double> spike_starts_ms,
                       double spike_len_ms, double horizon_ms, const WorkloadMix& mix, uint64_t seed,
                       double start_ms = 0);

// Reads `timestamp_ms[,chain_id]` (one arrival per row) or `timestamp_s,count`
// (per-second counts expanded to uniformly jittered arrivals). Rows without a
// chain column are assigned chains from the mix.
ArrivalTrace load_trace_csv(const std::filesystem::path& path, const WorkloadMix& mix, uint64_t seed,
                            const Catalog* catalog = nullptr);

// Writes `timestamp_ms,chain_id`, which load_trace_csv reads back verbatim.
void write_trace_csv(const ArrivalTrace& trace, const std::filesystem::path& path);
std::string trace_to_csv(const ArrivalTrace& trace);

// Per-bin arrival counts over [0, horizon) for arrivals at or after t=0.
std::vector<int> bin_counts(const ArrivalTrace& trace, double bin_ms);

}  // namespace chainsim
