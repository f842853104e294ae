#include "chainsim/engine.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>

#include "chainsim/rng.h"

namespace chainsim {

void EngineConfig::validate() const {
  if (monitor_interval_ms < 0) throw std::invalid_argument("monitor_interval_ms must be >= 0");
  if (!(delay_lookback_ms > 0)) throw std::invalid_argument("delay_lookback_ms must be > 0");
  if (!(idle_timeout_ms > 0)) throw std::invalid_argument("idle_timeout_ms must be > 0");
  if (!(sample_interval_ms > 0)) throw std::invalid_argument("sample_interval_ms must be > 0");
  if (transition_delay_ms < 0) throw std::invalid_argument("transition_delay_ms must be >= 0");
  if (exec_jitter_sigma_ms < 0 || exec_jitter_sigma_ms > 20)
    throw std::invalid_argument("exec_jitter_sigma_ms must lie in [0, 20]");
  if (evict_min_idle_ms < 0) throw std::invalid_argument("evict_min_idle_ms must be >= 0");
  if (prewarmed_per_stage < 0) throw std::invalid_argument("prewarmed_per_stage must be >= 0");
  if (batch_size_override < 0) throw std::invalid_argument("batch_size_override must be >= 0");
}

int StagePlan::chain_index(const std::string& id) const {
  for (size_t i = 0; i < chains.size(); ++i)
    if (chains[i].chain.id == id) return static_cast<int>(i);
  return -1;
}

StagePlan plan_stages(const Catalog& catalog, const WorkloadMix& mix, const ArrivalTrace& trace,
                      const PolicySpec& policy, const EngineConfig& config) {
  std::vector<std::string> chain_ids;
  auto add_chain = [&chain_ids](const std::string& id) {
    if (std::find(chain_ids.begin(), chain_ids.end(), id) == chain_ids.end()) chain_ids.push_back(id);
  };
  for (const auto& [id, weight] : mix.chains) add_chain(id);
  for (const Arrival& a : trace.events) add_chain(a.chain_id);

  StagePlan plan;
  for (const std::string& id : chain_ids) {
    ChainPlan cp;
    cp.chain = catalog.build_chain(id, policy.slack_policy);
    const int ci = static_cast<int>(plan.chains.size());
    for (size_t pos = 0; pos < cp.chain.size(); ++pos) {
      const std::string& ms = cp.chain.stages[pos];
      auto it = std::find_if(plan.stages.begin(), plan.stages.end(),
                             [&ms](const StageParams& s) { return s.microservice == ms; });
      const double slack = cp.chain.stage_slack_ms[pos];
      int b = cp.chain.stage_batch_size[pos];
      if (policy.batch_one) b = 1;
      if (config.batch_size_override > 0) b = config.batch_size_override;
      if (it == plan.stages.end()) {
        StageParams sp;
        sp.microservice = ms;
        sp.met_ms = cp.chain.stage_met_ms[pos];
        sp.slack_ms = slack;
        sp.response_budget_ms = slack + sp.met_ms;
        sp.batch_size = b;
        sp.cold_start_ms = catalog.microservice(ms).cold_start_midpoint_ms();
        plan.stages.push_back(sp);
        it = plan.stages.end() - 1;
      } else {
        it->slack_ms = std::min(it->slack_ms, slack);
        it->response_budget_ms = it->slack_ms + it->met_ms;
        it->batch_size = std::min(it->batch_size, b);
      }
      if (std::find(it->chains.begin(), it->chains.end(), ci) == it->chains.end()) it->chains.push_back(ci);
      cp.stage_index.push_back(static_cast<int>(it - plan.stages.begin()));
    }
    plan.chains.push_back(std::move(cp));
  }
  return plan;
}

std::unique_ptr<Forecaster> prepare_forecaster(const PolicySpec& policy, const ArrivalTrace& trace) {
  auto f = make_forecaster(policy.predictor);
  if (f->trained()) return f;
  std::vector<double> times;
  times.reserve(trace.events.size());
  for (const Arrival& a : trace.events) times.push_back(a.time_ms);
  const auto series = windowed_max_series(times, trace.start_ms, trace.horizon_ms, policy.predictor);
  const auto cut = static_cast<size_t>(std::floor(policy.predictor.train_fraction * static_cast<double>(series.size())));
  f->train(std::span(series).first(cut));
  return f;
}

void StageQueue::push(const Entry& e) {
  const long s = seq_++;
  const double key = order_ == QueueOrder::kFifo ? static_cast<double>(s) : e.lsf_key;
  active_.emplace(key, e.arrival, s, e.request);
}

int StageQueue::pop(double now) {
  if (empty()) throw std::logic_error("pop from an empty stage queue");
  if (order_ == QueueOrder::kLsfDynamic) {
    while (!active_.empty() && std::get<0>(*active_.begin()) <= now) {
      const auto [key, arrival, s, r] = *active_.begin();
      active_.erase(active_.begin());
      expired_.emplace(arrival, s, r);
    }
    if (!expired_.empty()) {
      const int r = std::get<2>(*expired_.begin());
      expired_.erase(expired_.begin());
      return r;
    }
  }
  const int r = std::get<3>(*active_.begin());
  active_.erase(active_.begin());
  return r;
}

std::vector<int> StageQueue::requests() const {
  std::vector<int> out;
  out.reserve(size());
  for (const auto& e : expired_) out.push_back(std::get<2>(e));
  for (const auto& e : active_) out.push_back(std::get<3>(e));
  return out;
}

namespace {

enum class EventKind { kExecComplete, kContainerReady, kArrival, kTransition, kMonitorTick, kIdleSweep,
                       kNodePowerOff, kSample, kTraceEnd };

struct Event {
  double time;
  EventKind kind;
  long seq;
  int a;   // container, request or arrival index
  int b;   // stage position for transitions

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

enum class SpawnReason { kOnDemand, kReactive, kProactive, kStaticPool, kPrewarmed };

struct StageState {
  StageParams params;
  StageQueue queue;
  std::vector<ContainerId> containers;          // live only
  std::deque<std::pair<double, double>> starts;  // (exec_start, wait) within the lookback
  long spawned = 0;
  long executions = 0;
  int pool_target = 0;
  long owed = 0;                                 // deferred on-demand spawns
  int peak = 0;
  double sample_sum = 0;
};

class Simulation {
 public:
  explicit Simulation(const RunInputs& in)
      : in_(in),
        cluster_(in.cluster),
        cold_rng_(derive_seed(in.seed, 11)),
        jitter_rng_(derive_seed(in.seed, 12)) {}

  RunResult run();

 private:
  static bool periodic(EventKind k) {
    return k == EventKind::kMonitorTick || k == EventKind::kSample || k == EventKind::kTraceEnd ||
           k == EventKind::kNodePowerOff;
  }
  void push(double time, EventKind kind, int a = -1, int b = -1) {
    if (!periodic(kind)) ++work_pending_;
    events_.push({time, kind, seq_++, a, b});
  }

  void on_arrival(int index, double now);
  void enqueue(int request, int position, double now);
  void dispatch(int stage, double now);
  void start_next(Container& c, double now);
  void on_exec_complete(ContainerId id, double now);
  void on_ready(ContainerId id, double now);
  void on_idle_sweep(ContainerId id, double now);
  void on_tick(double now);
  void on_sample(double now);
  int spawn(int stage, int count, SpawnReason reason, double now);
  bool evict_one(double now);
  double observed_delay(int stage, double now);
  void integrate(double until);
  void track_peak(int stage);
  bool quiescent() const { return next_arrival_ >= in_.trace->events.size() && in_flight_ == 0; }
  bool keep_ticking(double now) const { return now < in_.trace->horizon_ms || !quiescent(); }

  const RunInputs& in_;
  StagePlan plan_;
  std::vector<StageState> stages_;
  Cluster cluster_;
  Rng cold_rng_;
  Rng jitter_rng_;
  std::unique_ptr<Forecaster> owned_forecaster_;
  const Forecaster* forecaster_ = nullptr;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  long seq_ = 0;
  long work_pending_ = 0;               // queued events other than periodic ones

  std::vector<RequestRecord> requests_;
  std::vector<int> request_chain_;
  std::vector<double> completed_met_;   // Σ execution time of finished stages
  std::vector<uint32_t> cold_pending_;  // per request: stage positions that triggered a spawn
  size_t next_arrival_ = 0;
  long in_flight_ = 0;

  std::vector<double> log_times_;       // every arrival seen, pre-history included
  std::vector<int> log_chains_;

  double clock_ = 0;                    // integration frontier
  double energy_ = 0;
  double container_ms_ = 0;
  double last_completion_ = 0;
  int peak_total_ = 0;
  std::vector<ContainerSample> samples_;
  SpawnBreakdown spawns_;
  bool ready_respected_ = true;
  bool conservation_ = true;
};

void Simulation::integrate(double until) {
  if (until <= clock_) return;
  energy_ += energy_step(cluster_.nodes(), until - clock_);
  container_ms_ += cluster_.live_containers() * (until - clock_);
  clock_ = until;
}

void Simulation::track_peak(int stage) {
  StageState& s = stages_[static_cast<size_t>(stage)];
  s.peak = std::max(s.peak, static_cast<int>(s.containers.size()));
  peak_total_ = std::max(peak_total_, cluster_.live_containers());
}

bool Simulation::evict_one(double now) {
  const Container* victim = nullptr;
  for (const Container& c : cluster_.containers()) {
    if (c.pinned || !c.idle() || now - c.last_used < in_.engine.evict_min_idle_ms) continue;
    if (!victim || c.last_used < victim->last_used) victim = &c;
  }
  if (!victim) return false;
  const ContainerId id = victim->id;
  const int stage = victim->stage;
  cluster_.reap(id, now);
  auto& list = stages_[static_cast<size_t>(stage)].containers;
  list.erase(std::find(list.begin(), list.end(), id));
  push(now + cluster_.config().node_off_delay_ms, EventKind::kNodePowerOff);
  ++spawns_.evictions;
  return true;
}

int Simulation::spawn(int stage, int count, SpawnReason reason, double now) {
  StageState& s = stages_[static_cast<size_t>(stage)];
  const MicroserviceProfile& profile = in_.catalog->microservice(s.params.microservice);
  SpawnRequest req;
  req.stage = stage;
  req.microservice_id = s.params.microservice;
  req.batch_size = s.params.batch_size;
  req.cold_start_min_ms = reason == SpawnReason::kPrewarmed ? 0 : profile.cold_start_min_ms;
  req.cold_start_max_ms = reason == SpawnReason::kPrewarmed ? 0 : profile.cold_start_max_ms;
  req.cpu_demand = profile.cpu_demand;
  req.mem_demand = profile.mem_demand_bytes;
  req.pinned = in_.policy.static_pool && (reason == SpawnReason::kStaticPool || reason == SpawnReason::kPrewarmed);
  int placed = 0;
  for (int k = 0; k < count; ++k) {
    auto id = cluster_.spawn(req, now, cold_rng_, in_.policy.placement);
    if (!id && in_.engine.evict_idle_on_pressure && evict_one(now))
      id = cluster_.spawn(req, now, cold_rng_, in_.policy.placement);
    if (!id) {
      spawns_.deferred += count - k;
      break;
    }
    ++placed;
    s.containers.push_back(*id);
    ++s.spawned;
    switch (reason) {
      case SpawnReason::kOnDemand: ++spawns_.on_demand; break;
      case SpawnReason::kReactive: ++spawns_.reactive; break;
      case SpawnReason::kProactive: ++spawns_.proactive; break;
      case SpawnReason::kStaticPool: ++spawns_.static_pool; break;
      case SpawnReason::kPrewarmed: ++spawns_.prewarmed; break;
    }
    push(cluster_.container(*id).ready_at, EventKind::kContainerReady, *id);
    track_peak(stage);
  }
  return placed;
}

void Simulation::on_arrival(int index, double now) {
  const Arrival& a = in_.trace->events[static_cast<size_t>(index)];
  log_times_.push_back(a.time_ms);
  const int ci = plan_.chain_index(a.chain_id);
  log_chains_.push_back(ci);
  const ChainPlan& cp = plan_.chains[static_cast<size_t>(ci)];
  RequestRecord r;
  r.id = static_cast<int>(requests_.size());
  r.chain_id = a.chain_id;
  r.arrival = now;
  r.slo_ms = cp.chain.slo_ms;
  r.stages.resize(cp.chain.size());
  for (size_t i = 0; i < cp.chain.size(); ++i) r.stages[i].microservice = cp.chain.stages[i];
  requests_.push_back(std::move(r));
  request_chain_.push_back(ci);
  completed_met_.push_back(0);
  cold_pending_.push_back(0);
  ++in_flight_;
  enqueue(static_cast<int>(requests_.size()) - 1, 0, now);
}

void Simulation::enqueue(int request, int position, double now) {
  RequestRecord& r = requests_[static_cast<size_t>(request)];
  const ChainPlan& cp = plan_.chains[static_cast<size_t>(request_chain_[static_cast<size_t>(request)])];
  const int stage = cp.stage_index[static_cast<size_t>(position)];
  r.stages[static_cast<size_t>(position)].enqueue = now;
  StageQueue::Entry e;
  e.request = request;
  e.arrival = r.arrival;
  e.lsf_key = in_.engine.lsf_static ? cp.chain.total_slack_ms
                                    : cp.chain.total_slack_ms + r.arrival + completed_met_[static_cast<size_t>(request)];
  StageState& s = stages_[static_cast<size_t>(stage)];
  s.queue.push(e);
  dispatch(stage, now);
  if (in_.policy.on_demand_spawn && !s.queue.empty()) {
    if (in_.policy.warm_only) cold_pending_[static_cast<size_t>(request)] |= 1u << position;
    if (spawn(stage, 1, SpawnReason::kOnDemand, now) == 0) ++s.owed;
    dispatch(stage, now);
  }
}

void Simulation::dispatch(int stage, double now) {
  StageState& s = stages_[static_cast<size_t>(stage)];
  std::vector<const Container*> candidates;
  while (!s.queue.empty()) {
    candidates.clear();
    for (ContainerId id : s.containers) {
      const Container& c = cluster_.container(id);
      if (in_.policy.warm_only && c.state != ContainerState::kWarm) continue;
      candidates.push_back(&c);
    }
    const Container* chosen = select_container(candidates, in_.policy.container_selection);
    if (!chosen) return;
    Container& c = cluster_.container(chosen->id);
    const int request = s.queue.pop(now);
    RequestRecord& r = requests_[static_cast<size_t>(request)];
    const ChainPlan& cp = plan_.chains[static_cast<size_t>(request_chain_[static_cast<size_t>(request)])];
    size_t pos = 0;
    while (cp.stage_index[pos] != stage || r.stages[pos].dispatch >= 0) ++pos;
    StageRecord& rec = r.stages[pos];
    rec.dispatch = now;
    rec.container = c.id;
    if (c.state == ContainerState::kColdStarting) rec.cold_wait = c.ready_at - now;
    if (cold_pending_[static_cast<size_t>(request)] & (1u << pos)) rec.cold_wait = now - rec.enqueue;
    c.local_queue.push_back(request);
    if (c.state == ContainerState::kWarm && !c.executing) start_next(c, now);
  }
}

void Simulation::start_next(Container& c, double now) {
  if (c.local_queue.empty()) return;
  if (now < c.ready_at) ready_respected_ = false;
  const int request = c.local_queue.front();
  c.local_queue.pop_front();
  c.executing = request;
  RequestRecord& r = requests_[static_cast<size_t>(request)];
  StageRecord* rec = nullptr;
  for (StageRecord& sr : r.stages)
    if (sr.container == c.id && sr.exec_start < 0) {
      rec = &sr;
      break;
    }
  rec->exec_start = now;
  StageState& s = stages_[static_cast<size_t>(c.stage)];
  s.starts.emplace_back(now, now - rec->enqueue);
  double met = s.params.met_ms;
  if (in_.engine.exec_jitter_sigma_ms > 0)
    met = std::max(kDefaultMetFloorMs, met + in_.engine.exec_jitter_sigma_ms * jitter_rng_.normal());
  push(now + met, EventKind::kExecComplete, c.id);
}

void Simulation::on_exec_complete(ContainerId id, double now) {
  Container& c = cluster_.container(id);
  const int request = *c.executing;
  c.executing.reset();
  ++c.executed;
  c.last_used = now;
  StageState& s = stages_[static_cast<size_t>(c.stage)];
  ++s.executions;

  RequestRecord& r = requests_[static_cast<size_t>(request)];
  size_t pos = 0;
  while (!(r.stages[pos].container == id && r.stages[pos].exec_end < 0)) ++pos;
  StageRecord& rec = r.stages[pos];
  rec.exec_end = now;
  completed_met_[static_cast<size_t>(request)] += rec.exec_end - rec.exec_start;
  if (pos + 1 < r.stages.size()) {
    const double delay = in_.engine.transition_delay_ms;
    r.stages[pos + 1].transition = delay;
    if (delay > 0)
      push(now + delay, EventKind::kTransition, request, static_cast<int>(pos + 1));
    else
      enqueue(request, static_cast<int>(pos + 1), now);
  } else {
    r.completion = now;
    last_completion_ = std::max(last_completion_, now);
    --in_flight_;
  }

  if (!c.local_queue.empty())
    start_next(c, now);
  else
    push(now + in_.engine.idle_timeout_ms, EventKind::kIdleSweep, id);
  dispatch(c.stage, now);
}

void Simulation::on_ready(ContainerId id, double now) {
  Container& c = cluster_.container(id);
  if (c.state != ContainerState::kColdStarting) return;
  c.state = ContainerState::kWarm;
  c.last_used = now;
  if (!c.local_queue.empty())
    start_next(c, now);
  else
    push(now + in_.engine.idle_timeout_ms, EventKind::kIdleSweep, id);
  dispatch(c.stage, now);
}

void Simulation::on_idle_sweep(ContainerId id, double now) {
  Container& c = cluster_.container(id);
  if (c.pinned || !c.idle() || now - c.last_used < in_.engine.idle_timeout_ms) return;
  cluster_.reap(id, now);
  auto& list = stages_[static_cast<size_t>(c.stage)].containers;
  list.erase(std::find(list.begin(), list.end(), id));
  push(now + cluster_.config().node_off_delay_ms, EventKind::kNodePowerOff);
}

double Simulation::observed_delay(int stage, double now) {
  StageState& s = stages_[static_cast<size_t>(stage)];
  while (!s.starts.empty() && s.starts.front().first < now - in_.engine.delay_lookback_ms) s.starts.pop_front();
  double delay = 0;
  for (const auto& [start, wait] : s.starts) delay = std::max(delay, wait);
  // Requests still waiting count too, so a stage with no capacity at all is
  // seen as delayed.
  auto waiting = [&](int request) {
    const RequestRecord& r = requests_[static_cast<size_t>(request)];
    for (const StageRecord& rec : r.stages)
      if (rec.enqueue >= 0 && rec.exec_start < 0) delay = std::max(delay, now - rec.enqueue);
  };
  for (int request : s.queue.requests()) waiting(request);
  for (ContainerId id : s.containers)
    for (int request : cluster_.container(id).local_queue) waiting(request);
  return delay;
}

void Simulation::on_tick(double now) {
  const PolicySpec& p = in_.policy;
  double forecast = 0;
  std::vector<double> share(stages_.size(), 0.0);
  if (p.proactive) {
    const auto samples = sample_windows(log_times_, now, p.predictor);
    std::vector<double> rates;
    rates.reserve(samples.size());
    for (const LoadSample& s : samples) rates.push_back(s.max_rate);
    // The prediction targets the peak over the coming window, so it never
    // falls below the global maximum of the sampled history.
    forecast = forecaster_->forecast(rates);
    if (!rates.empty()) forecast = std::max(forecast, *std::max_element(rates.begin(), rates.end()));
    const auto lo = std::lower_bound(log_times_.begin(), log_times_.end(), now - p.predictor.history_ms);
    const auto from = static_cast<size_t>(lo - log_times_.begin());
    std::vector<long> per_chain(plan_.chains.size(), 0);
    for (size_t i = from; i < log_times_.size(); ++i) ++per_chain[static_cast<size_t>(log_chains_[i])];
    const double total = static_cast<double>(log_times_.size() - from);
    if (total > 0)
      for (size_t st = 0; st < stages_.size(); ++st) {
        long visits = 0;
        for (int ci : stages_[st].params.chains) visits += per_chain[static_cast<size_t>(ci)];
        share[st] = static_cast<double>(visits) / total;
      }
  }
  for (size_t st = 0; st < stages_.size(); ++st) {
    StageState& s = stages_[st];
    const int stage = static_cast<int>(st);
    if (p.static_pool) {
      const int missing = s.pool_target - static_cast<int>(s.containers.size());
      if (missing > 0) spawn(stage, missing, SpawnReason::kStaticPool, now);
    }
    if (p.proactive) {
      const double demand = forecast_demand(forecast * share[st], s.params.response_budget_ms);
      const int n = proactive_tick(demand, static_cast<int>(s.containers.size()), s.params.batch_size);
      if (n > 0) spawn(stage, n, SpawnReason::kProactive, now);
    }
    if (p.reactive) {
      ReactiveInput ri;
      ri.delay_ms = observed_delay(stage, now);
      ri.stage_slack_ms = s.params.slack_ms;
      ri.pending = static_cast<int>(s.queue.size());
      ri.response_budget_ms = s.params.response_budget_ms;
      for (ContainerId id : s.containers) ri.container_batch_sizes.push_back(cluster_.container(id).batch_size);
      ri.batch_size = s.params.batch_size;
      ri.cold_start_ms = s.params.cold_start_ms;
      const ReactiveDecision d = reactive_tick(ri);
      if (d.spawn > 0) spawn(stage, d.spawn, SpawnReason::kReactive, now);
    }
    if (p.on_demand_spawn && s.owed > 0) {
      const long retry = std::min<long>(s.owed, static_cast<long>(s.queue.size()));
      s.owed = 0;
      const int placed = spawn(stage, static_cast<int>(retry), SpawnReason::kOnDemand, now);
      s.owed = retry - placed;
    }
    dispatch(stage, now);
  }
}

void Simulation::on_sample(double now) {
  ContainerSample sample;
  sample.time_ms = now;
  sample.total = cluster_.live_containers();
  for (StageState& s : stages_) {
    sample.per_stage.push_back(static_cast<int>(s.containers.size()));
    s.sample_sum += static_cast<double>(s.containers.size());
  }
  samples_.push_back(std::move(sample));
}

RunResult Simulation::run() {
  if (!in_.catalog || !in_.trace) throw std::invalid_argument("run: catalog and trace are required");
  in_.engine.validate();
  in_.trace->validate(in_.catalog);
  in_.mix.validate(in_.catalog);
  plan_ = plan_stages(*in_.catalog, in_.mix, *in_.trace, in_.policy, in_.engine);
  for (const StageParams& sp : plan_.stages) {
    StageState s;
    s.params = sp;
    QueueOrder order = in_.policy.queue_order;
    if (order == QueueOrder::kLsfDynamic && in_.engine.lsf_static) order = QueueOrder::kLsfStatic;
    s.queue = StageQueue(order);
    stages_.push_back(std::move(s));
  }
  if (in_.policy.proactive) {
    forecaster_ = in_.forecaster;
    if (!forecaster_) {
      owned_forecaster_ = prepare_forecaster(in_.policy, *in_.trace);
      forecaster_ = owned_forecaster_.get();
    }
    if (!forecaster_->trained()) throw PredictorError("proactive policy needs a trained forecaster");
  }

  const auto& events = in_.trace->events;
  while (next_arrival_ < events.size() && events[next_arrival_].time_ms < 0) {
    log_times_.push_back(events[next_arrival_].time_ms);
    log_chains_.push_back(plan_.chain_index(events[next_arrival_].chain_id));
    ++next_arrival_;
  }

  if (!in_.policy.static_pool && in_.engine.prewarmed_per_stage > 0)
    for (size_t st = 0; st < stages_.size(); ++st)
      spawn(static_cast<int>(st), in_.engine.prewarmed_per_stage, SpawnReason::kPrewarmed, 0);

  if (in_.policy.static_pool) {
    // Offline sizing from the executed part of the trace.
    const double rate = in_.trace->mean_rate_per_s();
    std::vector<long> per_chain(plan_.chains.size(), 0);
    long total = 0;
    for (const Arrival& a : events)
      if (a.time_ms >= 0) {
        ++per_chain[static_cast<size_t>(plan_.chain_index(a.chain_id))];
        ++total;
      }
    int rounds = 0;
    for (StageState& s : stages_) {
      long visits = 0;
      for (int ci : s.params.chains) visits += per_chain[static_cast<size_t>(ci)];
      const double stage_rate = total > 0 ? rate * static_cast<double>(visits) / static_cast<double>(total) : 0.0;
      s.pool_target = sbatch_init(stage_rate, s.params.response_budget_ms, s.params.batch_size);
      rounds = std::max(rounds, s.pool_target);
    }
    // Round-robin so every stage gets a container before any gets a second.
    const SpawnReason initial = in_.engine.prewarmed_per_stage > 0 ? SpawnReason::kPrewarmed : SpawnReason::kStaticPool;
    for (int round = 0; round < rounds; ++round)
      for (size_t st = 0; st < stages_.size(); ++st)
        if (stages_[st].pool_target > round) spawn(static_cast<int>(st), 1, initial, 0);
  }

  if (next_arrival_ < events.size()) push(events[next_arrival_].time_ms, EventKind::kArrival, static_cast<int>(next_arrival_));
  if (in_.engine.monitor_interval_ms > 0) push(0, EventKind::kMonitorTick);
  push(0, EventKind::kSample);
  push(in_.trace->horizon_ms, EventKind::kTraceEnd);

  while (!events_.empty()) {
    const Event ev = events_.top();
    const double window_end = std::max(in_.trace->horizon_ms, last_completion_);
    if (quiescent() && ev.time > window_end) break;
    events_.pop();
    if (!periodic(ev.kind)) --work_pending_;
    integrate(ev.time);
    switch (ev.kind) {
      case EventKind::kArrival:
        ++next_arrival_;
        if (next_arrival_ < events.size())
          push(events[next_arrival_].time_ms, EventKind::kArrival, static_cast<int>(next_arrival_));
        on_arrival(ev.a, ev.time);
        break;
      case EventKind::kTransition: enqueue(ev.a, ev.b, ev.time); break;
      case EventKind::kExecComplete: on_exec_complete(ev.a, ev.time); break;
      case EventKind::kContainerReady: on_ready(ev.a, ev.time); break;
      case EventKind::kIdleSweep: on_idle_sweep(ev.a, ev.time); break;
      case EventKind::kNodePowerOff: cluster_.power_off_idle_nodes(ev.time); break;
      case EventKind::kMonitorTick:
        on_tick(ev.time);
        if (keep_ticking(ev.time)) push(ev.time + in_.engine.monitor_interval_ms, EventKind::kMonitorTick);
        break;
      case EventKind::kSample:
        on_sample(ev.time);
        if (keep_ticking(ev.time)) push(ev.time + in_.engine.sample_interval_ms, EventKind::kSample);
        break;
      case EventKind::kTraceEnd: break;
    }
    if (periodic(ev.kind) && ev.time > window_end && work_pending_ == 0 && !quiescent())
      throw std::runtime_error("simulation stalled: requests in flight and nothing left to run them");
    if (!cluster_.conservation_holds()) conservation_ = false;
  }
  if (in_flight_ != 0) throw std::logic_error("simulation ended with requests in flight");

  const double window_end = std::max(in_.trace->horizon_ms, last_completion_);
  integrate(window_end);

  RunResult result;
  MetricsReport& rep = result.report;
  rep.policy = std::string(to_string(in_.policy.kind));
  rep.seed = in_.seed;
  rep.window_end_ms = window_end;
  rep.energy_joules = energy_;
  rep.spawns = spawns_;
  rep.cold_start_count = spawns_.on_demand + spawns_.reactive + spawns_.proactive + spawns_.static_pool;
  rep.peak_containers = peak_total_;
  rep.avg_containers_time_weighted = window_end > 0 ? container_ms_ / window_end : 0;
  double sample_total = 0;
  for (const ContainerSample& s : samples_) sample_total += s.total;
  const double n_samples = static_cast<double>(samples_.size());
  rep.avg_containers = samples_.empty() ? 0 : sample_total / n_samples;
  rep.container_timeseries = samples_;
  for (const StageState& s : stages_) {
    StageStats st;
    st.microservice = s.params.microservice;
    st.batch_size = s.params.batch_size;
    st.spawned = s.spawned;
    st.executions = s.executions;
    st.rpc = rpc(s.executions, s.spawned);
    st.mean_containers = samples_.empty() ? 0 : s.sample_sum / n_samples;
    st.peak_containers = s.peak;
    rep.stages.push_back(st);
  }
  summarize_requests(requests_, rep);
  result.requests = std::move(requests_);
  result.containers.assign(cluster_.containers().begin(), cluster_.containers().end());
  result.conservation_held = conservation_;
  result.ready_respected = ready_respected_;
  return result;
}

}  // namespace

RunResult run(const RunInputs& inputs) {
  Simulation sim(inputs);
  return sim.run();
}

}  // namespace chainsim
