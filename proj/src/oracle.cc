#include "chainsim/oracle.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include <fmt/format.h>

#include "chainsim/engine.h"

namespace chainsim {

std::string MicroInstance::describe() const {
  std::string arr;
  for (int a : arrivals_ms) arr += fmt::format("{} ", a);
  std::string met;
  for (int m : met_ms) met += fmt::format("{} ", m);
  return fmt::format("mode={} met=[{}] arrivals=[{}] B={} pool={} cap={} cold={}",
                     mode == Mode::kStaticPool ? "static" : "on-demand", met, arr, batch_size, pool_per_stage,
                     max_containers, cold_start_ms);
}

MicroInstance random_micro_instance(Rng& rng) {
  MicroInstance m;
  m.mode = rng.uniform() < 0.5 ? MicroInstance::Mode::kStaticPool : MicroInstance::Mode::kOnDemand;
  const int stages = rng.uniform() < 0.5 ? 1 : 2;
  for (int s = 0; s < stages; ++s) m.met_ms.push_back(1 + static_cast<int>(rng.next() % 100));
  const int n = 1 + static_cast<int>(rng.next() % 20);
  std::vector<int> pool(600);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n; ++i) std::swap(pool[static_cast<size_t>(i)], pool[i + rng.next() % (pool.size() - i)]);
  m.arrivals_ms.assign(pool.begin(), pool.begin() + n);
  std::sort(m.arrivals_ms.begin(), m.arrivals_ms.end());
  if (m.mode == MicroInstance::Mode::kStaticPool) {
    m.batch_size = 1 + static_cast<int>(rng.next() % 3);
    m.pool_per_stage = stages == 1 ? 1 + static_cast<int>(rng.next() % 3) : 1;
  } else {
    m.batch_size = 1;
    m.max_containers = 1 + static_cast<int>(rng.next() % 3);
    m.cold_start_ms = static_cast<int>(rng.next() % 3001);
  }
  m.slo_ms = 300 + static_cast<int>(rng.next() % 700);
  return m;
}

namespace {

constexpr long kTicksPerMs = 100;

struct OContainer {
  int stage;
  int batch;
  long ready;
  std::deque<int> local;
  int executing = -1;
  long exec_end = -1;
};

struct ORequest {
  long arrival;
  int stage = 0;
  long met_done = 0;
  long completion = -1;
};

}  // namespace

MicroOutcome simulate_time_stepped(const MicroInstance& m) {
  const int stages = static_cast<int>(m.met_ms.size());
  long total_met = 0;
  for (int met : m.met_ms) total_met += met * kTicksPerMs;
  const long total_slack = m.slo_ms * kTicksPerMs - total_met;

  std::vector<ORequest> req;
  for (int a : m.arrivals_ms) req.push_back({a * kTicksPerMs});
  std::deque<OContainer> cont;  // stable references across spawns
  std::vector<std::vector<int>> queue(static_cast<size_t>(stages));
  MicroOutcome out;

  if (m.mode == MicroInstance::Mode::kStaticPool)
    for (int s = 0; s < stages; ++s)
      for (int k = 0; k < m.pool_per_stage; ++k) cont.push_back({s, m.batch_size, 0, {}, -1, -1});

  auto start = [&](OContainer& c, long t) {
    if (c.executing >= 0 || c.local.empty() || t < c.ready) return;
    c.executing = c.local.front();
    c.local.pop_front();
    c.exec_end = t + m.met_ms[static_cast<size_t>(c.stage)] * kTicksPerMs;
  };
  auto free_slots = [](const OContainer& c) {
    return c.batch - static_cast<int>(c.local.size()) - (c.executing >= 0 ? 1 : 0);
  };
  auto dispatch = [&](int stage, long t) {
    auto& q = queue[static_cast<size_t>(stage)];
    while (!q.empty()) {
      int best_c = -1;
      for (size_t i = 0; i < cont.size(); ++i) {
        const OContainer& c = cont[i];
        if (c.stage != stage || free_slots(c) <= 0) continue;
        if (m.mode == MicroInstance::Mode::kOnDemand && t < c.ready) continue;
        if (best_c < 0) {
          best_c = static_cast<int>(i);
          continue;
        }
        const OContainer& b = cont[static_cast<size_t>(best_c)];
        const bool cw = t >= c.ready, bw = t >= b.ready;
        if (cw != bw) {
          if (cw) best_c = static_cast<int>(i);
        } else if (free_slots(c) < free_slots(b)) {
          best_c = static_cast<int>(i);
        }
      }
      if (best_c < 0) return;
      size_t pick = 0;
      auto remaining = [&](int r) {
        const ORequest& x = req[static_cast<size_t>(r)];
        return std::max(0L, total_slack - (t - x.arrival - x.met_done));
      };
      for (size_t i = 1; i < q.size(); ++i) {
        const long ri = remaining(q[i]), rp = remaining(q[pick]);
        if (ri < rp || (ri == rp && req[static_cast<size_t>(q[i])].arrival < req[static_cast<size_t>(q[pick])].arrival))
          pick = i;
      }
      const int r = q[pick];
      q.erase(q.begin() + static_cast<long>(pick));
      OContainer& c = cont[static_cast<size_t>(best_c)];
      c.local.push_back(r);
      start(c, t);
    }
  };
  auto enqueue = [&](int r, int stage, long t) {
    queue[static_cast<size_t>(stage)].push_back(r);
    dispatch(stage, t);
    if (m.mode == MicroInstance::Mode::kOnDemand && !queue[static_cast<size_t>(stage)].empty() &&
        static_cast<int>(cont.size()) < m.max_containers) {
      cont.push_back({stage, 1, t + m.cold_start_ms * kTicksPerMs, {}, -1, -1});
      ++out.spawns;
      dispatch(stage, t);
    }
  };

  size_t next = 0;
  long done = 0;
  const long n = static_cast<long>(req.size());
  // Every request finishes by then unless the instance is stalled.
  const long limit = ((m.arrivals_ms.empty() ? 0 : m.arrivals_ms.back()) + m.cold_start_ms + n * total_met / kTicksPerMs + 1) *
                     kTicksPerMs;
  for (long t = 0; done < n; ++t) {
    // Completions.
    std::vector<int> touched;
    for (size_t i = 0; i < cont.size(); ++i) {
      OContainer& c = cont[i];
      if (c.executing < 0 || c.exec_end != t) continue;
      touched.push_back(c.stage);
      ORequest& x = req[static_cast<size_t>(c.executing)];
      const int r = c.executing;
      c.executing = -1;
      x.met_done += m.met_ms[static_cast<size_t>(c.stage)] * kTicksPerMs;
      if (x.stage + 1 < stages) {
        ++x.stage;
        enqueue(r, x.stage, t);
      } else {
        x.completion = t;
        ++done;
      }
      start(c, t);
      dispatch(c.stage, t);
    }
    // With at most two stages, any two completions in one step either share a
    // stage or couple through the downstream queue.
    if (touched.size() > 1) out.order_sensitive = true;
    // Containers becoming ready.
    std::vector<int> ready_stages;
    for (size_t i = 0; i < cont.size(); ++i) {
      OContainer& c = cont[i];
      if (c.ready != t || t == 0) continue;
      if (std::count(ready_stages.begin(), ready_stages.end(), c.stage)) out.order_sensitive = true;
      ready_stages.push_back(c.stage);
      start(c, t);
      dispatch(c.stage, t);
    }
    // Arrivals (distinct by construction).
    while (next < req.size() && req[next].arrival == t) {
      enqueue(static_cast<int>(next), 0, t);
      ++next;
    }
    if (t > limit) break;
  }
  for (const ORequest& x : req)
    out.completion_ms.push_back(x.completion < 0 ? -1 : static_cast<double>(x.completion) / kTicksPerMs);
  return out;
}

MicroOutcome simulate_event_engine(const MicroInstance& m) {
  Catalog catalog;
  ChainSpec spec;
  spec.id = "micro";
  double total_met = 0;
  for (size_t s = 0; s < m.met_ms.size(); ++s) {
    MicroserviceProfile p;
    p.id = fmt::format("S{}", s);
    p.met_ref_ms = m.met_ms[s];
    p.cold_start_min_ms = p.cold_start_max_ms = m.cold_start_ms;
    p.cpu_demand = 0.5;
    p.mem_demand_bytes = 0;
    catalog.add_microservice(p);
    spec.stages.push_back(p.id);
    total_met += m.met_ms[s];
  }
  spec.slo_ms = m.slo_ms;
  spec.overhead_margin_ms = 0;
  catalog.add_chain(spec);

  ArrivalTrace trace;
  for (int a : m.arrivals_ms) trace.events.push_back({static_cast<double>(a), "micro"});
  trace.horizon_ms = m.arrivals_ms.empty() ? 1 : m.arrivals_ms.back() + 1;
  trace.source = TraceSource::kReplay;

  RunInputs in;
  in.catalog = &catalog;
  in.mix = {"micro", {{"micro", 1.0}}};
  in.trace = &trace;
  in.policy = PolicySpec{};
  in.policy.queue_order = QueueOrder::kLsfDynamic;
  in.engine.monitor_interval_ms = 0;
  in.engine.idle_timeout_ms = 1e12;
  in.engine.evict_idle_on_pressure = false;
  in.engine.prewarmed_per_stage = 0;
  in.cluster.nodes = 1;
  in.cluster.mem_per_node_bytes = 1;
  if (m.mode == MicroInstance::Mode::kStaticPool) {
    in.engine.prewarmed_per_stage = m.pool_per_stage;
    in.engine.batch_size_override = m.batch_size;
    in.cluster.cores_per_node = 0.5 * m.pool_per_stage * static_cast<double>(m.met_ms.size());
  } else {
    in.policy.on_demand_spawn = true;
    in.policy.batch_one = true;
    in.policy.warm_only = true;
    in.cluster.cores_per_node = 0.5 * m.max_containers;
  }
  const RunResult r = run(in);
  MicroOutcome out;
  for (const RequestRecord& rec : r.requests) out.completion_ms.push_back(rec.completion);
  out.spawns = r.report.spawns.on_demand;
  return out;
}

OracleComparison compare_with_oracle(int count, uint64_t seed) {
  OracleComparison cmp;
  Rng rng(seed);
  int drawn = 0;
  while (cmp.instances < count) {
    if (++drawn > count * 200) {
      cmp.failures.push_back("could not draw enough order-insensitive instances");
      break;
    }
    const MicroInstance m = random_micro_instance(rng);
    const MicroOutcome ref = simulate_time_stepped(m);
    // Order-sensitive draws have no unique answer; stalled ones (a full
    // cluster with an unserved stage) never finish in either simulator.
    if (ref.order_sensitive || std::count(ref.completion_ms.begin(), ref.completion_ms.end(), -1.0) > 0) continue;
    const MicroOutcome ev = simulate_event_engine(m);
    ++cmp.instances;
    bool ok = ref.completion_ms.size() == ev.completion_ms.size();
    for (size_t i = 0; ok && i < ref.completion_ms.size(); ++i) {
      const double d = std::abs(ref.completion_ms[i] - ev.completion_ms[i]);
      cmp.max_abs_diff_ms = std::max(cmp.max_abs_diff_ms, d);
      if (d > 0.01 || ref.completion_ms[i] < 0) ok = false;
    }
    if (ref.spawns != ev.spawns) {
      cmp.spawns_match = false;
      ok = false;
    }
    if (ok)
      ++cmp.matched;
    else
      cmp.failures.push_back(m.describe());
  }
  return cmp;
}

}  // namespace chainsim
