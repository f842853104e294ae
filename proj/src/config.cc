#include "chainsim/config.h"

#include <fstream>
#include <set>
#include <sstream>

namespace chainsim {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

TraceSource trace_source_from_string(const std::string& name) {
  for (auto k : {TraceSource::kPoisson, TraceSource::kDiurnal, TraceSource::kSpike, TraceSource::kReplay})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown workload kind: " + name);
}

ojson mix_to_json(const WorkloadMix& mix) {
  if (mix.name == "heavy" || mix.name == "medium" || mix.name == "light") {
    const WorkloadMix stock = WorkloadMix::by_name(mix.name);
    if (stock.chains == mix.chains) return mix.name;
  }
  ojson chains = ojson::array();
  for (const auto& [id, w] : mix.chains) chains.push_back(ojson::array({id, w}));
  return {{"name", mix.name}, {"chains", chains}};
}

WorkloadMix mix_from_json(const json& j) {
  if (j.is_string()) {
    try {
      return WorkloadMix::by_name(j.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  check_keys(j, {"name", "chains"}, "workload.mix");
  WorkloadMix mix;
  read(j, "name", mix.name);
  if (!j.contains("chains") || !j["chains"].is_array()) throw ConfigError("workload.mix.chains must be an array");
  for (const auto& pair : j["chains"]) {
    if (!pair.is_array() || pair.size() != 2) throw ConfigError("workload.mix.chains entries are [chain, weight]");
    mix.chains.emplace_back(pair[0].get<std::string>(), pair[1].get<double>());
  }
  return mix;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    for (const auto& [id, spec] : catalog.chains())
      for (const std::string& stage : spec.stages)
        if (!catalog.has_microservice(stage))
          throw ConfigError("chain '" + id + "' references unknown microservice '" + stage + "'");
    for (const auto& [id, weight] : workload.mix.chains)
      if (!catalog.has_chain(id)) throw ConfigError("workload mix references unknown chain '" + id + "'");
    catalog.validate();
    workload.mix.validate(&catalog);
    cluster.validate();
    engine.validate();
    predictor.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(horizon_ms > 0)) throw ConfigError("horizon_ms must be > 0");
  if (policies.empty()) throw ConfigError("no policies selected");
  if (seeds.empty()) throw ConfigError("no seeds selected");
  if (workload.prehistory_ms < 0) throw ConfigError("workload.prehistory_ms must be >= 0");
  switch (workload.kind) {
    case TraceSource::kPoisson:
      if (!(workload.rate_per_s > 0)) throw ConfigError("workload.rate must be > 0");
      break;
    case TraceSource::kDiurnal:
      if (!(workload.rate_per_s > workload.amplitude_per_s) || workload.amplitude_per_s < 0)
        throw ConfigError("diurnal workload needs rate > amplitude >= 0");
      if (!(workload.period_ms > 0)) throw ConfigError("workload.period_ms must be > 0");
      break;
    case TraceSource::kSpike:
      if (workload.peak_rate_per_s < workload.rate_per_s) throw ConfigError("spike workload needs peak >= rate");
      break;
    case TraceSource::kReplay:
      if (workload.path.empty()) throw ConfigError("replay workload needs a path");
      break;
  }
}

ojson to_json(const ExperimentConfig& c) {
  ojson j;
  ojson ms = ojson::array();
  for (const auto& [id, p] : c.catalog.microservices())
    ms.push_back({{"id", p.id},
                  {"met_ref_ms", p.met_ref_ms},
                  {"met_slope_ms", p.met_slope_ms},
                  {"reference_size", p.reference_size},
                  {"cold_start_min_ms", p.cold_start_min_ms},
                  {"cold_start_max_ms", p.cold_start_max_ms},
                  {"cpu_demand", p.cpu_demand},
                  {"mem_demand_bytes", p.mem_demand_bytes}});
  ojson chains = ojson::array();
  for (const auto& [id, s] : c.catalog.chains())
    chains.push_back(
        {{"id", s.id}, {"stages", s.stages}, {"slo_ms", s.slo_ms}, {"overhead_margin_ms", s.overhead_margin_ms}});
  j["catalog"] = {{"input_size", c.catalog.input_size()}, {"microservices", ms}, {"chains", chains}};

  const WorkloadConfig& w = c.workload;
  j["workload"] = {{"kind", std::string(to_string(w.kind))},
                   {"rate", w.rate_per_s},
                   {"amplitude", w.amplitude_per_s},
                   {"period_ms", w.period_ms},
                   {"peak_rate", w.peak_rate_per_s},
                   {"spike_starts_ms", w.spike_starts_ms},
                   {"spike_len_ms", w.spike_len_ms},
                   {"path", w.path},
                   {"prehistory_ms", w.prehistory_ms},
                   {"mix", mix_to_json(w.mix)}};
  j["cluster"] = {{"nodes", c.cluster.nodes},
                  {"cores_per_node", c.cluster.cores_per_node},
                  {"mem_per_node_bytes", c.cluster.mem_per_node_bytes},
                  {"power_idle_w", c.cluster.power_idle_w},
                  {"power_per_core_w", c.cluster.power_per_core_w},
                  {"node_off_delay_ms", c.cluster.node_off_delay_ms},
                  {"nodes_start_powered", c.cluster.nodes_start_powered}};
  const EngineConfig& e = c.engine;
  j["engine"] = {{"monitor_interval_ms", e.monitor_interval_ms},
                 {"delay_lookback_ms", e.delay_lookback_ms},
                 {"idle_timeout_ms", e.idle_timeout_ms},
                 {"sample_interval_ms", e.sample_interval_ms},
                 {"transition_delay_ms", e.transition_delay_ms},
                 {"exec_jitter_sigma_ms", e.exec_jitter_sigma_ms},
                 {"lsf_mode", e.lsf_static ? "static" : "dynamic"},
                 {"evict_idle_on_pressure", e.evict_idle_on_pressure},
                 {"evict_min_idle_ms", e.evict_min_idle_ms},
                 {"prewarmed_per_stage", e.prewarmed_per_stage},
                 {"batch_size_override", e.batch_size_override}};
  const ForecasterConfig& p = c.predictor;
  j["predictor"] = {{"kind", std::string(to_string(p.kind))},
                    {"override", c.predictor_override},
                    {"window_ms", p.window_ms},
                    {"history_ms", p.history_ms},
                    {"horizon_ms", p.horizon_ms},
                    {"sub_bin_ms", p.sub_bin_ms},
                    {"mwa_k", p.mwa_k},
                    {"ewma_alpha", p.ewma_alpha},
                    {"train_fraction", p.train_fraction},
                    {"lstm",
                     {{"layers", p.lstm.layers},
                      {"hidden", p.lstm.hidden},
                      {"epochs", p.lstm.epochs},
                      {"seq_len", p.lstm.seq_len},
                      {"learning_rate", p.lstm.learning_rate},
                      {"forget_bias", p.lstm.forget_bias},
                      {"seed", p.lstm.seed}}}};
  ojson policies = ojson::array();
  for (PolicyKind k : c.policies) policies.push_back(std::string(to_string(k)));
  j["policies"] = policies;
  j["seeds"] = c.seeds;
  j["horizon_ms"] = c.horizon_ms;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"catalog", "workload", "cluster", "engine", "predictor", "policies", "seeds", "seed", "horizon_ms",
                 "output_dir"},
             "config");
  if (j.contains("catalog")) {
    const json& cj = j["catalog"];
    check_keys(cj, {"input_size", "microservices", "chains"}, "catalog");
    Catalog cat;
    double input_size = 0;
    read(cj, "input_size", input_size);
    cat.set_input_size(input_size);
    for (const json& m : cj.value("microservices", json::array())) {
      check_keys(m, {"id", "met_ref_ms", "met_slope_ms", "reference_size", "cold_start_min_ms", "cold_start_max_ms",
                     "cpu_demand", "mem_demand_bytes"},
                 "catalog.microservices");
      MicroserviceProfile p;
      read(m, "id", p.id);
      read(m, "met_ref_ms", p.met_ref_ms);
      read(m, "met_slope_ms", p.met_slope_ms);
      read(m, "reference_size", p.reference_size);
      read(m, "cold_start_min_ms", p.cold_start_min_ms);
      read(m, "cold_start_max_ms", p.cold_start_max_ms);
      read(m, "cpu_demand", p.cpu_demand);
      read(m, "mem_demand_bytes", p.mem_demand_bytes);
      try {
        cat.add_microservice(p);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
    for (const json& ch : cj.value("chains", json::array())) {
      check_keys(ch, {"id", "stages", "slo_ms", "overhead_margin_ms"}, "catalog.chains");
      ChainSpec s;
      read(ch, "id", s.id);
      read(ch, "stages", s.stages);
      read(ch, "slo_ms", s.slo_ms);
      read(ch, "overhead_margin_ms", s.overhead_margin_ms);
      try {
        cat.add_chain(s);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
    c.catalog = std::move(cat);
  }
  if (j.contains("workload")) {
    const json& w = j["workload"];
    check_keys(w, {"kind", "rate", "amplitude", "period_ms", "peak_rate", "spike_starts_ms", "spike_len_ms", "path",
                   "prehistory_ms", "mix"},
               "workload");
    std::string kind = std::string(to_string(c.workload.kind));
    read(w, "kind", kind);
    c.workload.kind = trace_source_from_string(kind);
    read(w, "rate", c.workload.rate_per_s);
    read(w, "amplitude", c.workload.amplitude_per_s);
    read(w, "period_ms", c.workload.period_ms);
    read(w, "peak_rate", c.workload.peak_rate_per_s);
    read(w, "spike_starts_ms", c.workload.spike_starts_ms);
    read(w, "spike_len_ms", c.workload.spike_len_ms);
    read(w, "path", c.workload.path);
    read(w, "prehistory_ms", c.workload.prehistory_ms);
    if (w.contains("mix")) c.workload.mix = mix_from_json(w["mix"]);
  }
  if (j.contains("cluster")) {
    const json& cl = j["cluster"];
    check_keys(cl, {"nodes", "cores_per_node", "mem_per_node_bytes", "power_idle_w", "power_per_core_w",
                    "node_off_delay_ms", "nodes_start_powered"},
               "cluster");
    read(cl, "nodes", c.cluster.nodes);
    read(cl, "cores_per_node", c.cluster.cores_per_node);
    read(cl, "mem_per_node_bytes", c.cluster.mem_per_node_bytes);
    read(cl, "power_idle_w", c.cluster.power_idle_w);
    read(cl, "power_per_core_w", c.cluster.power_per_core_w);
    read(cl, "node_off_delay_ms", c.cluster.node_off_delay_ms);
    read(cl, "nodes_start_powered", c.cluster.nodes_start_powered);
  }
  if (j.contains("engine")) {
    const json& e = j["engine"];
    check_keys(e, {"monitor_interval_ms", "delay_lookback_ms", "idle_timeout_ms", "sample_interval_ms",
                   "transition_delay_ms", "exec_jitter_sigma_ms", "lsf_mode", "evict_idle_on_pressure", "evict_min_idle_ms",
                   "prewarmed_per_stage", "batch_size_override"},
               "engine");
    read(e, "monitor_interval_ms", c.engine.monitor_interval_ms);
    read(e, "delay_lookback_ms", c.engine.delay_lookback_ms);
    read(e, "idle_timeout_ms", c.engine.idle_timeout_ms);
    read(e, "sample_interval_ms", c.engine.sample_interval_ms);
    read(e, "transition_delay_ms", c.engine.transition_delay_ms);
    read(e, "exec_jitter_sigma_ms", c.engine.exec_jitter_sigma_ms);
    std::string lsf = c.engine.lsf_static ? "static" : "dynamic";
    read(e, "lsf_mode", lsf);
    if (lsf != "static" && lsf != "dynamic") throw ConfigError("engine.lsf_mode must be static or dynamic");
    c.engine.lsf_static = lsf == "static";
    read(e, "evict_idle_on_pressure", c.engine.evict_idle_on_pressure);
    read(e, "evict_min_idle_ms", c.engine.evict_min_idle_ms);
    read(e, "prewarmed_per_stage", c.engine.prewarmed_per_stage);
    read(e, "batch_size_override", c.engine.batch_size_override);
  }
  if (j.contains("predictor")) {
    const json& p = j["predictor"];
    check_keys(p, {"kind", "override", "window_ms", "history_ms", "horizon_ms", "sub_bin_ms", "mwa_k", "ewma_alpha",
                   "train_fraction", "lstm"},
               "predictor");
    std::string kind = std::string(to_string(c.predictor.kind));
    read(p, "kind", kind);
    try {
      c.predictor.kind = forecaster_kind_from_string(kind);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    read(p, "override", c.predictor_override);
    read(p, "window_ms", c.predictor.window_ms);
    read(p, "history_ms", c.predictor.history_ms);
    read(p, "horizon_ms", c.predictor.horizon_ms);
    read(p, "sub_bin_ms", c.predictor.sub_bin_ms);
    read(p, "mwa_k", c.predictor.mwa_k);
    read(p, "ewma_alpha", c.predictor.ewma_alpha);
    read(p, "train_fraction", c.predictor.train_fraction);
    if (p.contains("lstm")) {
      const json& l = p["lstm"];
      check_keys(l, {"layers", "hidden", "epochs", "seq_len", "learning_rate", "forget_bias", "seed"}, "predictor.lstm");
      read(l, "layers", c.predictor.lstm.layers);
      read(l, "hidden", c.predictor.lstm.hidden);
      read(l, "epochs", c.predictor.lstm.epochs);
      read(l, "seq_len", c.predictor.lstm.seq_len);
      read(l, "learning_rate", c.predictor.lstm.learning_rate);
      read(l, "forget_bias", c.predictor.lstm.forget_bias);
      read(l, "seed", c.predictor.lstm.seed);
    }
  }
  if (j.contains("policies")) {
    c.policies.clear();
    for (const json& p : j["policies"]) {
      try {
        c.policies.push_back(policy_kind_from_string(p.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
  }
  read(j, "seeds", c.seeds);
  if (j.contains("seed")) {
    uint64_t seed = 0;
    read(j, "seed", seed);
    c.seeds = {seed};
  }
  read(j, "horizon_ms", c.horizon_ms);
  read(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ArrivalTrace make_trace(const ExperimentConfig& config, uint64_t seed) {
  const WorkloadConfig& w = config.workload;
  const double start = -w.prehistory_ms;
  switch (w.kind) {
    case TraceSource::kPoisson: return gen_poisson(w.rate_per_s, config.horizon_ms, w.mix, seed, start);
    case TraceSource::kDiurnal:
      return gen_diurnal(w.rate_per_s, w.amplitude_per_s, w.period_ms, config.horizon_ms, w.mix, seed, start);
    case TraceSource::kSpike:
      return gen_spike(w.rate_per_s, w.peak_rate_per_s, w.spike_starts_ms, w.spike_len_ms, config.horizon_ms, w.mix,
                       seed, start);
    case TraceSource::kReplay: return load_trace_csv(w.path, w.mix, seed, &config.catalog);
  }
  throw ConfigError("unknown workload kind");
}

}  // namespace chainsim
