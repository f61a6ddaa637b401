#include "enova/scenario.hpp"

#include "enova/trace_io.hpp"
#include "json.hpp"

namespace enova {

using json = nlohmann::ordered_json;

namespace {

LengthDist dist_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") return LengthDist::fixed(j.at("value").get<double>());
  if (kind == "uniform") {
    return LengthDist::uniform(j.at("low").get<double>(), j.at("high").get<double>());
  }
  if (kind == "lognormal") {
    return LengthDist::lognormal(j.at("mu").get<double>(), j.at("sigma").get<double>());
  }
  throw Error("unknown length distribution kind '" + kind + "'");
}

json dist_to_json(const LengthDist& d) {
  switch (d.kind) {
    case LengthDist::Kind::kFixed:
      return {{"kind", "fixed"}, {"value", d.a}};
    case LengthDist::Kind::kUniform:
      return {{"kind", "uniform"}, {"low", d.a}, {"high", d.b}};
    case LengthDist::Kind::kLognormal:
      return {{"kind", "lognormal"}, {"mu", d.a}, {"sigma", d.b}};
  }
  return {};
}

std::vector<double> doubles(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<double>>();
}

DeviceInventory devices_from_json(const json& j) {
  DeviceInventory inv;
  for (const auto& g : j.at("gpus")) {
    GpuDeviceSpec d;
    d.gpu_type_id = g.at("gpu_type_id").get<std::string>();
    d.memory_total = g.at("memory_total").get<double>();
    d.device_count = g.at("device_count").get<int>();
    d.tokens_per_second_capacity = g.at("tokens_per_second_capacity").get<double>();
    d.batch_overhead_s = g.value("batch_overhead_s", 0.0);
    inv.gpus.push_back(d);
  }
  const json& p = j.at("profile");
  inv.profile.params_bytes = p.at("params_bytes").get<double>();
  inv.profile.dtype_bytes = p.value("dtype_bytes", 2.0);
  inv.profile.token_mem = p.at("token_mem").get<double>();
  inv.profile.overhead_others = p.at("overhead_others").get<double>();
  return inv;
}

}  // namespace

DeviceInventory read_devices(const std::filesystem::path& source) {
  const std::string text = read_file(source);
  DeviceInventory inv;
  try {
    inv = devices_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(source.string() + ": " + e.what());
  }
  for (const auto& g : inv.gpus) {
    if (!(g.memory_total > 0.0)) throw Error(source.string() + ": memory_total must be > 0");
    if (g.device_count < 0) throw Error(source.string() + ": device_count must be >= 0");
  }
  return inv;
}

void Scenario::validate() const {
  if (gpus.empty()) throw Error("scenario: no GPU types");
  for (const auto& g : gpus) {
    if (!(g.memory_total > 0.0)) throw Error("scenario: memory_total must be > 0");
    if (g.device_count < 0) throw Error("scenario: device_count must be >= 0");
    if (!(g.tokens_per_second_capacity > 0.0)) {
      throw Error("scenario: tokens_per_second_capacity must be > 0");
    }
    if (!(g.batch_overhead_s >= 0.0)) throw Error("scenario: batch_overhead_s must be >= 0");
  }
  if (!(profile.params_bytes > 0.0 && profile.dtype_bytes > 0.0 && profile.token_mem > 0.0 &&
        profile.overhead_others > 0.0)) {
    throw Error("scenario: model profile fields must be > 0");
  }
  workload.validate();
  if (!(options.tick > 0.0)) throw Error("scenario: sim tick must be > 0");
  if (!(options.restart_delay >= 0.0)) throw Error("scenario: restart_delay must be >= 0");
  if (!(loop.tick > 0.0)) throw Error("scenario: loop tick must be > 0");
  if (loop.cooldown < options.restart_delay) {
    throw Error("scenario: loop cooldown must be >= restart_delay");
  }
}

Scenario scenario_from_json(std::string_view text) {
  Scenario s;
  try {
    const json j = json::parse(text);
    s.name = j.value("name", "");
    DeviceInventory inv = devices_from_json(j);
    s.gpus = std::move(inv.gpus);
    s.profile = inv.profile;
    s.config = service_config_from_json(j.at("config").dump());

    const json& w = j.at("workload");
    s.workload.arrival_rate = w.value("arrival_rate", 0.0);
    if (w.contains("phases")) {
      for (const auto& ph : w["phases"]) {
        s.workload.phases.push_back({ph.at("start").get<double>(), ph.at("rate").get<double>()});
      }
    }
    if (w.contains("input_length")) s.workload.input_length_dist = dist_from_json(w["input_length"]);
    if (w.contains("output_length")) {
      s.workload.output_length_dist = dist_from_json(w["output_length"]);
    }
    if (w.contains("communities")) {
      for (const auto& c : w["communities"]) {
        CommunitySpec cs;
        cs.id = c.at("id").get<int>();
        cs.probability = c.at("probability").get<double>();
        cs.input_length = dist_from_json(c.at("input_length"));
        cs.output_length = dist_from_json(c.at("output_length"));
        if (c.contains("prompts")) cs.prompts = c["prompts"].get<std::vector<std::string>>();
        s.workload.communities.push_back(std::move(cs));
      }
    }
    s.workload.duration = w.value("duration", 900.0);
    s.workload.rng_seed = w.value("seed", std::uint64_t{1});

    if (j.contains("sim")) {
      const json& o = j["sim"];
      s.options.tick = o.value("tick", 1.0);
      s.options.restart_delay = o.value("restart_delay", 60.0);
      const std::string adm = o.value("admission", "conservative");
      if (adm == "conservative") {
        s.options.admission = AdmissionPolicy::kConservative;
      } else if (adm == "optimistic") {
        s.options.admission = AdmissionPolicy::kOptimistic;
      } else {
        throw Error("unknown admission policy '" + adm + "'");
      }
      const std::string acc = o.value("kv_accounting", "incremental");
      if (acc == "incremental") {
        s.options.kv_accounting = KvAccounting::kIncremental;
      } else if (acc == "reserved") {
        s.options.kv_accounting = KvAccounting::kReserved;
      } else {
        throw Error("unknown kv_accounting '" + acc + "'");
      }
      s.options.memory_noise_sigma = o.value("memory_noise_sigma", 0.0);
      s.options.seed = o.value("seed", std::uint64_t{1});
    }
    if (j.contains("loop")) {
      const json& l = j["loop"];
      ControlLoopConfig d;
      s.loop.tick = l.value("tick", d.tick);
      s.loop.window = l.value("window", d.window);
      s.loop.warmup = l.value("warmup", d.warmup);
      s.loop.cooldown = l.value("cooldown", d.cooldown);
      s.loop.max_actions_per_hour = l.value("max_actions_per_hour", d.max_actions_per_hour);
      s.loop.smoother_width = l.value("smoother_width", d.smoother_width);
      s.loop.debounce = l.value("debounce", d.debounce);
      s.loop.demand_window = l.value("demand_window", d.demand_window);
      s.loop.recovery_window = l.value("recovery_window", d.recovery_window);
      s.loop.safety_cap = l.value("safety_cap", d.safety_cap);
    }
    if (j.contains("training")) {
      const json& t = j["training"];
      DetectorTrainingSpec d;
      s.training.normal_rates = doubles(t, "normal_rates");
      s.training.overload_rates = doubles(t, "overload_rates");
      s.training.underload_rates = doubles(t, "underload_rates");
      s.training.segment_duration = t.value("segment_duration", d.segment_duration);
      s.training.skip = t.value("skip", d.skip);
      s.training.label_fraction = t.value("label_fraction", d.label_fraction);
      s.training.seed = t.value("seed", d.seed);
      s.training.epochs = t.value("epochs", d.epochs);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["gpus"] = json::array();
  for (const auto& g : s.gpus) {
    j["gpus"].push_back({{"gpu_type_id", g.gpu_type_id},
                         {"memory_total", g.memory_total},
                         {"device_count", g.device_count},
                         {"tokens_per_second_capacity", g.tokens_per_second_capacity},
                         {"batch_overhead_s", g.batch_overhead_s}});
  }
  j["profile"] = {{"params_bytes", s.profile.params_bytes},
                  {"dtype_bytes", s.profile.dtype_bytes},
                  {"token_mem", s.profile.token_mem},
                  {"overhead_others", s.profile.overhead_others}};
  j["config"] = json::parse(service_config_to_json(s.config));
  json w;
  w["arrival_rate"] = s.workload.arrival_rate;
  w["phases"] = json::array();
  for (const auto& ph : s.workload.phases) w["phases"].push_back({{"start", ph.start}, {"rate", ph.rate}});
  w["input_length"] = dist_to_json(s.workload.input_length_dist);
  w["output_length"] = dist_to_json(s.workload.output_length_dist);
  w["communities"] = json::array();
  for (const auto& c : s.workload.communities) {
    w["communities"].push_back({{"id", c.id},
                                {"probability", c.probability},
                                {"input_length", dist_to_json(c.input_length)},
                                {"output_length", dist_to_json(c.output_length)},
                                {"prompts", c.prompts}});
  }
  w["duration"] = s.workload.duration;
  w["seed"] = s.workload.rng_seed;
  j["workload"] = w;
  j["sim"] = {{"tick", s.options.tick},
              {"restart_delay", s.options.restart_delay},
              {"admission",
               s.options.admission == AdmissionPolicy::kOptimistic ? "optimistic" : "conservative"},
              {"kv_accounting",
               s.options.kv_accounting == KvAccounting::kReserved ? "reserved" : "incremental"},
              {"memory_noise_sigma", s.options.memory_noise_sigma},
              {"seed", s.options.seed}};
  j["loop"] = {{"tick", s.loop.tick},
               {"window", s.loop.window},
               {"warmup", s.loop.warmup},
               {"cooldown", s.loop.cooldown},
               {"max_actions_per_hour", s.loop.max_actions_per_hour},
               {"smoother_width", s.loop.smoother_width},
               {"debounce", s.loop.debounce},
               {"demand_window", s.loop.demand_window},
               {"recovery_window", s.loop.recovery_window},
               {"safety_cap", s.loop.safety_cap}};
  j["training"] = {{"normal_rates", s.training.normal_rates},
                   {"overload_rates", s.training.overload_rates},
                   {"underload_rates", s.training.underload_rates},
                   {"segment_duration", s.training.segment_duration},
                   {"skip", s.training.skip},
                   {"label_fraction", s.training.label_fraction},
                   {"seed", s.training.seed},
                   {"epochs", s.training.epochs}};
  return j.dump(2);
}

Scenario read_scenario(const std::filesystem::path& source) {
  const std::string text = read_file(source);
  try {
    return scenario_from_json(text);
  } catch (const Error& e) {
    throw Error(source.string() + ": " + e.what());
  }
}

Simulation make_simulation(const Scenario& scenario) {
  return Simulation(scenario.gpus, scenario.profile, scenario.config,
                    generate_workload(scenario.workload), scenario.options);
}

}  // namespace enova
