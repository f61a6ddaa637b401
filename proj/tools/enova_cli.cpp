// enova: simulate, recommend, detect, autoscale, sweep and plot from the
// command line. Every run writes its files plus manifest.json into --out and
// refuses to replace existing files unless --force is given.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "enova/detector.hpp"
#include "enova/embedding.hpp"
#include "enova/orchestrator.hpp"
#include "enova/plot.hpp"
#include "enova/recommender.hpp"
#include "enova/scenario.hpp"
#include "enova/simulator.hpp"
#include "enova/taskcluster.hpp"
#include "enova/trace_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace enova;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool force = false;
};

// Collects every output of a run and writes them together, after checking
// that nothing would be overwritten.
class Outputs {
 public:
  explicit Outputs(const Globals& g) : dir_(g.out), force_(g.force) {}

  void add(const std::string& name, std::string contents) { files_[name] = std::move(contents); }

  void commit(const std::string& subcommand, json manifest) {
    manifest["subcommand"] = subcommand;
    json names = json::array();
    for (const auto& [name, _] : files_) names.push_back(name);
    manifest["outputs"] = names;
    files_["manifest.json"] = manifest.dump(2) + "\n";
    for (const auto& [name, _] : files_) {
      if (fs::exists(dir_ / name) && !force_) {
        throw Error("refusing to overwrite " + (dir_ / name).string() + " (pass --force)");
      }
    }
    fs::create_directories(dir_);
    for (const auto& [name, contents] : files_) write_file(dir_ / name, contents);
  }

 private:
  fs::path dir_;
  bool force_;
  std::map<std::string, std::string> files_;
};

std::string trace_csv(std::span<const MetricSample> samples) {
  std::ostringstream out;
  write_trace(samples, out);
  return out.str();
}

Scenario load_scenario(const std::string& path, const Globals& g) {
  Scenario s = read_scenario(path);
  if (g.seed) {
    s.workload.rng_seed = *g.seed;
    s.options.seed = *g.seed;
    s.training.seed = *g.seed;
  }
  return s;
}

double pending_slope(std::span<const MetricSample> trace) {
  if (trace.size() < 2) return 0.0;
  std::vector<double> x, y;
  for (const auto& s : trace) {
    x.push_back(s.ts);
    y.push_back(s.n_p);
  }
  return stats::ols_fit(x, y).slope;
}

json summary_json(const SimResult& r, double duration) {
  double max_np = 0.0, mean_mu = 0.0;
  for (const auto& s : r.trace) {
    max_np = std::max(max_np, s.n_p);
    mean_mu += s.m_u;
  }
  if (!r.trace.empty()) mean_mu /= static_cast<double>(r.trace.size());
  return {{"throughput", r.throughput},
          {"latency", r.latency},
          {"arrived", r.arrived},
          {"completed", r.completed.size()},
          {"pending_at_end", r.pending_at_end},
          {"running_at_end", r.running_at_end},
          {"finished_rate", duration > 0 ? static_cast<double>(r.completed.size()) / duration : 0.0},
          {"max_n_p", max_np},
          {"n_p_slope", pending_slope(r.trace)},
          {"mean_m_u", mean_mu}};
}

// ---- simulate ----

struct SimulateArgs {
  std::string scenario;
  std::optional<double> rate;
  std::optional<double> duration;
  std::optional<int> max_num_seqs;
  std::optional<std::string> config;
};

void apply_overrides(Scenario& s, const SimulateArgs& a, json& overrides) {
  if (a.config) {
    s.config = read_service_config(*a.config);
    overrides["config"] = *a.config;
  }
  if (a.rate) {
    s.workload.phases.clear();
    s.workload.arrival_rate = *a.rate;
    overrides["rate"] = *a.rate;
  }
  if (a.duration) {
    s.workload.duration = *a.duration;
    overrides["duration"] = *a.duration;
  }
  if (a.max_num_seqs) {
    for (auto& [_, d] : s.config.deployments) d.max_num_seqs = *a.max_num_seqs;
    overrides["max_num_seqs"] = *a.max_num_seqs;
  }
  s.validate();
}

void cmd_simulate(const Globals& g, const SimulateArgs& a) {
  Scenario s = load_scenario(a.scenario, g);
  json overrides = json::object();
  apply_overrides(s, a, overrides);
  const SimResult r = run(s.workload, s.config, s.gpus, s.profile, s.options);

  Outputs out(g);
  out.add("trace.csv", trace_csv(r.trace));
  Simulation probe = make_simulation(s);
  std::map<int, GpuTypeId> types;
  for (const auto& v : probe.replicas()) types[v.id] = v.gpu_type;
  for (const auto& [id, t] : r.replica_traces) {
    const std::string type = types.count(id) ? types[id] : "replica";
    out.add("replica-" + std::to_string(id) + "-" + type + ".csv", trace_csv(t));
  }
  std::ostringstream req;
  write_requests(r.completed, req);
  out.add("requests.jsonl", req.str());
  json summary = summary_json(r, s.workload.duration);
  summary["seed"] = s.workload.rng_seed;
  out.add("summary.json", summary.dump(2) + "\n");
  out.commit("simulate", {{"seed", s.workload.rng_seed},
                          {"inputs", {{"scenario", a.scenario}}},
                          {"overrides", overrides}});
  std::cout << "throughput " << format_number(r.throughput) << " tok/GPU/s, latency "
            << format_number(r.latency) << " s/token, completed " << r.completed.size() << "/"
            << r.arrived << "\n";
}

// ---- recommend ----

struct RecommendArgs {
  std::vector<std::string> traces;  // TYPE=path
  std::string devices;
  std::optional<std::string> corpus;
  std::optional<std::string> demand_trace;
  std::optional<double> demand;
  std::optional<int> max_input_tokens;
  std::size_t neighbors = kDefaultNeighbors;
};

void cmd_recommend(const Globals& g, const RecommendArgs& a) {
  RecommendInputs in;
  const DeviceInventory inv = read_devices(a.devices);
  in.devices = inv.gpus;
  in.profile = inv.profile;
  // A scenario file also supplies the prompt bound and the fallback max_tokens.
  const json doc = json::parse(read_file(a.devices));
  if (doc.contains("workload") && doc.contains("config")) {
    const Scenario s = read_scenario(a.devices);
    in.max_input_tokens = s.workload.max_input_length();
    in.default_max_tokens = s.config.default_max_tokens;
  }
  if (a.max_input_tokens) in.max_input_tokens = *a.max_input_tokens;

  for (const auto& spec : a.traces) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("--trace expects TYPE=path, got " + spec);
    const std::string path = spec.substr(eq + 1);
    auto samples = read_trace(path);
    if (samples.empty()) throw Error(path + ": empty trace");
    in.windows[spec.substr(0, eq)] = MetricWindow(std::move(samples));
  }
  if (a.demand) {
    in.demand = *a.demand;
  } else if (a.demand_trace) {
    in.demand = estimate_demand(MetricWindow(read_trace(*a.demand_trace)));
  }

  if (a.corpus) {
    const auto corpus = read_corpus(*a.corpus);
    if (!corpus.empty()) {
      std::vector<std::string> texts;
      std::vector<double> lengths;
      for (const auto& c : corpus) {
        texts.push_back(c.text);
        lengths.push_back(c.output_length);
      }
      in.communities =
          build_community_model(embed_all(HashedNgramEmbedding(), texts), lengths, a.neighbors);
    }
  }

  const Recommendation rec = recommend(in);
  std::ostringstream text;
  text << "demand " << format_number(rec.demand) << " req/s\n";
  for (const auto& [type, t] : rec.per_type) {
    text << type << ": n_limit " << format_number(t.capacity.n_limit) << " req/s"
         << (t.capacity.saturated ? " (saturated)" : " (not saturated)") << ", t_r "
         << format_number(t.capacity.t_r_limit) << " s, max_num_seqs " << t.max_num_seqs
         << ", gpu_memory " << format_number(t.plan.gpu_memory) << " B, parallel_size "
         << t.plan.parallel_size << ", score " << format_number(t.score);
    if (!t.skipped.empty()) text << ", skipped: " << t.skipped;
    text << "\n";
  }
  for (const auto& [type, n] : rec.placement.replicas) {
    text << "replicas " << type << " = " << n << ", weight "
         << format_number(rec.placement.weights.at(type)) << "\n";
  }
  for (const auto& [id, m] : rec.config.max_tokens) {
    text << "max_tokens community " << id << " = " << m << "\n";
  }
  text << "default_max_tokens " << rec.config.default_max_tokens << "\n";
  for (const auto& w : rec.warnings) text << "warning: " << w << "\n";

  Outputs out(g);
  out.add("config.json", service_config_to_json(rec.config) + "\n");
  out.add("recommendation.txt", text.str());
  json inputs = {{"devices", a.devices}, {"traces", a.traces}};
  if (a.corpus) inputs["corpus"] = *a.corpus;
  if (a.demand_trace) inputs["demand_trace"] = *a.demand_trace;
  json overrides = json::object();
  if (a.demand) overrides["demand"] = *a.demand;
  overrides["neighbors"] = a.neighbors;
  if (a.max_input_tokens) overrides["max_input_tokens"] = *a.max_input_tokens;
  out.commit("recommend", {{"seed", g.seed ? json(*g.seed) : json(nullptr)},
                           {"inputs", inputs},
                           {"overrides", overrides}});
  for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << text.str();
}

// ---- detect ----

struct DetectArgs {
  std::optional<std::string> train;
  std::optional<std::string> test;
  std::optional<std::string> labels;
  std::optional<std::string> load;
  bool synthetic = false;
  int epochs = 200;
  int replicas = 1;
  std::size_t smooth = 1;
};

std::vector<int> read_labels(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<int> labels;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1 && line == "label") continue;
    if (line.empty()) continue;
    if (line != "1" && line != "-1" && line != "+1") {
      throw ParseError(path + ": label must be 1 or -1", n);
    }
    labels.push_back(line == "-1" ? -1 : 1);
  }
  return labels;
}

std::vector<MetricVector> features(std::span<const MetricSample> samples, int replicas,
                                   std::size_t smooth) {
  std::vector<MetricVector> rows;
  for (const auto& s : samples) rows.push_back(detector_features(s, replicas));
  return smooth > 1 ? smooth_rows(rows, smooth) : rows;
}

void cmd_detect(const Globals& g, const DetectArgs& a) {
  const std::uint64_t seed = g.seed.value_or(1);
  VaeConfig cfg;
  cfg.seed = seed;
  cfg.epochs = a.epochs;
  Outputs out(g);
  json report;
  json inputs = json::object();

  if (a.synthetic) {
    const auto bench = make_synthetic_benchmark(seed);
    VaeDetector det = train(bench.train, cfg);
    calibrate_threshold(det, bench.calibration);
    std::vector<bool> predicted;
    for (const auto& m : bench.test) predicted.push_back(det.detect(m).is_anomaly);
    const auto scores = evaluate_point_adjusted(bench.truth, predicted);
    std::size_t fp = 0;
    for (const auto& m : bench.heldout_normals) fp += det.detect(m).is_anomaly ? 1 : 0;
    report = {{"precision", scores.precision},
              {"recall", scores.recall},
              {"f1", scores.f1},
              {"heldout_false_positive_rate",
               static_cast<double>(fp) / static_cast<double>(bench.heldout_normals.size())},
              {"risk_q", det.tail().risk_q},
              {"threshold", det.threshold()}};
    out.add("model.json", det.to_json());
    inputs["synthetic"] = true;
  } else {
    if (!a.test || !a.labels) throw Error("detect: --test and --labels are required");
    if (!a.train && !a.load) throw Error("detect: give --train or --load");
    const auto test = read_trace(*a.test);
    const auto labels = read_labels(*a.labels);
    if (labels.size() != test.size()) {
      throw Error("detect: " + std::to_string(labels.size()) + " labels for " +
                  std::to_string(test.size()) + " test samples");
    }
    VaeDetector det;
    if (a.load) {
      det = VaeDetector::load(*a.load);
      inputs["model"] = *a.load;
    } else {
      const auto lt = read_labeled_trace(*a.train);
      LabeledDataset data;
      data.rows = features(lt.samples, a.replicas, a.smooth);
      data.labels = lt.labels;
      det = train(data, cfg);
      std::vector<MetricVector> normals;
      for (std::size_t i = 0; i < data.rows.size(); ++i) {
        if (data.labels[i] == 1) normals.push_back(data.rows[i]);
      }
      calibrate_threshold(det, normals);
      inputs["train"] = *a.train;
    }
    if (!det.calibrated()) throw Error("detect: model has no calibrated threshold");
    const auto rows = features(test, a.replicas, a.smooth);
    std::vector<bool> truth, predicted;
    std::ostringstream verdicts;
    verdicts << "ts,score,anomaly,direction,md\n";
    std::size_t fp = 0, normals = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Verdict v = det.detect(rows[i]);
      truth.push_back(labels[i] == -1);
      predicted.push_back(v.is_anomaly);
      if (labels[i] == 1) {
        ++normals;
        fp += v.is_anomaly ? 1 : 0;
      }
      verdicts << format_number(test[i].ts) << "," << format_number(v.score) << ","
               << (v.is_anomaly ? 1 : 0) << "," << to_string(v.direction) << ","
               << format_number(v.md) << "\n";
    }
    const auto scores = evaluate_point_adjusted(truth, predicted);
    report = {{"precision", scores.precision},
              {"recall", scores.recall},
              {"f1", scores.f1},
              {"false_positive_rate",
               normals ? static_cast<double>(fp) / static_cast<double>(normals) : 0.0},
              {"risk_q", det.tail().risk_q},
              {"threshold", det.threshold()}};
    out.add("verdicts.csv", verdicts.str());
    out.add("model.json", det.to_json());
    inputs["test"] = *a.test;
    inputs["labels"] = *a.labels;
  }
  report["seed"] = seed;
  out.add("report.json", report.dump(2) + "\n");
  out.commit("detect", {{"seed", seed},
                        {"inputs", inputs},
                        {"overrides", {{"epochs", a.epochs}, {"smooth", a.smooth}}}});
  std::cout << "precision " << format_number(report["precision"].get<double>()) << " recall "
            << format_number(report["recall"].get<double>()) << " f1 "
            << format_number(report["f1"].get<double>()) << "\n";
}

// ---- autoscale ----

struct AutoscaleArgs {
  std::string scenario;
  std::optional<double> duration;
  std::optional<std::string> detector;
};

void cmd_autoscale(const Globals& g, const AutoscaleArgs& a) {
  Scenario s = load_scenario(a.scenario, g);
  const VaeDetector det =
      a.detector ? VaeDetector::load(*a.detector) : train_scenario_detector(s);
  const LoopResult res = run_loop(s, det, a.duration.value_or(0.0));

  Outputs out(g);
  out.add("audit.jsonl", res.log.to_jsonl());
  out.add("trace.csv", trace_csv(res.sim.trace));
  out.add("detector.json", det.to_json());
  json summary = summary_json(res.sim, a.duration.value_or(s.workload.duration));
  summary["actions"] = res.log.actions.size();
  summary["threshold"] = det.threshold();
  summary["seed"] = s.workload.rng_seed;
  if (!res.log.actions.empty()) {
    out.add("final_config.json", service_config_to_json(res.log.actions.back().new_config) + "\n");
  }
  out.add("summary.json", summary.dump(2) + "\n");
  json inputs = {{"scenario", a.scenario}};
  if (a.detector) inputs["detector"] = *a.detector;
  json overrides = json::object();
  if (a.duration) overrides["duration"] = *a.duration;
  out.commit("autoscale",
             {{"seed", s.workload.rng_seed}, {"inputs", inputs}, {"overrides", overrides}});
  for (const auto& act : res.log.actions) {
    std::cout << "t=" << format_number(act.ts) << " " << to_string(act.trigger.direction) << ": "
              << act.rationale << "\n";
  }
  std::cout << res.log.actions.size() << " action(s)\n";
}

// ---- sweep ----

struct SweepArgs {
  std::string scenario;
  std::string param = "lambda";
  double from = 1.0;
  double to = 12.0;
  double step = 1.0;
  int threads = 0;
};

void cmd_sweep(const Globals& g, const SweepArgs& a) {
  if (a.param != "lambda" && a.param != "max_num_seqs") {
    throw Error("sweep: --param must be lambda or max_num_seqs");
  }
  if (!(a.step > 0.0) || a.to < a.from) throw Error("sweep: need step > 0 and to >= from");
  const Scenario base = load_scenario(a.scenario, g);
  std::vector<double> values;
  for (int i = 0;; ++i) {
    const double v = a.from + a.step * i;
    if (v > a.to + 1e-9) break;
    values.push_back(v);
  }
  std::vector<std::vector<double>> rows(values.size());
  std::vector<std::string> errors(values.size());
  auto work = [&](std::size_t i) {
    try {
      Scenario s = base;
      if (a.param == "lambda") {
        s.workload.phases.clear();
        s.workload.arrival_rate = values[i];
      } else {
        for (auto& [_, d] : s.config.deployments) d.max_num_seqs = static_cast<int>(values[i]);
      }
      const SimResult r = run(s.workload, s.config, s.gpus, s.profile, s.options);
      const json sm = summary_json(r, s.workload.duration);
      double nf = 0.0, nr = 0.0;
      std::size_t n = 0;
      for (const auto& m : r.trace) {
        if (m.ts < s.workload.duration / 3) continue;
        nf += m.n_f;
        nr += m.n_r;
        ++n;
      }
      rows[i] = {values[i], r.throughput, r.latency, n ? nf / n : 0.0, n ? nr / n : 0.0,
                 sm["mean_m_u"].get<double>(), sm["max_n_p"].get<double>(),
                 sm["n_p_slope"].get<double>()};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(values.size(), a.threads > 0 ? static_cast<std::size_t>(a.threads) : hw);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < values.size(); i += workers) work(i);
    });
  }
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!errors[i].empty()) throw Error("sweep at " + format_number(values[i]) + ": " + errors[i]);
  }
  const std::string csv = to_csv({a.param, "throughput", "latency", "finished_rate",
                                  "mean_running", "mean_m_u", "max_n_p", "n_p_slope"},
                                 rows);
  Outputs out(g);
  out.add("sweep.csv", csv);
  out.commit("sweep", {{"seed", base.workload.rng_seed},
                       {"inputs", {{"scenario", a.scenario}}},
                       {"overrides",
                        {{"param", a.param}, {"from", a.from}, {"to", a.to}, {"step", a.step}}}});
  std::cout << csv;
}

// ---- plot ----

struct PlotArgs {
  std::vector<std::string> traces;
  std::optional<std::string> sweep;
  std::optional<std::string> corpus;
  std::size_t neighbors = kDefaultNeighbors;
};

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv_table(
    const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size()) throw ParseError(path + ": wrong number of cells", n);
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c));
    rows.push_back(row);
  }
  if (header.empty()) throw Error(path + ": empty table");
  return {header, rows};
}

void cmd_plot(const Globals& g, const PlotArgs& a) {
  if (a.traces.empty() && !a.sweep && !a.corpus) {
    throw Error("plot: give --trace, --sweep or --corpus");
  }
  Outputs out(g);
  json inputs = json::object();
  for (const auto& path : a.traces) {
    const auto trace = read_trace(path);
    const std::string stem = fs::path(path).stem().string();
    out.add(stem + ".svg", render_svg(trace_charts(trace, stem)));
  }
  if (!a.traces.empty()) inputs["traces"] = a.traces;
  if (a.sweep) {
    const auto [header, rows] = read_csv_table(*a.sweep);
    std::vector<Chart> panels;
    for (std::size_t c = 1; c < header.size(); ++c) {
      Series s{header[c], {}, {}, false};
      for (const auto& r : rows) {
        s.x.push_back(r[0]);
        s.y.push_back(r[c]);
      }
      panels.push_back({header[c] + " vs " + header[0], header[0], header[c], {s},
                        header[c] == "latency"});
    }
    out.add(fs::path(*a.sweep).stem().string() + ".svg", render_svg(panels));
    inputs["sweep"] = *a.sweep;
  }
  if (a.corpus) {
    const auto corpus = read_corpus(*a.corpus);
    if (corpus.empty()) throw Error(*a.corpus + ": empty corpus");
    std::vector<std::string> texts;
    std::vector<double> lengths;
    for (const auto& c : corpus) {
      texts.push_back(c.text);
      lengths.push_back(c.output_length);
    }
    const auto vectors = embed_all(HashedNgramEmbedding(), texts);
    const auto model = build_community_model(vectors, lengths, a.neighbors);
    const auto xy = pca_2d(vectors);
    std::vector<Series> series;
    std::vector<std::vector<double>> table;
    for (const auto& c : model.communities) {
      Series s{"community " + std::to_string(c.id), {}, {}, true};
      for (auto m : c.members) {
        s.x.push_back(xy[m][0]);
        s.y.push_back(xy[m][1]);
        table.push_back({static_cast<double>(m), xy[m][0], xy[m][1], static_cast<double>(c.id),
                         lengths[m]});
      }
      series.push_back(std::move(s));
    }
    std::sort(table.begin(), table.end());
    out.add("communities.svg",
            render_svg({Chart{"request communities (Q = " + format_number(model.modularity) + ")",
                              "PC1", "PC2", series, false}}));
    out.add("communities.csv", to_csv({"index", "pc1", "pc2", "community", "output_length"}, table));
    inputs["corpus"] = *a.corpus;
  }
  out.commit("plot", {{"seed", g.seed ? json(*g.seed) : json(nullptr)},
                      {"inputs", inputs},
                      {"overrides", {{"neighbors", a.neighbors}}}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ENOVA-style autoscaling pipeline over a simulated LLM serving system"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Override every seed of the run");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a scenario and write traces");
  sim->add_option("--scenario", sa.scenario)->required();
  sim->add_option("--rate", sa.rate, "Constant arrival rate, req/s");
  sim->add_option("--duration", sa.duration, "Seconds");
  sim->add_option("--max-num-seqs", sa.max_num_seqs);
  sim->add_option("--config", sa.config, "ServiceConfig document replacing the scenario's");

  RecommendArgs ra;
  auto* rec = app.add_subcommand("recommend", "Derive a service configuration from traces");
  rec->add_option("--trace", ra.traces, "TYPE=path of one replica's trace")->required();
  rec->add_option("--devices", ra.devices, "JSON with gpus and profile (a scenario works)")
      ->required();
  rec->add_option("--corpus", ra.corpus, "JSON lines of prompts with output lengths");
  rec->add_option("--demand-trace", ra.demand_trace, "Aggregate trace for the demand estimate");
  rec->add_option("--demand", ra.demand, "Demand in req/s");
  rec->add_option("--max-input-tokens", ra.max_input_tokens);
  rec->add_option("--neighbors", ra.neighbors, "k of the mutual kNN request graph")
      ->capture_default_str();

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "Train or load a detector and score a trace");
  det->add_option("--train", da.train, "Labeled trace");
  det->add_option("--test", da.test, "Metric trace");
  det->add_option("--labels", da.labels, "One label (1 or -1) per test sample");
  det->add_option("--load", da.load, "Saved detector");
  det->add_flag("--synthetic", da.synthetic, "Run the synthetic benchmark");
  det->add_option("--epochs", da.epochs)->capture_default_str();
  det->add_option("--replicas", da.replicas, "Serving replicas behind the traces")
      ->capture_default_str();
  det->add_option("--smooth", da.smooth, "Trailing-mean width")->capture_default_str();

  AutoscaleArgs aa;
  auto* as = app.add_subcommand("autoscale", "Run a scenario under the control loop");
  as->add_option("--scenario", aa.scenario)->required();
  as->add_option("--duration", aa.duration);
  as->add_option("--detector", aa.detector, "Saved detector instead of training one");

  SweepArgs wa;
  auto* sw = app.add_subcommand("sweep", "Throughput and latency over a parameter range");
  sw->add_option("--scenario", wa.scenario)->required();
  sw->add_option("--param", wa.param, "lambda or max_num_seqs")->capture_default_str();
  sw->add_option("--from", wa.from)->capture_default_str();
  sw->add_option("--to", wa.to)->capture_default_str();
  sw->add_option("--step", wa.step)->capture_default_str();
  sw->add_option("--threads", wa.threads, "0 = hardware concurrency")->capture_default_str();

  PlotArgs pa;
  auto* pl = app.add_subcommand("plot", "Render traces, sweeps or a corpus map");
  pl->add_option("--trace", pa.traces);
  pl->add_option("--sweep", pa.sweep);
  pl->add_option("--corpus", pa.corpus);
  pl->add_option("--neighbors", pa.neighbors, "k of the mutual kNN request graph")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) cmd_simulate(g, sa);
    if (*rec) cmd_recommend(g, ra);
    if (*det) cmd_detect(g, da);
    if (*as) cmd_autoscale(g, aa);
    if (*sw) cmd_sweep(g, wa);
    if (*pl) cmd_plot(g, pa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
