#include "synaudit/cli/app.hpp"

#include "synaudit/cli/manifest.hpp"
#include "synaudit/cli/run_report.hpp"
#include "synaudit/cli/store.hpp"
#include "synaudit/error.hpp"
#include "synaudit/report.hpp"
#include "synaudit/testbed/experiment.hpp"
#include "synaudit/threshold.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <ostream>

namespace synaudit::cli {

using nlohmann::json;
using namespace synaudit::testbed;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
  fs::path config;
  fs::path store;
  int threads = 0;

  fs::path store_root() const { return store.empty() ? out / "store" : store; }
  std::optional<json> config_json() const {
    if (config.empty()) return std::nullopt;
    return load_json_config(config);
  }
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - t_).count();
    t_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point t_ = std::chrono::steady_clock::now();
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

// Paths inside a run manifest are relative to this directory.
fs::path manifest_dir(const Globals& g) { return g.out / "manifests"; }

fs::path manifest_path(const Globals& g, const std::string& command) {
  ensure_dir(manifest_dir(g));
  return manifest_dir(g) / (command + ".json");
}

void record_fleet(RunManifest& m, const fs::path& base, const FleetManifest& f) {
  m.add_output(base, f.file);
  for (const auto& e : f.members) m.add_output(base, f.file.parent_path() / e.path);
}

// ---- testbed directory -----------------------------------------------------

struct Testbed {
  fs::path dir;
  json info;

  static Testbed open(const fs::path& dir) {
    const fs::path file = dir / "testbed.json";
    if (!fs::exists(file)) fail(Errc::MissingArtifact, "no testbed at " + dir.string() + " (testbed.json missing)");
    Testbed t;
    t.dir = dir;
    try {
      t.info = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
      fail(Errc::SchemaError, file.string() + ": " + e.what());
    }
    return t;
  }

  std::uint64_t seed() const { return info.at("seed").get<std::uint64_t>(); }
  Population population() const { return load_population(dir / info.at("population").get<std::string>()); }

  // A fleet argument is a path to a fleet manifest or a fleet name in testbed.json.
  FleetManifest fleet(const std::string& which) const {
    if (info.contains("fleets") && info["fleets"].contains(which))
      return FleetManifest::load(dir / info["fleets"][which].get<std::string>());
    return FleetManifest::load(which);
  }

  fs::path query_file(const std::string& kind) const {
    const auto& q = info.at("queries");
    if (!q.contains(kind)) fail(Errc::MissingArtifact, "testbed has no '" + kind + "' query pool");
    return dir / q[kind].get<std::string>();
  }
};

std::string canonical_kind(const std::string& spec) {
  const QueryKind k = parse_query_kind(spec);
  return to_string(k);
}

// `spec` is a query kind served from the testbed's pools, or a JSON-lines
// file whose kind is `file_kind`.
QuerySet load_queries(const std::optional<Testbed>& tb, const std::string& spec, const std::string& file_kind,
                      int budget, RunManifest& manifest, const fs::path& base) {
  if (budget < 1) fail(Errc::EmptyQuerySet, "budget must be positive");
  fs::path file;
  QuerySet q;
  if (fs::exists(spec) && fs::is_regular_file(spec)) {
    file = spec;
    q.kind = parse_query_kind(file_kind);
  } else {
    if (!tb) fail(Errc::MissingArtifact, "query kind '" + spec + "' needs --testbed");
    q.kind = parse_query_kind(spec);
    file = tb->query_file(canonical_kind(spec));
  }
  auto examples = load_dataset(file);
  if (static_cast<std::size_t>(budget) > examples.size())
    fail(Errc::InsufficientData, "budget " + std::to_string(budget) + " exceeds the " + std::to_string(examples.size()) + " queries in " + file.string());
  examples.resize(static_cast<std::size_t>(budget));
  q.examples = std::move(examples);
  manifest.add_input(base, file);
  return q;
}

std::vector<fs::path> pgm_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(Errc::MissingArtifact, "raster directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<PlotRaster> load_rasters(const fs::path& dir) {
  std::vector<PlotRaster> out;
  for (const auto& f : pgm_files(dir)) out.push_back(load_pgm(f));
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(Errc::ConfigError, "bad sweep value '" + item + "'");
    }
  }
  if (values.empty()) fail(Errc::ConfigError, "sweep needs at least one value");
  return values;
}

std::string value_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void print_summary(std::ostream& out, const std::string& name, const std::map<std::string, EvalSummary>& methods) {
  for (const auto& [m, s] : methods) {
    char line[160];
    std::snprintf(line, sizeof line, "%s %-12s %.3f ± %.3f\n", name.c_str(), m.c_str(), s.mean, s.std);
    out << line;
  }
}

json summary_json(const EvalSummary& s) { return json{{"mean", s.mean}, {"std", s.std}, {"accuracies", s.accuracies}}; }

// ---- commands --------------------------------------------------------------

struct BuildOptions {
  std::optional<int> references, targets;
};

void cmd_testbed_build(const Globals& g, const BuildOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "testbed build";
  ExperimentConfig cfg;
  if (auto j = g.config_json()) {
    cfg = experiment_config_from_json(*j);
    manifest.add_input(manifest_dir(g), g.config);
  }
  const std::uint64_t seed = g.seed.value_or(cfg.seed);
  cfg.seed = seed;
  cfg.population.seed = seed;
  const int references = o.references.value_or(cfg.metric_references);
  const int targets = o.targets.value_or(cfg.targets);
  manifest.config = to_json(cfg);
  manifest.seeds = json{{"base", seed}, {"reference_fleet", derive_seed(seed, 2)}, {"target_fleet", derive_seed(seed, 3)},
                        {"queries", derive_seed(seed, 4)}};

  ensure_dir(g.out / "queries");
  const Population pop = gen_population(cfg.population);
  save_population(pop, g.out / "population.bin");
  manifest.timings["population"] = clock.lap();

  json queries = json::object();
  const auto write_pool = [&](const QuerySet& q, const std::string& file) {
    save_dataset(g.out / "queries" / file, q.examples);
    queries[to_string(q.kind)] = "queries/" + file;
    manifest.add_output(manifest_dir(g), g.out / "queries" / file);
  };
  const int pool = cfg.population.test_size;
  write_pool(real_queries(pop, pool, derive_seed(seed, 4)), "real.jsonl");
  for (int s : cfg.population.sources)
    write_pool(synthetic_queries(pop, s, pool, derive_seed(derive_seed(seed, 4), static_cast<std::uint64_t>(s) + 1)),
               "synthetic-" + std::to_string(s) + ".jsonl");
  write_pool(mixed_queries(pop, pool, derive_seed(seed, 5)), "mixed.jsonl");
  manifest.timings["queries"] = clock.lap();

  const ModelStore store(g.store_root());
  bool reused_ref = false, reused_tgt = false;
  const auto ref = store.fleet(pop, cfg.fleet, references, Side::Reference, derive_seed(seed, 2), g.threads, &reused_ref);
  const auto tgt = store.fleet(pop, cfg.fleet, targets, Side::Target, derive_seed(seed, 3), g.threads, &reused_tgt);
  manifest.timings["fleets"] = clock.lap();

  const auto rel = [&](const fs::path& p) {
    return fs::weakly_canonical(p).lexically_proximate(fs::weakly_canonical(g.out)).generic_string();
  };
  const json info{{"seed", seed},
                  {"population", "population.bin"},
                  {"population_config", to_json(cfg.population)},
                  {"fleet_spec", to_json(cfg.fleet)},
                  {"queries", queries},
                  {"fleets", {{"reference", rel(ref.file)}, {"target", rel(tgt.file)}}}};
  write_file(g.out / "testbed.json", info.dump(2) + "\n");

  manifest.add_output(manifest_dir(g), g.out / "population.bin");
  manifest.add_output(manifest_dir(g), g.out / "testbed.json");
  record_fleet(manifest, manifest_dir(g), ref);
  record_fleet(manifest, manifest_dir(g), tgt);
  const fs::path mpath = manifest_path(g, "testbed-build");
  manifest.save(mpath);

  out << "testbed: " << (g.out / "testbed.json").string() << "\n";
  out << "reference fleet: " << ref.members.size() << " members" << (reused_ref ? " (cached)" : "") << " -> " << ref.file.string() << "\n";
  out << "target fleet: " << tgt.members.size() << " members" << (reused_tgt ? " (cached)" : "") << " -> " << tgt.file.string() << "\n";
  out << "manifest: " << mpath.string() << "\n";
}

struct RasterOptions {
  fs::path testbed;
  std::string side = "target";
  std::string split = "synthetic";
  int count = 10;
  bool png = false;
};

void cmd_testbed_rasters(const Globals& g, const RasterOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "testbed rasters";
  const Testbed tb = Testbed::open(o.testbed);
  PlotSetConfig cfg;
  if (auto j = g.config_json()) {
    cfg = plot_set_config_from_json(*j);
    manifest.add_input(manifest_dir(g), g.config);
  }
  const Population pop = tb.population();
  const SideData& side = pop.side(parse_side(o.side));
  const Dataset* pool = nullptr;
  const QueryKind kind = parse_query_kind(o.split);
  if (kind.tag == QueryKind::Tag::Real) {
    pool = &side.real;
  } else if (kind.tag == QueryKind::Tag::Synthetic) {
    auto it = side.synthetic.find(kind.source);
    if (it == side.synthetic.end()) fail(Errc::InvalidConfig, "testbed has no source " + std::to_string(kind.source));
    pool = &it->second;
  } else {
    fail(Errc::KindMismatch, "rasters are drawn from 'real' or 'synthetic[:id]'");
  }
  const std::uint64_t seed = g.seed.value_or(derive_seed(tb.seed(), 6));
  manifest.config = json{{"plots", to_json(cfg)}, {"side", o.side}, {"split", o.split}, {"count", o.count}};
  manifest.seeds = json{{"rasters", seed}};

  ensure_dir(g.out);
  const auto rasters = make_rasters(*pool, pop.config.class_count, o.count, cfg, seed);
  std::string tag = o.side + "-" + o.split;
  std::replace(tag.begin(), tag.end(), ':', '-');
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    char name[96];
    std::snprintf(name, sizeof name, "%s-%04zu", tag.c_str(), i);
    save_pgm(rasters[i], g.out / (std::string(name) + ".pgm"));
    manifest.add_output(manifest_dir(g), g.out / (std::string(name) + ".pgm"));
    if (o.png) {
      save_png(rasters[i], g.out / (std::string(name) + ".png"));
      manifest.add_output(manifest_dir(g), g.out / (std::string(name) + ".png"));
    }
  }
  manifest.timings["rasters"] = clock.lap();
  manifest.save(manifest_path(g, "testbed-rasters"));
  out << rasters.size() << " rasters -> " << g.out.string() << "\n";
}

struct EvaluateOptions {
  std::string sweep;
  std::string name = "run";
  bool generator = false;
};

void cmd_testbed_evaluate(const Globals& g, const EvaluateOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "testbed evaluate";
  const auto cfg_json = g.config_json();
  if (cfg_json) manifest.add_input(manifest_dir(g), g.config);

  std::string parameter;
  std::vector<double> values = {0.0};
  if (!o.sweep.empty()) {
    const auto eq = o.sweep.find('=');
    if (eq == std::string::npos) fail(Errc::ConfigError, "sweep must look like name=v1,v2,...");
    parameter = o.sweep.substr(0, eq);
    values = parse_values(o.sweep.substr(eq + 1));
  }
  const auto run_name = [&](double v) { return parameter.empty() ? o.name : o.name + "-" + parameter + "-" + value_tag(v); };
  ensure_dir(g.out);

  for (double v : values) {
    RunRecord record;
    record.name = run_name(v);
    record.parameter = parameter;
    record.value = parameter.empty() ? 0.0 : v;
    std::map<std::string, EvalSummary> summaries;
    if (o.generator) {
      auto cfg = cfg_json ? generator_experiment_config_from_json(*cfg_json) : GeneratorExperimentConfig{};
      if (g.seed) cfg.seed = *g.seed;
      if (parameter == "budget") cfg.budget = static_cast<int>(v);
      else if (parameter == "rate") cfg.fleet.synthetic_rate = v;
      else if (!parameter.empty()) fail(Errc::ConfigError, "generator sweeps support budget and rate, not '" + parameter + "'");
      record.kind = "generator";
      record.config = to_json(cfg);
      summaries[to_string(cfg.metric)] = run_generator_experiment(cfg);
    } else {
      auto cfg = cfg_json ? experiment_config_from_json(*cfg_json) : ExperimentConfig{};
      if (g.seed) cfg.seed = *g.seed;
      if (g.threads) cfg.threads = g.threads;
      if (parameter == "delta") cfg.population.synthetic_sharpness = v;
      else if (parameter == "budget") cfg.budget = static_cast<int>(v);
      else if (parameter == "references") cfg.metric_references = static_cast<int>(v);
      else if (parameter == "proportion") cfg.fleet.proportion = v;
      else if (!parameter.empty()) fail(Errc::ConfigError, "unknown sweep parameter '" + parameter + "'");
      record.kind = "classifier";
      record.config = to_json(cfg);
      summaries = run_experiment(cfg).methods;
    }
    json methods = json::object();
    for (const auto& [m, s] : summaries) methods[m] = summary_json(s);
    record.result = json{{"methods", methods}};
    save_run(g.out, record);
    manifest.add_output(manifest_dir(g), g.out / "runs" / (record.name + ".json"));
    manifest.timings[record.name] = clock.lap();
    print_summary(out, record.name, summaries);
  }
  manifest.config = cfg_json.value_or(json::object());
  manifest.seeds = json{{"base", g.seed ? json(*g.seed) : json(nullptr)}};
  manifest.save(manifest_path(g, "testbed-evaluate"));
}

struct FleetOptions {
  fs::path testbed;
  std::string side = "reference";
  int count = 20;
  std::optional<std::string> scenario;
  std::optional<double> proportion;
};

void cmd_fleet_train(const Globals& g, const FleetOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "fleet train";
  const Testbed tb = Testbed::open(o.testbed);
  FleetSpec spec = fleet_spec_from_json(tb.info.at("fleet_spec"));
  if (auto j = g.config_json()) {
    spec = fleet_spec_from_json(*j);
    manifest.add_input(manifest_dir(g), g.config);
  }
  if (o.scenario) spec.kind = parse_scenario_kind(*o.scenario);
  if (o.proportion) spec.proportion = *o.proportion;
  const Side side = parse_side(o.side);
  const std::uint64_t seed = g.seed.value_or(derive_seed(tb.seed(), side == Side::Reference ? 2 : 3));
  manifest.config = json{{"fleet", to_json(spec)}, {"side", o.side}, {"count", o.count}};
  manifest.seeds = json{{"fleet", seed}};

  const Population pop = tb.population();
  manifest.add_input(manifest_dir(g), tb.dir / "testbed.json");
  manifest.timings["population"] = clock.lap();
  bool reused = false;
  const auto fleet = ModelStore(g.store_root()).fleet(pop, spec, o.count, side, seed, g.threads, &reused);
  manifest.timings["fleet"] = clock.lap();
  record_fleet(manifest, manifest_dir(g), fleet);
  manifest.save(manifest_path(g, "fleet-train"));
  out << "fleet: " << fleet.file.string() << "\n";
  out << fleet.members.size() << " members" << (reused ? " (cached)" : "") << "\n";
}

struct ThresholdOptions {
  std::optional<fs::path> testbed;
  std::string fleet = "reference";
  std::string metric = "confidence";
  std::string queries = "synthetic";
  std::string query_kind = "real";
  int budget = 200;
  fs::path output;
};

void cmd_threshold_fit(const Globals& g, const ThresholdOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "threshold fit";
  std::optional<Testbed> tb;
  if (o.testbed) tb = Testbed::open(*o.testbed);
  const FleetManifest fm = tb ? tb->fleet(o.fleet) : FleetManifest::load(o.fleet);
  const LoadedFleet fleet = fm.load_models();
  manifest.add_input(manifest_dir(g), fm.file);
  const MetricId metric = parse_metric(o.metric);
  const QuerySet q = load_queries(tb, o.queries, o.query_kind, o.budget, manifest, manifest_dir(g));
  const FittedThreshold t = calibrate_classifier_threshold(fleet.with_label(1), fleet.with_label(0), q, metric);
  manifest.timings["fit"] = clock.lap();

  ensure_dir(g.out);
  const fs::path path = o.output.empty() ? g.out / "threshold.json" : o.output;
  save_threshold(t, path);
  manifest.config = json{{"metric", o.metric}, {"queries", to_string(q.kind)}, {"budget", o.budget}, {"fleet", fm.key}};
  manifest.add_output(manifest_dir(g), path);
  manifest.save(manifest_path(g, "threshold-fit"));
  char line[200];
  std::snprintf(line, sizeof line, "tau %.6g (%s), reference accuracy %.3f\n", t.tau, to_string(t.direction).c_str(),
                t.reference_accuracy);
  out << line << "threshold: " << path.string() << "\n";
}

struct MetricAuditOptions {
  std::optional<fs::path> testbed;
  fs::path threshold;
  std::string targets = "target";
  std::optional<std::string> metric;
  std::string queries = "synthetic";
  std::string query_kind = "real";
  int budget = 200;
};

void write_verdicts(const Globals& g, RunManifest& manifest, const std::string& command, const std::string& file,
                  const std::vector<AuditVerdict>& verdicts, std::ostream& out) {
  ensure_dir(g.out);
  const fs::path path = g.out / file;
  save_verdict_report(verdicts, path);
  manifest.add_output(manifest_dir(g), path);
  manifest.save(manifest_path(g, command));
  int synthetic = 0;
  for (const auto& v : verdicts) synthetic += v.label == 1;
  out << verdicts.size() << " verdicts (" << synthetic << " synthetic) -> " << path.string() << "\n";
}

void cmd_audit_metric(const Globals& g, const MetricAuditOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "audit metric";
  if (!fs::exists(o.threshold)) fail(Errc::MissingArtifact, "threshold not found: " + o.threshold.string());
  const FittedThreshold t = load_threshold(o.threshold);
  manifest.add_input(manifest_dir(g), o.threshold);
  std::optional<Testbed> tb;
  if (o.testbed) tb = Testbed::open(*o.testbed);
  const FleetManifest fm = tb ? tb->fleet(o.targets) : FleetManifest::load(o.targets);
  const LoadedFleet targets = fm.load_models();
  manifest.add_input(manifest_dir(g), fm.file);
  const MetricId metric = o.metric ? parse_metric(*o.metric) : t.metric;
  const QuerySet q = load_queries(tb, o.queries, o.query_kind, o.budget, manifest, manifest_dir(g));
  const std::uint64_t seed = g.seed.value_or(0);

  std::vector<AuditVerdict> verdicts;
  for (std::size_t i = 0; i < targets.models.size(); ++i) {
    auto v = audit_classifier(BlackBoxClassifier(targets.models[i]), q, metric, t, seed);
    v.target = targets.ids[i];
    verdicts.push_back(std::move(v));
  }
  manifest.timings["audit"] = clock.lap();
  manifest.config = json{{"metric", to_string(metric)}, {"queries", to_string(q.kind)}, {"budget", o.budget}};
  manifest.seeds = json{{"verdicts", seed}};
  write_verdicts(g, manifest, "audit-metric", "verdicts-metric.json", verdicts, out);
}

struct TuneAuditOptions {
  std::optional<fs::path> testbed;
  std::string fleet = "reference";
  std::string targets = "target";
  bool black_box = false;
  std::optional<fs::path> bundle;
  std::optional<fs::path> save_bundle;
  std::optional<int> epochs;
  std::optional<int> query_count;
};

void cmd_audit_tune(const Globals& g, const TuneAuditOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "audit tune";
  std::optional<Testbed> tb;
  if (o.testbed) tb = Testbed::open(*o.testbed);
  const FleetManifest tm = tb ? tb->fleet(o.targets) : FleetManifest::load(o.targets);
  const LoadedFleet targets = tm.load_models();
  manifest.add_input(manifest_dir(g), tm.file);
  std::vector<ClassifierPtr> handles;
  for (const auto& m : targets.models)
    handles.push_back(o.black_box ? ClassifierPtr(std::make_shared<BlackBoxClassifier>(m)) : ClassifierPtr(m));
  for (std::size_t i = 0; i < handles.size(); ++i)
    if (handles[i]->access() != Access::WhiteBox)
      fail(Errc::BlackBoxTarget, "target " + targets.ids[i] + " is black-box; tuning-based auditing needs white-box access");

  TuningConfig tc;
  if (auto j = g.config_json()) {
    tc = tuning_config_from_json(*j);
    manifest.add_input(manifest_dir(g), g.config);
  }
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.query_count) tc.query_count = *o.query_count;
  tc.seed = g.seed.value_or(0);

  TunedAuditBundle bundle;
  if (o.bundle) {
    if (!fs::exists(*o.bundle)) fail(Errc::MissingArtifact, "tuned audit bundle not found: " + o.bundle->string());
    bundle = TunedAuditBundle::load(*o.bundle);
    manifest.add_input(manifest_dir(g), *o.bundle);
  } else {
    const FleetManifest fm = tb ? tb->fleet(o.fleet) : FleetManifest::load(o.fleet);
    const LoadedFleet refs = fm.load_models();
    manifest.add_input(manifest_dir(g), fm.file);
    const auto trained = train_tuned_audit(refs.as_fleet(), 2, tc);
    bundle.queries = trained.queries;
    bundle.meta = trained.meta;
    bundle.class_count = trained.class_count;
    bundle.label_count = trained.label_count;
    bundle.seed = tc.seed;
    bundle.manifest = json{{"fleet", fm.key}, {"tuning", to_json(tc)}, {"final_loss", trained.history.back()}};
    manifest.timings["train"] = clock.lap();
    if (o.save_bundle) {
      bundle.save(*o.save_bundle);
      manifest.add_output(manifest_dir(g), *o.save_bundle);
    }
  }

  std::vector<AuditVerdict> verdicts;
  for (std::size_t i = 0; i < handles.size(); ++i) {
    auto v = infer_tuned(*handles[i], bundle.queries, bundle.meta, tc.seed);
    v.target = targets.ids[i];
    verdicts.push_back(std::move(v));
  }
  manifest.timings["audit"] = clock.lap();
  manifest.config = json{{"tuning", to_json(tc)}};
  manifest.seeds = json{{"tuning", tc.seed}};
  write_verdicts(g, manifest, "audit-tune", "verdicts-tune.json", verdicts, out);
}

struct PlotAuditOptions {
  fs::path rasters;
  std::optional<fs::path> model;
  std::optional<fs::path> synthetic_refs;
  std::optional<fs::path> real_refs;
  std::optional<fs::path> save_model;
  std::optional<int> epochs;
  std::optional<double> lr;
};

void cmd_audit_plot(const Globals& g, const PlotAuditOptions& o, std::ostream& out) {
  Stopwatch clock;
  RunManifest manifest;
  manifest.command = "audit plot";
  const auto files = pgm_files(o.rasters);
  PlotTrainConfig pc;
  if (auto j = g.config_json()) {
    pc = plot_train_config_from_json(*j);
    manifest.add_input(manifest_dir(g), g.config);
  }
  if (o.epochs) pc.epochs = *o.epochs;
  if (o.lr) pc.learning_rate = *o.lr;
  pc.seed = g.seed.value_or(0);

  PlotClassifier model;
  if (o.model) {
    if (!fs::exists(*o.model)) fail(Errc::MissingArtifact, "plot classifier not found: " + o.model->string());
    model = load_plot_classifier(*o.model);
    manifest.add_input(manifest_dir(g), *o.model);
  } else {
    if (!o.synthetic_refs || !o.real_refs)
      fail(Errc::MissingArtifact, "audit plot needs --model or both --synthetic-refs and --real-refs");
    const auto syn = load_rasters(*o.synthetic_refs), real = load_rasters(*o.real_refs);
    const auto trained = train_plot_classifier(syn, real, pc);
    model = trained.model;
    manifest.timings["train"] = clock.lap();
    if (o.save_model) {
      save_plot_classifier(model, json{{"training", to_json(pc)}, {"synthetic", syn.size()}, {"real", real.size()}}, *o.save_model);
      manifest.add_output(manifest_dir(g), *o.save_model);
    }
  }

  std::vector<AuditVerdict> verdicts;
  for (const auto& f : files) {
    auto v = audit_plot(load_pgm(f), model, pc.seed);
    v.target = f.filename().string();
    verdicts.push_back(std::move(v));
    manifest.add_input(manifest_dir(g), f);
  }
  manifest.timings["audit"] = clock.lap();
  manifest.config = json{{"training", to_json(pc)}};
  manifest.seeds = json{{"training", pc.seed}};
  write_verdicts(g, manifest, "audit-plot", "verdicts-plot.json", verdicts, out);
}

void cmd_report(const fs::path& dir, std::ostream& out) {
  const auto outcome = write_report(dir);
  out << outcome.summary;
  for (const auto& f : outcome.files) out << "wrote " << f.string() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit classifiers, generators and plots for synthetic-data provenance."};
  app.name("synaudit");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--store", g.store, "Model store root (default <out>/store)");
  app.add_option("--threads", g.threads, "Worker threads for fleet training (0 = all cores)");

  std::function<void()> action;

  auto* testbed = app.add_subcommand("testbed", "Build and evaluate desk-scale testbeds")->require_subcommand(1);
  BuildOptions build_opt;
  auto* build = testbed->add_subcommand("build", "Generate a population, query pools and fleets");
  build->add_option("--references", build_opt.references, "Reference fleet size (default from config, 20)");
  build->add_option("--targets", build_opt.targets, "Target fleet size (default from config, 100)");
  build->callback([&] { action = [&] { cmd_testbed_build(g, build_opt, out); }; });

  RasterOptions raster_opt;
  auto* rasters = testbed->add_subcommand("rasters", "Render scatter-plot rasters from a testbed split");
  rasters->add_option("--testbed", raster_opt.testbed, "Testbed directory")->required();
  rasters->add_option("--side", raster_opt.side, "target or reference")->capture_default_str();
  rasters->add_option("--split", raster_opt.split, "real or synthetic[:id]")->capture_default_str();
  rasters->add_option("--count", raster_opt.count, "Number of rasters")->capture_default_str();
  rasters->add_flag("--png", raster_opt.png, "Also write PNG copies");
  rasters->callback([&] { action = [&] { cmd_testbed_rasters(g, raster_opt, out); }; });

  EvaluateOptions eval_opt;
  auto* evaluate = testbed->add_subcommand("evaluate", "Run the five-seed evaluation protocol");
  evaluate->add_option("--sweep", eval_opt.sweep, "name=v1,v2,... over delta, budget, references, proportion (or budget, rate)");
  evaluate->add_option("--name", eval_opt.name, "Run name prefix")->capture_default_str();
  evaluate->add_flag("--generator", eval_opt.generator, "Evaluate generator auditing instead of classifiers");
  evaluate->callback([&] { action = [&] { cmd_testbed_evaluate(g, eval_opt, out); }; });

  auto* fleet = app.add_subcommand("fleet", "Train fleets into the model store")->require_subcommand(1);
  FleetOptions fleet_opt;
  auto* train = fleet->add_subcommand("train", "Train a label-balanced fleet");
  train->add_option("--testbed", fleet_opt.testbed, "Testbed directory")->required();
  train->add_option("--side", fleet_opt.side, "target or reference")->capture_default_str();
  train->add_option("--count", fleet_opt.count, "Fleet size (even)")->capture_default_str();
  train->add_option("--scenario", fleet_opt.scenario, "S1, S2 or S3");
  train->add_option("--proportion", fleet_opt.proportion, "Fixed S2 synthetic proportion");
  train->callback([&] { action = [&] { cmd_fleet_train(g, fleet_opt, out); }; });

  auto* threshold = app.add_subcommand("threshold", "Fit metric thresholds")->require_subcommand(1);
  ThresholdOptions th_opt;
  auto* fit = threshold->add_subcommand("fit", "Fit a threshold on a reference fleet");
  fit->add_option("--testbed", th_opt.testbed, "Testbed directory");
  fit->add_option("--fleet", th_opt.fleet, "Fleet manifest path or testbed fleet name")->capture_default_str();
  fit->add_option("--metric", th_opt.metric, "confidence, entropy or accuracy")->capture_default_str();
  fit->add_option("--queries", th_opt.queries, "Query kind or JSON-lines file")->capture_default_str();
  fit->add_option("--query-kind", th_opt.query_kind, "Kind of a query file")->capture_default_str();
  fit->add_option("--budget", th_opt.budget, "Query budget")->capture_default_str();
  fit->add_option("--output", th_opt.output, "Threshold file (default <out>/threshold.json)");
  fit->callback([&] { action = [&] { cmd_threshold_fit(g, th_opt, out); }; });

  auto* audit = app.add_subcommand("audit", "Audit targets")->require_subcommand(1);
  MetricAuditOptions metric_opt;
  auto* metric = audit->add_subcommand("metric", "Threshold audit of black-box classifiers");
  metric->add_option("--testbed", metric_opt.testbed, "Testbed directory");
  metric->add_option("--threshold", metric_opt.threshold, "Fitted threshold file")->required();
  metric->add_option("--targets", metric_opt.targets, "Fleet manifest path or testbed fleet name")->capture_default_str();
  metric->add_option("--metric", metric_opt.metric, "Metric (default: the threshold's)");
  metric->add_option("--queries", metric_opt.queries, "Query kind or JSON-lines file")->capture_default_str();
  metric->add_option("--query-kind", metric_opt.query_kind, "Kind of a query file")->capture_default_str();
  metric->add_option("--budget", metric_opt.budget, "Query budget")->capture_default_str();
  metric->callback([&] { action = [&] { cmd_audit_metric(g, metric_opt, out); }; });

  TuneAuditOptions tune_opt;
  auto* tune = audit->add_subcommand("tune", "Tuning-based audit of white-box classifiers");
  tune->add_option("--testbed", tune_opt.testbed, "Testbed directory");
  tune->add_option("--fleet", tune_opt.fleet, "Reference fleet manifest or name")->capture_default_str();
  tune->add_option("--targets", tune_opt.targets, "Target fleet manifest or name")->capture_default_str();
  tune->add_flag("--black-box", tune_opt.black_box, "Expose targets through prediction only");
  tune->add_option("--bundle", tune_opt.bundle, "Use a saved tuned audit instead of training");
  tune->add_option("--save-bundle", tune_opt.save_bundle, "Save the trained audit");
  tune->add_option("--epochs", tune_opt.epochs, "Training epochs");
  tune->add_option("--query-count", tune_opt.query_count, "Number of tuned queries");
  tune->callback([&] { action = [&] { cmd_audit_tune(g, tune_opt, out); }; });

  PlotAuditOptions plot_opt;
  auto* plot = audit->add_subcommand("plot", "Classify scatter-plot rasters");
  plot->add_option("--rasters", plot_opt.rasters, "Directory of PGM rasters to audit")->required();
  plot->add_option("--model", plot_opt.model, "Saved plot classifier");
  plot->add_option("--synthetic-refs", plot_opt.synthetic_refs, "Reference synthetic rasters");
  plot->add_option("--real-refs", plot_opt.real_refs, "Reference real rasters");
  plot->add_option("--save-model", plot_opt.save_model, "Save the trained classifier");
  plot->add_option("--epochs", plot_opt.epochs, "Training epochs");
  plot->add_option("--lr", plot_opt.lr, "Learning rate");
  plot->callback([&] { action = [&] { cmd_audit_plot(g, plot_opt, out); }; });

  std::optional<fs::path> report_dir;
  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("dir", report_dir, "Run directory (default --out)");
  report->callback([&] { action = [&] { cmd_report(report_dir.value_or(g.out), out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const AuditError& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace synaudit::cli
