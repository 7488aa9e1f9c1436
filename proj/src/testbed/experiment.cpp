#include "synaudit/testbed/experiment.hpp"

#include "synaudit/error.hpp"
#include "synaudit/nn.hpp"
#include "synaudit/threshold.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace synaudit::testbed {

using nlohmann::json;

const std::vector<std::string>& experiment_methods() {
  static const std::vector<std::string> names = {"metric_syn", "metric_real", "tune", "flat_params", "plot"};
  return names;
}

void ExperimentConfig::validate() const {
  population.validate();
  const auto bad = [](const std::string& what) { fail(Errc::InvalidConfig, what); };
  if (metric_references < 2 || metric_references % 2) bad("metric_references must be even and positive");
  if (tuning_references < 2 || tuning_references % 2) bad("tuning_references must be even and positive");
  if (targets < 2 || targets % 2) bad("targets must be even and positive");
  if (budget < 1) bad("budget must be positive");
  if (runs < 1) bad("runs must be positive");
  if (plot_references < 1 || plot_targets < 1) bad("plot counts must be positive");
  if (!is_classifier_metric(synthetic_metric) || !is_classifier_metric(real_metric)) bad("metrics must be classifier metrics");
  if (methods.empty()) bad("no methods selected");
  for (const auto& m : methods)
    if (std::find(experiment_methods().begin(), experiment_methods().end(), m) == experiment_methods().end())
      bad("unknown method '" + m + "'");
}

namespace {

void reject_unknown(const json& j, const json& defaults, const std::string& where) {
  if (!j.is_object()) fail(Errc::ConfigError, where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) fail(Errc::ConfigError, "unknown " + where + " key '" + key + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> half_and_half(int per_label) {
  std::vector<int> labels(static_cast<std::size_t>(2 * per_label), 0);
  std::fill(labels.begin() + per_label, labels.end(), 1);
  return labels;
}

// Fixed streams under each run seed.
enum Stream : std::uint64_t { kPopulation = 1, kReferences, kTargets, kQueries, kTuning, kFlat, kPlotRef, kPlotTarget, kPlotTrain };

struct RunContext {
  Population pop;
  ReferenceBundle references;
  ReferenceBundle targets;
};

std::vector<int> flat_params_predict(const ReferenceBundle& refs, const ReferenceBundle& targets,
                                     const TuningConfig& tc, std::uint64_t seed) {
  const auto k = static_cast<Eigen::Index>(refs.members.size());
  const Eigen::Index width = refs.members.front().model->parameters().size();
  Eigen::MatrixXd x(k, width);
  for (Eigen::Index i = 0; i < k; ++i) x.row(i) = refs.members[static_cast<std::size_t>(i)].model->parameters().transpose();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(k)).sqrt();
  sd = (sd.array() < 1e-12).select(1.0, sd);
  const auto standardize = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return ((p.transpose() - mean).array() / sd.array()).transpose();
  };
  x = (x.rowwise() - mean).array().rowwise() / sd.array();

  Rng rng(seed);
  MetaClassifier meta = MetaClassifier::random(width, 2, tc.hidden, rng);
  Adam opt(meta.parameters().size(), {tc.learning_rate});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i : order) {
      const auto g = meta.backward(x.row(i).transpose(), refs.members[static_cast<std::size_t>(i)].label);
      opt.step(meta.parameters(), g.params);
    }
  }
  std::vector<int> out;
  for (const auto& m : targets.members) {
    const Eigen::VectorXd p = meta.forward(standardize(m.model->parameters()));
    out.push_back(p[1] > p[0] ? 1 : 0);
  }
  return out;
}

}  // namespace

json to_json(const TuningConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"epochs", t.epochs},
              {"query_count", t.query_count},
              {"hidden", t.hidden},
              {"phi_init_scale", t.phi_init_scale}};
}

TuningConfig tuning_config_from_json(const json& j) {
  TuningConfig t;
  reject_unknown(j, to_json(t), "tuning");
  try {
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.epochs = j.value("epochs", t.epochs);
    t.query_count = j.value("query_count", t.query_count);
    t.hidden = j.value("hidden", t.hidden);
    t.phi_init_scale = j.value("phi_init_scale", t.phi_init_scale);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("tuning config: ") + e.what());
  }
  return t;
}

json to_json(const PlotTrainConfig& p) {
  return json{{"learning_rate", p.learning_rate}, {"epochs", p.epochs}, {"batch_size", p.batch_size}};
}

PlotTrainConfig plot_train_config_from_json(const json& j) {
  PlotTrainConfig p;
  reject_unknown(j, to_json(p), "plot_training");
  try {
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.epochs = j.value("epochs", p.epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("plot training config: ") + e.what());
  }
  return p;
}

json to_json(const ExperimentConfig& c) {
  return json{{"population", to_json(c.population)},
              {"fleet", to_json(c.fleet)},
              {"metric_references", c.metric_references},
              {"tuning_references", c.tuning_references},
              {"targets", c.targets},
              {"budget", c.budget},
              {"synthetic_metric", to_string(c.synthetic_metric)},
              {"real_metric", to_string(c.real_metric)},
              {"tuning", to_json(c.tuning)},
              {"plots", to_json(c.plots)},
              {"plot_references", c.plot_references},
              {"plot_targets", c.plot_targets},
              {"plot_training", to_json(c.plot_training)},
              {"runs", c.runs},
              {"seed", c.seed},
              {"methods", c.methods},
              {"threads", c.threads}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j, to_json(c), "experiment");
  try {
    if (j.contains("population")) c.population = population_config_from_json(j["population"]);
    if (j.contains("fleet")) c.fleet = fleet_spec_from_json(j["fleet"]);
    if (j.contains("tuning")) c.tuning = tuning_config_from_json(j["tuning"]);
    if (j.contains("plots")) c.plots = plot_set_config_from_json(j["plots"]);
    if (j.contains("plot_training")) c.plot_training = plot_train_config_from_json(j["plot_training"]);
    c.metric_references = j.value("metric_references", c.metric_references);
    c.tuning_references = j.value("tuning_references", c.tuning_references);
    c.targets = j.value("targets", c.targets);
    c.budget = j.value("budget", c.budget);
    if (j.contains("synthetic_metric")) c.synthetic_metric = parse_metric(j["synthetic_metric"].get<std::string>());
    if (j.contains("real_metric")) c.real_metric = parse_metric(j["real_metric"].get<std::string>());
    c.plot_references = j.value("plot_references", c.plot_references);
    c.plot_targets = j.value("plot_targets", c.plot_targets);
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
    c.methods = j.value("methods", c.methods);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("experiment config: ") + e.what());
  } catch (const AuditError& e) {
    if (e.code() == Errc::SchemaError) fail(Errc::ConfigError, e.what());
    throw;
  }
  c.validate();
  return c;
}

json to_json(const ExperimentResult& r) {
  json methods = json::object();
  for (const auto& [name, s] : r.methods) {
    methods[name] = json{{"mean", s.mean}, {"std", s.std}, {"accuracies", s.accuracies}};
    if (auto it = r.seconds.find(name); it != r.seconds.end()) methods[name]["seconds"] = it->second;
  }
  return json{{"methods", methods}, {"fleet_seconds", r.fleet_seconds}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto wants = [&](const char* m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
  const bool need_tuning_fleet = wants("tune") || wants("flat_params");
  const bool need_fleets = need_tuning_fleet || wants("metric_syn") || wants("metric_real");
  const int reference_count = need_tuning_fleet ? std::max(cfg.tuning_references, cfg.metric_references) : cfg.metric_references;
  const int source = cfg.fleet.sources.front();

  ExperimentResult result;
  std::map<std::uint64_t, std::shared_ptr<RunContext>> cache;
  const auto context = [&](std::uint64_t run_seed) -> const RunContext& {
    auto& slot = cache[run_seed];
    if (!slot) {
      const auto t0 = std::chrono::steady_clock::now();
      slot = std::make_shared<RunContext>();
      PopulationConfig pc = cfg.population;
      pc.seed = derive_seed(run_seed, kPopulation);
      slot->pop = gen_population(pc);
      if (need_fleets) {
        slot->references = train_fleet(slot->pop, cfg.fleet, reference_count, Side::Reference, derive_seed(run_seed, kReferences), cfg.threads);
        slot->targets = train_fleet(slot->pop, cfg.fleet, cfg.targets, Side::Target, derive_seed(run_seed, kTargets), cfg.threads);
      }
      result.fleet_seconds += seconds_since(t0);
    }
    return *slot;
  };

  const auto metric_run = [&](bool synthetic) {
    return [&, synthetic](std::uint64_t run_seed) {
      const RunContext& ctx = context(run_seed);
      const auto qseed = derive_seed(run_seed, kQueries);
      QuerySet q;
      if (!synthetic) q = real_queries(ctx.pop, cfg.budget, qseed);
      else if (cfg.fleet.kind == ScenarioKind::S3) q = mixed_queries(ctx.pop, cfg.budget, qseed);
      else q = synthetic_queries(ctx.pop, source, cfg.budget, qseed);
      const MetricId metric = synthetic ? cfg.synthetic_metric : cfg.real_metric;
      const auto refs = ctx.references.balanced_prefix(cfg.metric_references / 2);
      const auto t = calibrate_classifier_threshold(refs.models_with_label(1), refs.models_with_label(0), q, metric);
      std::vector<int> out;
      for (const auto& m : ctx.targets.members) out.push_back(audit_classifier(BlackBoxClassifier(m.model), q, metric, t).label);
      return out;
    };
  };

  const AuditRun tune_run = [&](std::uint64_t run_seed) {
    const RunContext& ctx = context(run_seed);
    TuningConfig tc = cfg.tuning;
    tc.seed = derive_seed(run_seed, kTuning);
    const auto trained = train_tuned_audit(ctx.references.balanced_prefix(cfg.tuning_references / 2).as_fleet(), 2, tc);
    std::vector<int> out;
    for (const auto& m : ctx.targets.members) out.push_back(infer_tuned(*m.model, trained.queries, trained.meta).label);
    return out;
  };

  const AuditRun flat_run = [&](std::uint64_t run_seed) {
    const RunContext& ctx = context(run_seed);
    return flat_params_predict(ctx.references.balanced_prefix(cfg.tuning_references / 2), ctx.targets, cfg.tuning,
                               derive_seed(run_seed, kFlat));
  };

  // Real rasters first, matching half_and_half.
  const AuditRun plot_run = [&](std::uint64_t run_seed) {
    const RunContext& ctx = context(run_seed);
    const int c = ctx.pop.config.class_count;
    const auto ref_seed = derive_seed(run_seed, kPlotRef), tgt_seed = derive_seed(run_seed, kPlotTarget);
    const auto ref_syn = make_rasters(ctx.pop.reference.synthetic.at(source), c, cfg.plot_references, cfg.plots, derive_seed(ref_seed, 1));
    const auto ref_real = make_rasters(ctx.pop.reference.real, c, cfg.plot_references, cfg.plots, derive_seed(ref_seed, 0));
    PlotTrainConfig pt = cfg.plot_training;
    pt.seed = derive_seed(run_seed, kPlotTrain);
    const auto model = train_plot_classifier(ref_syn, ref_real, pt).model;
    std::vector<int> out;
    for (const auto& r : make_rasters(ctx.pop.target.real, c, cfg.plot_targets, cfg.plots, derive_seed(tgt_seed, 0)))
      out.push_back(audit_plot(r, model).label);
    for (const auto& r : make_rasters(ctx.pop.target.synthetic.at(source), c, cfg.plot_targets, cfg.plots, derive_seed(tgt_seed, 1)))
      out.push_back(audit_plot(r, model).label);
    return out;
  };

  for (const auto& name : cfg.methods) {
    AuditRun run;
    std::vector<int> labels = half_and_half(cfg.targets / 2);
    if (name == "metric_syn") run = metric_run(true);
    else if (name == "metric_real") run = metric_run(false);
    else if (name == "tune") run = tune_run;
    else if (name == "flat_params") run = flat_run;
    else {
      run = plot_run;
      labels = half_and_half(cfg.plot_targets);
    }
    const double fleet_before = result.fleet_seconds;
    const auto t0 = std::chrono::steady_clock::now();
    result.methods[name] = evaluate_auditor(run, labels, cfg.runs, cfg.seed);
    result.seconds[name] = seconds_since(t0) - (result.fleet_seconds - fleet_before);
  }
  return result;
}

json to_json(const GeneratorExperimentConfig& c) {
  return json{{"vocab_size", c.corpus.vocab_size},
              {"length", c.corpus.length},
              {"corpus_size", c.corpus.size},
              {"real_rate", c.fleet.real_rate},
              {"synthetic_rate", c.fleet.synthetic_rate},
              {"scenario", to_string(c.fleet.kind)},
              {"references", c.references},
              {"targets", c.targets},
              {"budget", c.budget},
              {"metric", to_string(c.metric)},
              {"embedding_dim", c.embedding_dim},
              {"runs", c.runs},
              {"seed", c.seed}};
}

GeneratorExperimentConfig generator_experiment_config_from_json(const json& j) {
  GeneratorExperimentConfig c;
  reject_unknown(j, to_json(c), "generator experiment");
  try {
    c.corpus.vocab_size = j.value("vocab_size", c.corpus.vocab_size);
    c.corpus.length = j.value("length", c.corpus.length);
    c.corpus.size = j.value("corpus_size", c.corpus.size);
    c.fleet.real_rate = j.value("real_rate", c.fleet.real_rate);
    c.fleet.synthetic_rate = j.value("synthetic_rate", c.fleet.synthetic_rate);
    c.fleet.kind = parse_scenario_kind(j.value("scenario", std::string("S1")));
    c.references = j.value("references", c.references);
    c.targets = j.value("targets", c.targets);
    c.budget = j.value("budget", c.budget);
    if (j.contains("metric")) c.metric = parse_metric(j["metric"].get<std::string>());
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("generator experiment config: ") + e.what());
  } catch (const AuditError& e) {
    if (e.code() == Errc::SchemaError) fail(Errc::ConfigError, e.what());
    throw;
  }
  return c;
}

EvalSummary run_generator_experiment(const GeneratorExperimentConfig& cfg) {
  if (is_classifier_metric(cfg.metric)) fail(Errc::InvalidConfig, "generator experiment needs a sequence metric");
  if (cfg.targets < 2 || cfg.targets % 2) fail(Errc::InvalidConfig, "targets must be even and positive");
  const AuditRun run = [&](std::uint64_t run_seed) {
    TextCorpusConfig cc = cfg.corpus;
    cc.seed = derive_seed(run_seed, 1);
    const auto corpus = make_text_corpus(cc);
    const auto table = random_embedding_table(corpus.vocab, cfg.embedding_dim, derive_seed(run_seed, 2));
    const auto refs = train_generator_fleet(corpus, cfg.fleet, cfg.references, derive_seed(run_seed, 3));
    const auto targets = train_generator_fleet(corpus, cfg.fleet, cfg.targets, derive_seed(run_seed, 4));
    const auto q = corpus_queries(corpus, cfg.budget, derive_seed(run_seed, 5));
    const auto t = calibrate_generator_threshold(refs.with_label(1), refs.with_label(0), q, cfg.metric, &table);
    std::vector<int> out;
    for (const auto& m : targets.members) out.push_back(audit_generator(*m.generator, q, cfg.metric, t, 0, &table).label);
    return out;
  };
  return evaluate_auditor(run, half_and_half(cfg.targets / 2), cfg.runs, cfg.seed);
}

}  // namespace synaudit::testbed
