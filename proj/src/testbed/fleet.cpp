#include "synaudit/testbed/fleet.hpp"

#include "synaudit/error.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

namespace synaudit::testbed {

using nlohmann::json;

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::S1: return "S1";
    case ScenarioKind::S2: return "S2";
    case ScenarioKind::S3: return "S3";
  }
  return "S1";
}

ScenarioKind parse_scenario_kind(const std::string& text) {
  if (text == "S1" || text == "s1") return ScenarioKind::S1;
  if (text == "S2" || text == "s2") return ScenarioKind::S2;
  if (text == "S3" || text == "s3") return ScenarioKind::S3;
  fail(Errc::ConfigError, "unknown scenario '" + text + "'");
}

const std::array<double, 10>& s2_grid() {
  static const std::array<double, 10> grid = [] {
    std::array<double, 10> g{};
    for (int i = 0; i < 10; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 10.0;
    return g;
  }();
  return grid;
}

json to_json(const Scenario& s) {
  json mix = json::object();
  for (const auto& [src, w] : s.source_mix) mix[std::to_string(src)] = w;
  return json{{"kind", to_string(s.kind)}, {"synthetic_proportion", s.synthetic_proportion}, {"source_mix", mix}};
}

Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    s.kind = parse_scenario_kind(j.at("kind").get<std::string>());
    s.synthetic_proportion = j.at("synthetic_proportion").get<double>();
    for (const auto& [key, w] : j.at("source_mix").items()) s.source_mix[std::stoi(key)] = w.get<double>();
    return s;
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("scenario: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(Errc::SchemaError, "scenario: source ids must be integers");
  }
}

namespace {

void check_proportion(double p) {
  if (!(p > 0.0 && p <= 1.0)) fail(Errc::BadProportion, "proportion " + std::to_string(p) + " outside (0, 1]");
}

double snap_to_grid(double p) {
  check_proportion(p);
  for (double g : s2_grid())
    if (std::abs(g - p) < 1e-9) return g;
  fail(Errc::BadProportion, "proportion " + std::to_string(p) + " is not on the 0.1 grid");
}

}  // namespace

Scenario make_scenario(ScenarioKind kind, const ScenarioParams& params, std::uint64_t seed) {
  if (params.sources.empty()) fail(Errc::InvalidConfig, "scenario needs at least one source");
  Scenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::S1:
      if (params.proportion && std::abs(*params.proportion - 1.0) > 1e-12)
        fail(Errc::BadProportion, "S1 trains on synthetic data only");
      s.synthetic_proportion = 1.0;
      s.source_mix[params.sources.front()] = 1.0;
      break;
    case ScenarioKind::S2:
      if (!params.proportion) fail(Errc::BadProportion, "S2 needs a grid proportion");
      s.synthetic_proportion = snap_to_grid(*params.proportion);
      s.source_mix[params.sources.front()] = 1.0;
      break;
    case ScenarioKind::S3: {
      Rng rng(seed);
      s.synthetic_proportion = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
      std::exponential_distribution<double> gamma1(1.0);
      std::vector<double> w(params.sources.size());
      for (auto& v : w) v = gamma1(rng);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (std::size_t i = 0; i < w.size(); ++i) s.source_mix[params.sources[i]] += w[i] / total;
      break;
    }
  }
  return s;
}

json to_json(const FleetSpec& spec) {
  json j{{"scenario", to_string(spec.kind)},
         {"sources", spec.sources},
         {"train_size", spec.train_size},
         {"learning_rate", spec.training.learning_rate},
         {"batch_size", spec.training.batch_size},
         {"min_epochs", spec.training.min_epochs},
         {"max_epochs", spec.training.max_epochs},
         {"target_accuracy", spec.training.target_accuracy}};
  j["proportion"] = spec.proportion ? json(*spec.proportion) : json(nullptr);
  return j;
}

FleetSpec fleet_spec_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::ConfigError, "fleet config must be a JSON object");
  FleetSpec s;
  const json defaults = to_json(s);
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) fail(Errc::ConfigError, "unknown fleet key '" + key + "'");
  try {
    s.kind = parse_scenario_kind(j.value("scenario", std::string("S1")));
    if (j.contains("proportion") && !j["proportion"].is_null()) s.proportion = j["proportion"].get<double>();
    s.sources = j.value("sources", s.sources);
    s.train_size = j.value("train_size", s.train_size);
    s.training.learning_rate = j.value("learning_rate", s.training.learning_rate);
    s.training.batch_size = j.value("batch_size", s.training.batch_size);
    s.training.min_epochs = j.value("min_epochs", s.training.min_epochs);
    s.training.max_epochs = j.value("max_epochs", s.training.max_epochs);
    s.training.target_accuracy = j.value("target_accuracy", s.training.target_accuracy);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("fleet config: ") + e.what());
  }
  return s;
}

std::vector<int> ReferenceBundle::labels() const {
  std::vector<int> out;
  for (const auto& m : members) out.push_back(m.label);
  return out;
}

std::vector<ClassifierPtr> ReferenceBundle::models_with_label(int label) const {
  std::vector<ClassifierPtr> out;
  for (const auto& m : members)
    if (m.label == label) out.push_back(m.model);
  return out;
}

std::vector<FleetMember> ReferenceBundle::as_fleet() const {
  std::vector<FleetMember> out;
  for (const auto& m : members) out.push_back({m.id, m.model, m.label});
  return out;
}

ReferenceBundle ReferenceBundle::balanced_prefix(int per_label) const {
  ReferenceBundle out;
  out.side = side;
  std::map<int, int> taken;
  for (const auto& m : members)
    if (taken[m.label]++ < per_label) out.members.push_back(m);
  for (const auto& [label, n] : taken)
    if (n < per_label) fail(Errc::InsufficientData, "fleet has " + std::to_string(n) + " members with label " + std::to_string(label));
  return out;
}

json member_manifest(const MemberRecord& m) {
  return json{{"id", m.id},
              {"label", m.label},
              {"scenario", to_json(m.scenario)},
              {"seed", m.seed},
              {"epochs", m.epochs},
              {"train_accuracy", m.train_accuracy}};
}

namespace {

// One member's recipe before training.
struct Plan {
  std::string id;
  int label = 0;
  Scenario scenario;
  std::uint64_t seed = 0;
};

std::vector<Eigen::Index> draw_rows(Eigen::Index pool, int count, Rng& rng, const std::string& what) {
  if (count > pool)
    fail(Errc::InsufficientData, what + ": need " + std::to_string(count) + " rows, split has " + std::to_string(pool));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(pool));
  std::iota(rows.begin(), rows.end(), 0);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, pool - 1);
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
  }
  rows.resize(static_cast<std::size_t>(count));
  return rows;
}

// Largest-remainder split of n across the mix weights.
std::map<int, int> allocate(int n, const std::map<int, double>& mix) {
  std::map<int, int> out;
  std::vector<std::pair<double, int>> remainders;
  int used = 0;
  for (const auto& [src, w] : mix) {
    const double exact = n * w;
    out[src] = static_cast<int>(std::floor(exact));
    used += out[src];
    remainders.emplace_back(exact - std::floor(exact), src);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++out[remainders[i % remainders.size()].second];
  return out;
}

MemberRecord realize(const Population& pop, const SideData& data, const Plan& plan, int train_size,
                     const MemberTrainConfig& training) {
  Rng rng(plan.seed);
  const int n_syn = static_cast<int>(std::lround(plan.scenario.synthetic_proportion * train_size));
  const int n_real = train_size - n_syn;

  Eigen::MatrixXd x(train_size, pop.config.feature_dim);
  Eigen::VectorXi y(train_size);
  std::vector<std::uint64_t> ids;
  Eigen::Index row = 0;
  const auto take = [&](const Dataset& pool, int count, const std::string& what) {
    if (count == 0) return;
    const Dataset part = pool.subset(draw_rows(pool.size(), count, rng, what));
    x.middleRows(row, count) = part.x;
    y.segment(row, count) = part.y;
    ids.insert(ids.end(), part.ids.begin(), part.ids.end());
    row += count;
  };
  take(data.real, n_real, plan.id + " real");
  if (n_syn > 0) {
    for (const auto& [src, n] : allocate(n_syn, plan.scenario.source_mix)) {
      auto it = data.synthetic.find(src);
      if (it == data.synthetic.end()) fail(Errc::InvalidConfig, "population has no source " + std::to_string(src));
      take(it->second, n, plan.id + " source " + std::to_string(src));
    }
  }

  auto trained = train_member(pop.encoder, x, y, pop.config.class_count, training, rng);
  MemberRecord rec;
  rec.id = plan.id;
  rec.label = plan.label;
  rec.scenario = plan.scenario;
  rec.seed = plan.seed;
  rec.epochs = trained.epochs;
  rec.train_accuracy = trained.train_accuracy;
  rec.example_ids = std::move(ids);
  rec.model = std::move(trained.model);
  return rec;
}

ReferenceBundle run_plans(const Population& pop, Side side, const std::vector<Plan>& plans, int train_size,
                          const MemberTrainConfig& training, int threads) {
  if (train_size < 1) fail(Errc::InvalidConfig, "train_size must be positive");
  const SideData& data = pop.side(side);
  ReferenceBundle bundle;
  bundle.side = side;
  bundle.members.resize(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++) {
      try {
        bundle.members[i] = realize(pop, data, plans[i], train_size, training);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(plans.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return bundle;
}

std::string member_id(Side side, const char* kind, int index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%s-%03d", side == Side::Target ? "tgt" : "ref", kind, index);
  return buf;
}

}  // namespace

ReferenceBundle train_fleet(const Population& pop, const FleetSpec& spec, int count, Side side, std::uint64_t seed,
                            int threads) {
  if (count < 2 || count % 2 != 0) fail(Errc::InvalidConfig, "fleet size must be even and positive, got " + std::to_string(count));
  const int half = count / 2;
  std::vector<Plan> plans;
  Scenario real_only;
  real_only.synthetic_proportion = 0.0;
  for (int i = 0; i < half; ++i) plans.push_back({member_id(side, "real", i), 0, real_only, derive_seed(seed, static_cast<std::uint64_t>(i))});

  ScenarioParams params;
  params.sources = spec.sources;
  for (int j = 0; j < half; ++j) {
    const auto member_seed = derive_seed(seed, static_cast<std::uint64_t>(half + j));
    if (spec.kind == ScenarioKind::S2) params.proportion = spec.proportion.value_or(s2_grid()[static_cast<std::size_t>(j % 10)]);
    plans.push_back({member_id(side, "syn", j), 1, make_scenario(spec.kind, params, derive_seed(member_seed, 1)), member_seed});
  }
  return run_plans(pop, side, plans, spec.train_size, spec.training, threads);
}

ReferenceBundle train_source_fleet(const Population& pop, int per_source, Side side, std::uint64_t seed,
                                   int train_size, const MemberTrainConfig& training, int threads) {
  if (per_source < 1) fail(Errc::InvalidConfig, "per_source must be positive");
  std::vector<Plan> plans;
  const auto& sources = pop.config.sources;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    ScenarioParams params;
    params.sources = {sources[s]};
    const Scenario scenario = make_scenario(ScenarioKind::S1, params, 0);
    for (int i = 0; i < per_source; ++i) {
      const auto index = static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(per_source) + static_cast<std::uint64_t>(i);
      const std::string kind = "src" + std::to_string(sources[s]);
      plans.push_back({member_id(side, kind.c_str(), i), static_cast<int>(s), scenario, derive_seed(seed, index)});
    }
  }
  return run_plans(pop, side, plans, train_size, training, threads);
}

}  // namespace synaudit::testbed
