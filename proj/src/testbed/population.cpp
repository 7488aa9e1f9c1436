#include "synaudit/testbed/population.hpp"

#include "synaudit/error.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace synaudit::testbed {

using nlohmann::json;

void PopulationConfig::validate() const {
  const auto bad = [](const std::string& what) { fail(Errc::InvalidConfig, what); };
  if (class_count < 2) bad("class_count must be at least 2");
  if (feature_dim < class_count) bad("feature_dim must be at least class_count");
  if (!(real_separation >= 0.0)) bad("real_separation must be non-negative");
  if (!(synthetic_sharpness >= 0.0)) bad("synthetic_sharpness must be non-negative");
  if (sources.empty()) bad("at least one source is required");
  if (std::set<int>(sources.begin(), sources.end()).size() != sources.size()) bad("source ids must be distinct");
  if (!(offset_scale >= 0.0)) bad("offset_scale must be non-negative");
  if (encoder_width < 1) bad("encoder_width must be positive");
  if (split_size < 1 || test_size < 1) bad("split sizes must be positive");
  if (!std::isfinite(reference_real_shift)) bad("reference_real_shift must be finite");
}

json to_json(const PopulationConfig& c) {
  return json{{"class_count", c.class_count},
              {"feature_dim", c.feature_dim},
              {"real_separation", c.real_separation},
              {"synthetic_sharpness", c.synthetic_sharpness},
              {"sources", c.sources},
              {"offset_scale", c.offset_scale},
              {"encoder_width", c.encoder_width},
              {"split_size", c.split_size},
              {"test_size", c.test_size},
              {"reference_real_shift", c.reference_real_shift},
              {"seed", c.seed}};
}

PopulationConfig population_config_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::ConfigError, "population config must be a JSON object");
  PopulationConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) fail(Errc::ConfigError, "unknown population key '" + key + "'");
  try {
    c.class_count = j.value("class_count", c.class_count);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.real_separation = j.value("real_separation", c.real_separation);
    c.synthetic_sharpness = j.value("synthetic_sharpness", c.synthetic_sharpness);
    c.sources = j.value("sources", c.sources);
    c.offset_scale = j.value("offset_scale", c.offset_scale);
    c.encoder_width = j.value("encoder_width", c.encoder_width);
    c.split_size = j.value("split_size", c.split_size);
    c.test_size = j.value("test_size", c.test_size);
    c.reference_real_shift = j.value("reference_real_shift", c.reference_real_shift);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("population config: ") + e.what());
  }
  c.validate();
  return c;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
    out.ids.push_back(ids[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

std::vector<LabeledExample> Dataset::examples() const {
  std::vector<LabeledExample> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Eigen::Index i = 0; i < size(); ++i) out.push_back({Eigen::VectorXd(x.row(i).transpose()), y[i], {}});
  return out;
}

std::string to_string(Side side) { return side == Side::Target ? "target" : "reference"; }

Side parse_side(const std::string& text) {
  if (text == "target") return Side::Target;
  if (text == "reference") return Side::Reference;
  fail(Errc::ConfigError, "unknown side '" + text + "'");
}

namespace {

// Streams for derive_seed; fixed so adding a split never moves another.
enum Stream : std::uint64_t {
  kMeans = 1,
  kEncoder = 2,
  kShift = 3,
  kOffsets = 100,
  kTargetReal = 200,
  kReferenceReal = 201,
  kTestReal = 202,
  kTargetSyn = 300,
  kReferenceSyn = 400,
  kTestSyn = 500,
};

Eigen::VectorXd unit_vector(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd v = normal_vector(rng, d);
  return v / v.norm();
}

struct Sampler {
  const Eigen::MatrixXd& means;
  std::uint64_t& next_id;

  // rows labeled i % c, mean scale * mu_y + shift, noise sd
  Dataset draw(Rng& rng, int n, double scale, const Eigen::VectorXd& shift, double sd) {
    const Eigen::Index c = means.rows();
    Dataset out;
    out.x = normal_matrix(rng, n, means.cols(), sd);
    out.y.resize(n);
    for (int i = 0; i < n; ++i) {
      out.y[i] = static_cast<int>(i % c);
      out.x.row(i) += scale * means.row(out.y[i]) + shift.transpose();
      out.ids.push_back(next_id++);
    }
    return out;
  }
};

}  // namespace

Population gen_population(const PopulationConfig& cfg) {
  cfg.validate();
  Population pop;
  pop.config = cfg;
  const Eigen::Index d = cfg.feature_dim, c = cfg.class_count;
  const double delta = cfg.synthetic_sharpness;

  {
    // Orthonormal class directions, centred, scaled so every pair of means
    // is real_separation apart.
    Rng rng(derive_seed(cfg.seed, kMeans));
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(normal_matrix(rng, d, c)).householderQ() *
                              Eigen::MatrixXd::Identity(d, c);
    const Eigen::VectorXd centre = q.rowwise().mean();
    pop.class_means = (cfg.real_separation / std::sqrt(2.0)) * (q.colwise() - centre).transpose();
  }
  {
    Rng rng(derive_seed(cfg.seed, kEncoder));
    pop.encoder = Encoder::random(d, cfg.encoder_width, rng);
  }
  for (int s : cfg.sources) {
    Rng rng(derive_seed(cfg.seed, kOffsets + static_cast<std::uint64_t>(s)));
    pop.offsets[s] = delta * cfg.offset_scale * unit_vector(rng, d);
  }
  Eigen::VectorXd ref_shift = Eigen::VectorXd::Zero(d);
  if (cfg.reference_real_shift != 0.0) {
    Rng rng(derive_seed(cfg.seed, kShift));
    ref_shift = cfg.reference_real_shift * unit_vector(rng, d);
  }

  std::uint64_t next_id = 0;
  Sampler sampler{pop.class_means, next_id};
  const Eigen::VectorXd none = Eigen::VectorXd::Zero(d);
  const double syn_sd = 1.0 / std::sqrt(1.0 + delta);
  const auto stream = [&](std::uint64_t tag) { return Rng(derive_seed(cfg.seed, tag)); };

  {
    auto r1 = stream(kTargetReal), r2 = stream(kReferenceReal), r3 = stream(kTestReal);
    pop.target.real = sampler.draw(r1, cfg.split_size, 1.0, none, 1.0);
    pop.reference.real = sampler.draw(r2, cfg.split_size, 1.0, ref_shift, 1.0);
    pop.test_real = sampler.draw(r3, cfg.test_size, 1.0, none, 1.0);
  }
  for (int s : cfg.sources) {
    const auto tag = static_cast<std::uint64_t>(s);
    auto r1 = stream(kTargetSyn + tag), r2 = stream(kReferenceSyn + tag), r3 = stream(kTestSyn + tag);
    pop.target.synthetic[s] = sampler.draw(r1, cfg.split_size, 1.0 + delta, pop.offsets[s], syn_sd);
    pop.reference.synthetic[s] = sampler.draw(r2, cfg.split_size, 1.0 + delta, pop.offsets[s], syn_sd);
    pop.test_synthetic[s] = sampler.draw(r3, cfg.test_size, 1.0 + delta, pop.offsets[s], syn_sd);
  }
  return pop;
}

namespace {

std::vector<Eigen::Index> sample_rows(Eigen::Index pool, int count, Rng& rng) {
  if (count < 1) fail(Errc::EmptyQuerySet, "query budget must be positive");
  if (count > pool) fail(Errc::InsufficientData, "budget " + std::to_string(count) + " exceeds pool of " + std::to_string(pool));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(pool));
  std::iota(rows.begin(), rows.end(), 0);
  // partial Fisher-Yates
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, pool - 1);
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
  }
  rows.resize(static_cast<std::size_t>(count));
  return rows;
}

const Dataset& test_source(const Population& pop, int source) {
  auto it = pop.test_synthetic.find(source);
  if (it == pop.test_synthetic.end()) fail(Errc::InvalidConfig, "population has no source " + std::to_string(source));
  return it->second;
}

}  // namespace

QuerySet real_queries(const Population& pop, int budget, std::uint64_t seed) {
  Rng rng(seed);
  QuerySet q;
  q.kind = QueryKind::real();
  q.examples = pop.test_real.subset(sample_rows(pop.test_real.size(), budget, rng)).examples();
  return q;
}

QuerySet synthetic_queries(const Population& pop, int source, int budget, std::uint64_t seed) {
  const auto& pool = test_source(pop, source);
  Rng rng(seed);
  QuerySet q;
  q.kind = QueryKind::synthetic(source);
  q.examples = pool.subset(sample_rows(pool.size(), budget, rng)).examples();
  return q;
}

QuerySet mixed_queries(const Population& pop, int budget, std::uint64_t seed) {
  const auto& sources = pop.config.sources;
  const int k = static_cast<int>(sources.size());
  QuerySet q;
  q.kind = QueryKind::mixed();
  for (int i = 0; i < k; ++i) {
    const int share = budget / k + (i < budget % k ? 1 : 0);
    if (share == 0) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto& pool = test_source(pop, sources[static_cast<std::size_t>(i)]);
    for (auto& ex : pool.subset(sample_rows(pool.size(), share, rng)).examples()) q.examples.push_back(std::move(ex));
  }
  if (q.examples.empty()) fail(Errc::EmptyQuerySet, "query budget must be positive");
  return q;
}

}  // namespace synaudit::testbed
