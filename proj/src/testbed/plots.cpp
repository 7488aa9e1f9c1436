#include "synaudit/testbed/plots.hpp"

#include "synaudit/error.hpp"

#include <numeric>

namespace synaudit::testbed {

using nlohmann::json;

json to_json(const PlotSetConfig& c) {
  return json{{"points", c.points},
              {"projector", to_string(c.projector)},
              {"perplexity", c.perplexity},
              {"iterations", c.iterations}};
}

PlotSetConfig plot_set_config_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::ConfigError, "plot config must be a JSON object");
  PlotSetConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) fail(Errc::ConfigError, "unknown plot key '" + key + "'");
  try {
    c.points = j.value("points", c.points);
    c.projector = parse_projector(j.value("projector", to_string(c.projector)));
    c.perplexity = j.value("perplexity", c.perplexity);
    c.iterations = j.value("iterations", c.iterations);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, std::string("plot config: ") + e.what());
  }
  return c;
}

std::vector<PlotRaster> make_rasters(const Dataset& pool, int class_count, int count, const PlotSetConfig& cfg,
                                     std::uint64_t seed) {
  if (count < 0) fail(Errc::InvalidConfig, "raster count must be non-negative");
  if (cfg.points > pool.size())
    fail(Errc::InsufficientData, "plot needs " + std::to_string(cfg.points) + " rows, pool has " + std::to_string(pool.size()));
  TsneOptions opt;
  opt.perplexity = cfg.perplexity;
  opt.iterations = cfg.iterations;

  std::vector<PlotRaster> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(pool.size()));
  for (int i = 0; i < count; ++i) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    std::iota(rows.begin(), rows.end(), 0);
    for (int k = 0; k < cfg.points; ++k) {
      std::uniform_int_distribution<Eigen::Index> pick(k, pool.size() - 1);
      std::swap(rows[static_cast<std::size_t>(k)], rows[static_cast<std::size_t>(pick(rng))]);
    }
    const Dataset sample = pool.subset({rows.begin(), rows.begin() + cfg.points});
    const auto proj = project_2d(sample.x, cfg.projector, s, opt);
    out.push_back(render(proj, std::vector<int>(sample.y.data(), sample.y.data() + sample.y.size()), class_count));
  }
  return out;
}

}  // namespace synaudit::testbed
