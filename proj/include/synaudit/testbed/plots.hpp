#pragma once

#include "synaudit/plot.hpp"
#include "synaudit/testbed/population.hpp"

namespace synaudit::testbed {

struct PlotSetConfig {
  int points = 64;  // rows sampled per plot
  Projector projector = Projector::Tsne;
  double perplexity = 15.0;
  int iterations = 300;
};

nlohmann::json to_json(const PlotSetConfig& cfg);
PlotSetConfig plot_set_config_from_json(const nlohmann::json& j);

/// `count` scatter plots, each of `points` rows drawn without replacement
/// from `pool` and colored by class. Plot i uses derive_seed(seed, i) for
/// both the draw and the projection.
std::vector<PlotRaster> make_rasters(const Dataset& pool, int class_count, int count, const PlotSetConfig& cfg,
                                     std::uint64_t seed);

}  // namespace synaudit::testbed
