#pragma once

#include "synaudit/io.hpp"
#include "synaudit/projection.hpp"
#include "synaudit/types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace synaudit {

/// 300x300 grayscale scatter plot, row-major, row 0 at the top.
struct PlotRaster {
  static constexpr int kSize = 300;
  static constexpr int kMargin = 10;
  static constexpr std::uint8_t kBackground = 255;

  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kSize * kSize, kBackground);
  std::uint64_t seed = 0;
  std::string projector;

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row * kSize + col)]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row * kSize + col)]; }

  friend bool operator==(const PlotRaster&, const PlotRaster&) = default;
};

/// Gray level for `label` among `class_count` classes, evenly spaced in [40, 215].
std::uint8_t class_gray(int label, int class_count);

/// Min-max scales each axis into the 280x280 interior and stamps a 3x3 square
/// per point. Overlaps keep the darker value. class_count <= 0 means
/// max(label) + 1.
PlotRaster render(const Projection2D& proj, const std::vector<int>& labels, int class_count = 0);

/// Binary PGM (P5), maxval 255.
std::string encode_pgm(const PlotRaster& raster);
PlotRaster decode_pgm(std::string_view bytes);
void save_pgm(const PlotRaster& raster, const fs::path& path);
PlotRaster load_pgm(const fs::path& path);
/// 8-bit grayscale PNG export.
void save_png(const PlotRaster& raster, const fs::path& path);

/// Compact convolutional classifier over a fixed 6x6 average-pooled view of
/// the raster (50x50, ink = 1 - value/255):
///   conv3x3 1->4, ReLU, maxpool 2 -> conv3x3 4->8, ReLU, maxpool 2 ->
///   conv3x3 8->8, ReLU, global average -> dense 8->2 -> softmax.
class PlotClassifier {
 public:
  static constexpr int kPooled = 50;
  static constexpr std::array<int, 4> kChannels = {1, 4, 8, 8};
  static constexpr int kClasses = 2;

  PlotClassifier();  // all parameters zero
  static PlotClassifier random(Rng& rng);

  using Image = Eigen::MatrixXd;  // kPooled x kPooled
  static Image preprocess(const PlotRaster& raster);

  Eigen::Vector2d forward(const Image& image) const;

  /// -ln p[label] and its gradient with respect to parameters().
  double loss_and_gradient(const Image& image, int label, Eigen::VectorXd& grad) const;

  const Eigen::VectorXd& parameters() const noexcept { return theta_; }
  Eigen::VectorXd& parameters() noexcept { return theta_; }
  /// Zeroes the dense output layer (weights and bias).
  void zero_output_layer();

  Container to_container() const;
  static PlotClassifier from_container(const Container& c);

  friend bool operator==(const PlotClassifier& a, const PlotClassifier& b) { return a.theta_ == b.theta_; }

 private:
  struct Layout;
  static const Layout& layout();
  Eigen::VectorXd theta_;
};

struct PlotTrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct PlotTrainResult {
  PlotClassifier model;
  std::vector<double> history;  // total loss over the training set after each epoch
  double train_accuracy = 0.0;
};

/// Synthetic rasters are labeled 1, real rasters 0.
PlotTrainResult train_plot_classifier(const std::vector<PlotRaster>& synthetic, const std::vector<PlotRaster>& real,
                                      const PlotTrainConfig& cfg);

struct PlotLossTerms {
  double synthetic = 0.0;  // sum over synthetic rasters of -ln p1
  double real = 0.0;       // sum over real rasters of -ln p0
  double total = 0.0;      // one pass over the merged, labeled set
};
PlotLossTerms plot_loss_terms(const PlotClassifier& model, const std::vector<PlotRaster>& synthetic,
                              const std::vector<PlotRaster>& real);

/// Label = argmax posterior (ties to 0), statistic = max posterior entry.
AuditVerdict audit_plot(const PlotRaster& raster, const PlotClassifier& model, std::uint64_t seed = 0);

void save_plot_classifier(const PlotClassifier& model, const nlohmann::json& manifest, const fs::path& path);
PlotClassifier load_plot_classifier(const fs::path& path);

}  // namespace synaudit
