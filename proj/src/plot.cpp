#include "synaudit/plot.hpp"

#include "synaudit/error.hpp"
#include "synaudit/nn.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace synaudit {

std::uint8_t class_gray(int label, int class_count) {
  if (class_count < 1 || label < 0 || label >= class_count) fail(Errc::IndexOutOfRange, "class label for gray level");
  if (class_count == 1) return 40;
  return static_cast<std::uint8_t>(std::lround(40.0 + 175.0 * label / (class_count - 1)));
}

PlotRaster render(const Projection2D& proj, const std::vector<int>& labels, int class_count) {
  const Eigen::Index n = proj.points.rows();
  if (n == 0) fail(Errc::EmptyProjection, "nothing to render");
  if (proj.points.cols() != 2) fail(Errc::DimensionMismatch, "projection must have two columns");
  if (static_cast<Eigen::Index>(labels.size()) != n) fail(Errc::DimensionMismatch, "one label per point required");
  if (class_count <= 0) class_count = *std::max_element(labels.begin(), labels.end()) + 1;

  PlotRaster out;
  out.seed = proj.seed;
  out.projector = to_string(proj.projector);
  constexpr int span = PlotRaster::kSize - 2 * PlotRaster::kMargin - 1;  // 279: first to last interior pixel
  const Eigen::Vector2d lo = proj.points.colwise().minCoeff();
  const Eigen::Vector2d hi = proj.points.colwise().maxCoeff();
  const auto scale = [&](double v, int axis) {
    const double range = hi[axis] - lo[axis];
    return range > 0.0 ? (v - lo[axis]) / range : 0.5;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t gray = class_gray(labels[static_cast<std::size_t>(i)], class_count);
    const int col = PlotRaster::kMargin + static_cast<int>(std::lround(scale(proj.points(i, 0), 0) * span));
    const int row = PlotRaster::kMargin + static_cast<int>(std::lround((1.0 - scale(proj.points(i, 1), 1)) * span));
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        auto& px = out.at(row + dr, col + dc);
        px = std::min(px, gray);
      }
  }
  return out;
}

// ---- PGM / PNG -------------------------------------------------------------

std::string encode_pgm(const PlotRaster& raster) {
  if (raster.pixels.size() != static_cast<std::size_t>(PlotRaster::kSize * PlotRaster::kSize))
    fail(Errc::BadRasterShape, "raster must be 300x300");
  std::string out = "P5\n300 300\n255\n";
  out.append(reinterpret_cast<const char*>(raster.pixels.data()), raster.pixels.size());
  return out;
}

PlotRaster decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start || pos - start > 9) fail(Errc::SchemaError, "bad PGM header");
    return std::stol(std::string(bytes.substr(start, pos - start)));
  };
  if (bytes.substr(0, 2) != "P5") fail(Errc::SchemaError, "not a binary PGM (P5)");
  pos = 2;
  const long width = number();
  const long height = number();
  const long maxval = number();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail(Errc::SchemaError, "bad PGM header");
  ++pos;
  if (width != PlotRaster::kSize || height != PlotRaster::kSize)
    fail(Errc::BadRasterShape, "raster is " + std::to_string(width) + "x" + std::to_string(height) + ", expected 300x300");
  if (maxval != 255) fail(Errc::SchemaError, "PGM maxval must be 255");
  const std::size_t count = static_cast<std::size_t>(width * height);
  if (bytes.size() - pos != count) fail(Errc::SchemaError, "PGM pixel data has wrong length");
  PlotRaster r;
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), r.pixels.begin());
  return r;
}

void save_pgm(const PlotRaster& raster, const fs::path& path) { write_file(path, encode_pgm(raster)); }
PlotRaster load_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

void save_png(const PlotRaster& raster, const fs::path& path) {
  if (raster.pixels.size() != static_cast<std::size_t>(PlotRaster::kSize * PlotRaster::kSize))
    fail(Errc::BadRasterShape, "raster must be 300x300");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = PlotRaster::kSize;
  image.height = PlotRaster::kSize;
  image.format = PNG_FORMAT_GRAY;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), PlotRaster::kSize, nullptr))
    fail(Errc::IoError, "PNG write failed for " + path.string() + ": " + image.message);
}

// ---- classifier ------------------------------------------------------------

struct PlotClassifier::Layout {
  // conv k: weight (out x in*9), bias (out); then dense (2 x 8), bias (2)
  std::array<Eigen::Index, 3> conv_w{}, conv_b{};
  Eigen::Index dense_w = 0, dense_b = 0, size = 0;
};

const PlotClassifier::Layout& PlotClassifier::layout() {
  static const Layout l = [] {
    Layout out;
    Eigen::Index at = 0;
    for (int k = 0; k < 3; ++k) {
      out.conv_w[k] = at;
      at += kChannels[k + 1] * kChannels[k] * 9;
      out.conv_b[k] = at;
      at += kChannels[k + 1];
    }
    out.dense_w = at;
    at += kClasses * kChannels[3];
    out.dense_b = at;
    at += kClasses;
    out.size = at;
    return out;
  }();
  return l;
}

PlotClassifier::PlotClassifier() : theta_(Eigen::VectorXd::Zero(layout().size)) {}

PlotClassifier PlotClassifier::random(Rng& rng) {
  PlotClassifier m;
  const auto& l = layout();
  for (int k = 0; k < 3; ++k) {
    const Eigen::Index fan_in = kChannels[k] * 9;
    m.theta_.segment(l.conv_w[k], kChannels[k + 1] * fan_in) =
        normal_vector(rng, kChannels[k + 1] * fan_in, std::sqrt(2.0 / static_cast<double>(fan_in)));
  }
  m.theta_.segment(l.dense_w, kClasses * kChannels[3]) = normal_vector(rng, kClasses * kChannels[3], std::sqrt(1.0 / kChannels[3]));
  return m;
}

void PlotClassifier::zero_output_layer() {
  const auto& l = layout();
  theta_.segment(l.dense_w, l.size - l.dense_w).setZero();
}

PlotClassifier::Image PlotClassifier::preprocess(const PlotRaster& raster) {
  if (raster.pixels.size() != static_cast<std::size_t>(PlotRaster::kSize * PlotRaster::kSize))
    fail(Errc::BadRasterShape, "raster must be 300x300");
  constexpr int f = PlotRaster::kSize / kPooled;
  Image img = Image::Zero(kPooled, kPooled);
  for (int r = 0; r < PlotRaster::kSize; ++r)
    for (int c = 0; c < PlotRaster::kSize; ++c) img(r / f, c / f) += 1.0 - raster.at(r, c) / 255.0;
  // one full 3x3 stamp inside a pooling cell reads as about 1
  return img * (4.0 / static_cast<double>(f * f));
}

namespace {

// Feature maps are (channels x H*W), pixel index r*W + c.
using Maps = Eigen::MatrixXd;

Eigen::MatrixXd im2col(const Maps& in, int h, int w) {
  const Eigen::Index ch = in.rows();
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(ch * 9, h * w);
  for (Eigen::Index c = 0; c < ch; ++c)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Eigen::Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
        for (int r = std::max(0, -dy); r < std::min(h, h - dy); ++r)
          for (int q = std::max(0, -dx); q < std::min(w, w - dx); ++q) cols(row, r * w + q) = in(c, (r + dy) * w + q + dx);
      }
  return cols;
}

Maps col2im(const Eigen::MatrixXd& cols, Eigen::Index ch, int h, int w) {
  Maps out = Maps::Zero(ch, h * w);
  for (Eigen::Index c = 0; c < ch; ++c)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Eigen::Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
        for (int r = std::max(0, -dy); r < std::min(h, h - dy); ++r)
          for (int q = std::max(0, -dx); q < std::min(w, w - dx); ++q) out(c, (r + dy) * w + q + dx) += cols(row, r * w + q);
      }
  return out;
}

struct Pooled {
  Maps out;
  std::vector<Eigen::Index> argmax;  // flat index into the input per output cell
};

Pooled maxpool2(const Maps& in, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  Pooled p{Maps(in.rows(), oh * ow), std::vector<Eigen::Index>(static_cast<std::size_t>(in.rows() * oh * ow))};
  for (Eigen::Index c = 0; c < in.rows(); ++c)
    for (int r = 0; r < oh; ++r)
      for (int q = 0; q < ow; ++q) {
        Eigen::Index best = (2 * r) * w + 2 * q;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const Eigen::Index idx = (2 * r + a) * w + 2 * q + b;
            if (in(c, idx) > in(c, best)) best = idx;
          }
        p.out(c, r * ow + q) = in(c, best);
        p.argmax[static_cast<std::size_t>(c * oh * ow + r * ow + q)] = best;
      }
  return p;
}

struct Trace {
  std::array<Eigen::MatrixXd, 3> cols;  // im2col of each conv input
  std::array<Maps, 3> pre;              // conv outputs before ReLU
  std::array<Pooled, 2> pools;
  Eigen::VectorXd features;
  Eigen::Vector2d logits;
};

}  // namespace

namespace {

struct Forward {
  const Eigen::VectorXd& theta;
  const std::array<Eigen::Index, 3>& conv_w;
  const std::array<Eigen::Index, 3>& conv_b;
  Eigen::Index dense_w, dense_b;

  Eigen::Map<const Eigen::MatrixXd> weight(int k) const {
    return {theta.data() + conv_w[k], PlotClassifier::kChannels[k + 1], PlotClassifier::kChannels[k] * 9};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int k) const { return {theta.data() + conv_b[k], PlotClassifier::kChannels[k + 1]}; }
  Eigen::Map<const Eigen::MatrixXd> dense() const { return {theta.data() + dense_w, PlotClassifier::kClasses, PlotClassifier::kChannels[3]}; }
  Eigen::Map<const Eigen::VectorXd> dense_bias() const { return {theta.data() + dense_b, PlotClassifier::kClasses}; }

  Trace run(const PlotClassifier::Image& image) const {
    Trace t;
    int h = PlotClassifier::kPooled, w = PlotClassifier::kPooled;
    Maps x(1, h * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) x(0, r * w + c) = image(r, c);
    for (int k = 0; k < 3; ++k) {
      t.cols[k] = im2col(x, h, w);
      t.pre[k] = (weight(k) * t.cols[k]).colwise() + bias(k);
      Maps act = t.pre[k].cwiseMax(0.0);
      if (k < 2) {
        t.pools[k] = maxpool2(act, h, w);
        h /= 2;
        w /= 2;
        x = t.pools[k].out;
      } else {
        t.features = act.rowwise().mean();
      }
    }
    t.logits = dense() * t.features + dense_bias();
    return t;
  }
};

}  // namespace

Eigen::Vector2d PlotClassifier::forward(const Image& image) const {
  const auto& l = layout();
  const Forward f{theta_, l.conv_w, l.conv_b, l.dense_w, l.dense_b};
  return softmax(f.run(image).logits);
}

double PlotClassifier::loss_and_gradient(const Image& image, int label, Eigen::VectorXd& grad) const {
  const auto& l = layout();
  const Forward f{theta_, l.conv_w, l.conv_b, l.dense_w, l.dense_b};
  const Trace t = f.run(image);
  const double top = t.logits.maxCoeff();
  const double lse = top + std::log((t.logits.array() - top).exp().sum());
  const double loss = lse - t.logits[label];

  grad.setZero(theta_.size());
  Eigen::Vector2d g = (t.logits.array() - lse).exp().matrix();
  g[label] -= 1.0;
  Eigen::Map<Eigen::MatrixXd>(grad.data() + l.dense_w, kClasses, kChannels[3]) = g * t.features.transpose();
  grad.segment(l.dense_b, kClasses) = g;

  // global average pool back to the last conv's spatial grid
  int sizes[3] = {kPooled, kPooled / 2, kPooled / 4};
  const Eigen::Index last = static_cast<Eigen::Index>(sizes[2]) * sizes[2];
  Eigen::VectorXd gf = f.dense().transpose() * g;
  Maps gpre = (gf / static_cast<double>(last)).replicate(1, last);
  for (int k = 2; k >= 0; --k) {
    gpre = gpre.cwiseProduct((t.pre[k].array() > 0.0).cast<double>().matrix());
    Eigen::Map<Eigen::MatrixXd>(grad.data() + l.conv_w[k], kChannels[k + 1], kChannels[k] * 9).noalias() =
        gpre * t.cols[k].transpose();
    grad.segment(l.conv_b[k], kChannels[k + 1]) = gpre.rowwise().sum();
    if (k == 0) break;
    const Maps gin = col2im(f.weight(k).transpose() * gpre, kChannels[k], sizes[k], sizes[k]);
    // route through the max pool that produced this conv's input
    const auto& pool = t.pools[k - 1];
    const int hprev = sizes[k - 1];
    Maps gact = Maps::Zero(kChannels[k], static_cast<Eigen::Index>(hprev) * hprev);
    const Eigen::Index cells = gin.cols();
    for (Eigen::Index c = 0; c < gin.rows(); ++c)
      for (Eigen::Index i = 0; i < cells; ++i) gact(c, pool.argmax[static_cast<std::size_t>(c * cells + i)]) += gin(c, i);
    gpre = std::move(gact);
  }
  return loss;
}

Container PlotClassifier::to_container() const {
  Container c;
  c.matrices["theta"] = theta_;
  c.texts["kind"] = "plot_classifier";
  return c;
}

PlotClassifier PlotClassifier::from_container(const Container& c) {
  if (c.text("kind") != "plot_classifier") fail(Errc::SchemaError, "not a plot-classifier bundle");
  const auto& theta = c.matrix("theta");
  if (theta.cols() != 1 || theta.rows() != layout().size) fail(Errc::SchemaError, "plot-classifier parameter count");
  PlotClassifier m;
  m.theta_ = theta.col(0);
  return m;
}

// ---- training and audit ----------------------------------------------------

PlotTrainResult train_plot_classifier(const std::vector<PlotRaster>& synthetic, const std::vector<PlotRaster>& real,
                                      const PlotTrainConfig& cfg) {
  if (synthetic.empty() || real.empty()) fail(Errc::EmptyFleet, "need synthetic and real reference rasters");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    fail(Errc::InvalidConfig, "epochs, batch size and learning rate must be positive");

  std::vector<PlotClassifier::Image> images;
  std::vector<int> labels;
  for (const auto& r : synthetic) {
    images.push_back(PlotClassifier::preprocess(r));
    labels.push_back(1);
  }
  for (const auto& r : real) {
    images.push_back(PlotClassifier::preprocess(r));
    labels.push_back(0);
  }

  Rng init_rng(derive_seed(cfg.seed, 1));
  Rng order_rng(derive_seed(cfg.seed, 2));
  PlotTrainResult out;
  out.model = PlotClassifier::random(init_rng);
  Adam adam(out.model.parameters().size(), {.lr = cfg.learning_rate});

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad, batch_grad(out.model.parameters().size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch_grad.setZero();
      for (std::size_t b = start; b < stop; ++b) {
        epoch_loss += out.model.loss_and_gradient(images[order[b]], labels[order[b]], grad);
        batch_grad += grad;
      }
      if (!std::isfinite(epoch_loss) || !batch_grad.allFinite())
        fail(Errc::NonFiniteLoss, "plot classifier diverged at epoch " + std::to_string(epoch + 1));
      adam.step(out.model.parameters(), batch_grad / static_cast<double>(stop - start));
    }
    out.history.push_back(epoch_loss);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto p = out.model.forward(images[i]);
    correct += (p[1] > p[0] ? 1 : 0) == labels[i];
  }
  out.train_accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  return out;
}

PlotLossTerms plot_loss_terms(const PlotClassifier& model, const std::vector<PlotRaster>& synthetic,
                              const std::vector<PlotRaster>& real) {
  const auto nll = [&](const PlotRaster& r, int label) { return -std::log(model.forward(PlotClassifier::preprocess(r))[label]); };
  PlotLossTerms t;
  for (const auto& r : synthetic) t.synthetic += nll(r, 1);
  for (const auto& r : real) t.real += nll(r, 0);
  // interleave the two sets so the merged pass sums in a different order
  const std::size_t n = std::max(synthetic.size(), real.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i < real.size()) t.total += nll(real[i], 0);
    if (i < synthetic.size()) t.total += nll(synthetic[i], 1);
  }
  return t;
}

AuditVerdict audit_plot(const PlotRaster& raster, const PlotClassifier& model, std::uint64_t seed) {
  const Posterior p(model.forward(PlotClassifier::preprocess(raster)));
  AuditVerdict v;
  v.label = p.argmax();
  v.statistic = p[v.label];
  v.method = "plot";
  v.query_kind = raster.projector.empty() ? "raster" : "raster:" + raster.projector;
  v.seed = seed;
  return v;
}

void save_plot_classifier(const PlotClassifier& model, const nlohmann::json& manifest, const fs::path& path) {
  auto c = model.to_container();
  c.texts["manifest"] = manifest.dump();
  c.save(path);
}

PlotClassifier load_plot_classifier(const fs::path& path) { return PlotClassifier::from_container(Container::load(path)); }

}  // namespace synaudit
