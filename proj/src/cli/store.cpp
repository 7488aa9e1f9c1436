#include "synaudit/cli/store.hpp"

#include "synaudit/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace synaudit::cli {

using nlohmann::json;
using namespace synaudit::testbed;

std::string json_hash(const json& j) { return sha256_hex(j.dump()); }

json load_json_config(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::ConfigError, "config file not found: " + path.string());
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(Errc::ConfigError, path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

FileLock::FileLock(const fs::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(Errc::IoError, "cannot open lock " + path.string() + ": " + std::strerror(errno));
  while (::flock(fd_, LOCK_EX) != 0) {
    if (errno == EINTR) continue;
    ::close(fd_);
    fail(Errc::IoError, "cannot lock " + path.string() + ": " + std::strerror(errno));
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---- population ------------------------------------------------------------

namespace {

void put(Container& c, const std::string& prefix, const Dataset& d) {
  c.matrices[prefix + "/x"] = d.x;
  c.matrices[prefix + "/y"] = d.y.cast<double>();
  Eigen::MatrixXd ids(static_cast<Eigen::Index>(d.ids.size()), 1);
  for (std::size_t i = 0; i < d.ids.size(); ++i) ids(static_cast<Eigen::Index>(i), 0) = static_cast<double>(d.ids[i]);
  c.matrices[prefix + "/ids"] = ids;
}

Dataset get(const Container& c, const std::string& prefix) {
  Dataset d;
  d.x = c.matrix(prefix + "/x");
  const Eigen::MatrixXd& y = c.matrix(prefix + "/y");
  const Eigen::MatrixXd& ids = c.matrix(prefix + "/ids");
  if (y.rows() != d.x.rows() || ids.rows() != d.x.rows() || y.cols() != 1 || ids.cols() != 1)
    fail(Errc::SchemaError, "population split '" + prefix + "' has inconsistent shapes");
  d.y = y.col(0).cast<int>();
  for (Eigen::Index i = 0; i < ids.rows(); ++i) d.ids.push_back(static_cast<std::uint64_t>(ids(i, 0)));
  return d;
}

void put_side(Container& c, const std::string& name, const SideData& s) {
  put(c, name + "/real", s.real);
  for (const auto& [src, d] : s.synthetic) put(c, name + "/synthetic/" + std::to_string(src), d);
}

}  // namespace

void save_population(const Population& pop, const fs::path& path) {
  Container c;
  c.texts["kind"] = "population";
  c.texts["config"] = to_json(pop.config).dump();
  c.matrices["class_means"] = pop.class_means;
  c.matrices["encoder/weight"] = pop.encoder->weight;
  c.matrices["encoder/bias"] = pop.encoder->bias;
  for (const auto& [src, v] : pop.offsets) c.matrices["offset/" + std::to_string(src)] = v;
  put_side(c, "target", pop.target);
  put_side(c, "reference", pop.reference);
  put(c, "test/real", pop.test_real);
  for (const auto& [src, d] : pop.test_synthetic) put(c, "test/synthetic/" + std::to_string(src), d);
  c.save(path);
}

Population load_population(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingArtifact, "population not found: " + path.string());
  const Container c = Container::load(path);
  if (c.texts.count("kind") == 0 || c.text("kind") != "population") fail(Errc::SchemaError, path.string() + " is not a population");
  Population pop;
  try {
    pop.config = population_config_from_json(json::parse(c.text("config")));
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("population config: ") + e.what());
  }
  pop.class_means = c.matrix("class_means");
  auto enc = std::make_shared<Encoder>();
  enc->weight = c.matrix("encoder/weight");
  enc->bias = c.matrix("encoder/bias").col(0);
  pop.encoder = enc;
  for (int src : pop.config.sources) {
    const auto s = std::to_string(src);
    pop.offsets[src] = c.matrix("offset/" + s).col(0);
    pop.target.synthetic[src] = get(c, "target/synthetic/" + s);
    pop.reference.synthetic[src] = get(c, "reference/synthetic/" + s);
    pop.test_synthetic[src] = get(c, "test/synthetic/" + s);
  }
  pop.target.real = get(c, "target/real");
  pop.reference.real = get(c, "reference/real");
  pop.test_real = get(c, "test/real");
  return pop;
}

// ---- fleets ----------------------------------------------------------------

std::vector<ClassifierPtr> LoadedFleet::with_label(int label) const {
  std::vector<ClassifierPtr> out;
  for (std::size_t i = 0; i < models.size(); ++i)
    if (labels[i] == label) out.push_back(models[i]);
  return out;
}

std::vector<FleetMember> LoadedFleet::as_fleet() const {
  std::vector<FleetMember> out;
  for (std::size_t i = 0; i < models.size(); ++i) out.push_back({ids[i], models[i], labels[i]});
  return out;
}

json FleetManifest::to_json() const {
  json members_json = json::array();
  for (const auto& m : members)
    members_json.push_back({{"id", m.id},
                            {"label", m.label},
                            {"scenario", m.scenario},
                            {"seed", m.seed},
                            {"epochs", m.epochs},
                            {"train_accuracy", m.train_accuracy},
                            {"path", m.path},
                            {"sha256", m.sha256}});
  return json{{"key", key},   {"side", side},   {"count", count},          {"seed", seed},
              {"population", population}, {"spec", spec}, {"members", members_json}};
}

void FleetManifest::save(const fs::path& path) {
  write_file(path, to_json().dump(2) + "\n");
  file = path;
}

FleetManifest FleetManifest::load(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingArtifact, "fleet manifest not found: " + path.string());
  FleetManifest m;
  try {
    const json j = json::parse(read_file(path));
    m.key = j.at("key").get<std::string>();
    m.side = j.at("side").get<std::string>();
    m.count = j.at("count").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.population = j.at("population");
    m.spec = j.at("spec");
    for (const auto& e : j.at("members")) {
      FleetEntry f;
      f.id = e.at("id").get<std::string>();
      f.label = e.at("label").get<int>();
      f.scenario = e.at("scenario");
      f.seed = e.at("seed").get<std::uint64_t>();
      f.epochs = e.at("epochs").get<int>();
      f.train_accuracy = e.at("train_accuracy").get<double>();
      f.path = e.at("path").get<std::string>();
      f.sha256 = e.at("sha256").get<std::string>();
      m.members.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
  m.file = path;
  return m;
}

LoadedFleet FleetManifest::load_models() const {
  LoadedFleet out;
  const fs::path base = file.parent_path();
  for (const auto& m : members) {
    const fs::path p = base / m.path;
    if (!fs::exists(p)) fail(Errc::MissingArtifact, "member model not found: " + p.string());
    const std::string bytes = read_file(p);
    if (sha256_hex(bytes) != m.sha256) fail(Errc::IoError, "hash mismatch for " + p.string());
    out.ids.push_back(m.id);
    out.labels.push_back(m.label);
    out.models.push_back(MiniClassifier::from_container(Container::parse(bytes)));
  }
  return out;
}

ModelStore::ModelStore(fs::path root) : root_(std::move(root)) {}

std::string ModelStore::fleet_key(const PopulationConfig& pop, const FleetSpec& spec, int count, Side side,
                                  std::uint64_t seed) {
  return json_hash(json{{"format", 1},
                        {"population", to_json(pop)},
                        {"fleet", to_json(spec)},
                        {"count", count},
                        {"side", to_string(side)},
                        {"seed", seed}});
}

FleetManifest ModelStore::fleet(const Population& pop, const FleetSpec& spec, int count, Side side, std::uint64_t seed,
                                int threads, bool* reused) const {
  const std::string key = fleet_key(pop.config, spec, count, side, seed);
  const fs::path dir = root_ / key;
  const fs::path manifest_path = dir / "fleet.json";
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) fail(Errc::IoError, "cannot create store " + root_.string() + ": " + ec.message());

  FileLock lock(root_ / (key + ".lock"));
  if (fs::exists(manifest_path)) {
    auto m = FleetManifest::load(manifest_path);
    m.load_models();  // re-hash before trusting a cached fleet
    if (reused) *reused = true;
    return m;
  }
  if (reused) *reused = false;

  const ReferenceBundle bundle = train_fleet(pop, spec, count, side, seed, threads);
  fs::create_directories(dir / "members", ec);
  if (ec) fail(Errc::IoError, "cannot create " + (dir / "members").string() + ": " + ec.message());

  FleetManifest m;
  m.key = key;
  m.side = to_string(side);
  m.count = count;
  m.seed = seed;
  m.population = to_json(pop.config);
  m.spec = to_json(spec);
  for (const auto& rec : bundle.members) {
    const std::string rel = "members/" + rec.id + ".bin";
    const std::string bytes = rec.model->to_container().serialize();
    write_file(dir / rel, bytes);
    m.members.push_back({rec.id, rec.label, to_json(rec.scenario), rec.seed, rec.epochs, rec.train_accuracy, rel, sha256_hex(bytes)});
  }
  m.save(manifest_path);
  return m;
}

}  // namespace synaudit::cli
