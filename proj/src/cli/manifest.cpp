#include "synaudit/cli/manifest.hpp"

#include "synaudit/error.hpp"

namespace synaudit::cli {

using nlohmann::json;

namespace {
std::string relative_to(const fs::path& base, const fs::path& file) {
  return fs::weakly_canonical(file).lexically_proximate(fs::weakly_canonical(base)).generic_string();
}
}  // namespace

void RunManifest::add_input(const fs::path& base, const fs::path& file) {
  inputs[relative_to(base, file)] = sha256_file(file);
}

void RunManifest::add_output(const fs::path& base, const fs::path& file) {
  outputs[relative_to(base, file)] = sha256_file(file);
}

json RunManifest::to_json() const {
  return json{{"command", command}, {"config", config},   {"seeds", seeds},
              {"inputs", inputs},   {"outputs", outputs}, {"timings", timings}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.timings = j.at("timings").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("run manifest: ") + e.what());
  }
  return m;
}

void RunManifest::save(const fs::path& path) const { write_file(path, to_json().dump(2) + "\n"); }

RunManifest RunManifest::load(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingArtifact, "manifest not found: " + path.string());
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

std::vector<std::string> verify_manifest(const fs::path& path) {
  const RunManifest m = RunManifest::load(path);
  const fs::path base = path.parent_path();
  std::vector<std::string> problems;
  const auto check = [&](const std::map<std::string, std::string>& files) {
    for (const auto& [rel, digest] : files) {
      const fs::path p = base / rel;
      if (!fs::exists(p)) problems.push_back("missing: " + rel);
      else if (sha256_file(p) != digest) problems.push_back("hash mismatch: " + rel);
    }
  };
  check(m.outputs);
  check(m.inputs);
  return problems;
}

}  // namespace synaudit::cli
