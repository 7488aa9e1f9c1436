#include "synaudit/report.hpp"

#include "synaudit/error.hpp"
#include "synaudit/io.hpp"

#include <cmath>

namespace synaudit {

using nlohmann::json;

json to_json(const AuditVerdict& v) {
  if (!std::isfinite(v.statistic)) fail(Errc::SchemaError, "verdict statistic is not finite");
  json rec;
  rec["method"] = v.method;
  rec["query_kind"] = v.query_kind;
  rec["statistic"] = v.statistic;
  rec["threshold"] = v.threshold ? json(*v.threshold) : json(nullptr);
  rec["label"] = v.label;
  rec["seed"] = v.seed;
  if (!v.target.empty()) rec["target"] = v.target;
  return rec;
}

AuditVerdict verdict_from_json(const json& rec) {
  try {
    AuditVerdict v;
    v.method = rec.at("method").get<std::string>();
    v.query_kind = rec.at("query_kind").get<std::string>();
    v.statistic = rec.at("statistic").get<double>();
    const auto& t = rec.at("threshold");
    if (!t.is_null()) v.threshold = t.get<double>();
    v.label = rec.at("label").get<int>();
    v.seed = rec.at("seed").get<std::uint64_t>();
    if (rec.contains("target")) v.target = rec.at("target").get<std::string>();
    return v;
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("bad verdict record: ") + e.what());
  }
}

void save_verdict_report(const std::vector<AuditVerdict>& verdicts, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& v : verdicts) arr.push_back(to_json(v));
  write_file(path, arr.dump(2) + "\n");
}

std::vector<AuditVerdict> load_verdict_report(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) fail(Errc::SchemaError, path.string() + ": report must be a JSON array");
  std::vector<AuditVerdict> out;
  out.reserve(doc.size());
  for (const auto& rec : doc) out.push_back(verdict_from_json(rec));
  return out;
}

}  // namespace synaudit
