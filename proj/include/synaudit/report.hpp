#pragma once

#include "synaudit/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace synaudit {

nlohmann::json to_json(const AuditVerdict& verdict);
AuditVerdict verdict_from_json(const nlohmann::json& record);

/// JSON array of {method, query_kind, statistic, threshold|null, label, seed}
/// records, plus "target" when the verdict names one.
void save_verdict_report(const std::vector<AuditVerdict>& verdicts, const std::filesystem::path& path);
std::vector<AuditVerdict> load_verdict_report(const std::filesystem::path& path);

}  // namespace synaudit
