#include "synaudit/cli/run_report.hpp"

#include "synaudit/error.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace synaudit::cli {

using nlohmann::json;

json RunRecord::to_json() const {
  json sweep = parameter.empty() ? json(nullptr) : json{{"parameter", parameter}, {"value", value}};
  return json{{"name", name}, {"kind", kind}, {"sweep", sweep}, {"config", config}, {"result", result}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.name = j.at("name").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    if (!j.at("sweep").is_null()) {
      r.parameter = j["sweep"].at("parameter").get<std::string>();
      r.value = j["sweep"].at("value").get<double>();
    }
    r.config = j.at("config");
    r.result = j.at("result");
    for (const auto& [m, s] : r.result.at("methods").items()) {
      (void)s.at("mean").get<double>();
      (void)s.at("std").get<double>();
      (void)s.at("accuracies").size();
    }
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("run record: ") + e.what());
  }
  return r;
}

void save_run(const fs::path& run_dir, const RunRecord& run) {
  std::error_code ec;
  fs::create_directories(run_dir / "runs", ec);
  if (ec) fail(Errc::IoError, "cannot create " + (run_dir / "runs").string() + ": " + ec.message());
  write_file(run_dir / "runs" / (run.name + ".json"), run.to_json().dump(2) + "\n");
}

std::vector<RunRecord> load_runs(const fs::path& run_dir) {
  std::vector<RunRecord> out;
  const fs::path dir = run_dir / "runs";
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      out.push_back(RunRecord::from_json(json::parse(read_file(f))));
    } catch (const json::parse_error& e) {
      fail(Errc::SchemaError, f.string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Point {
  double value, mean, std;
};

// Line chart of mean accuracy with +/- std bars, one series per method.
std::string curve_svg(const std::string& parameter, const std::map<std::string, std::vector<Point>>& series) {
  constexpr double W = 520, H = 340, L = 60, R = 140, T = 30, B = 50;
  double lo = 1e300, hi = -1e300;
  for (const auto& [_, pts] : series)
    for (const auto& p : pts) lo = std::min(lo, p.value), hi = std::max(hi, p.value);
  if (hi <= lo) lo -= 1.0, hi += 1.0;
  const auto sx = [&](double v) { return L + (v - lo) / (hi - lo) * (W - L - R); };
  const auto sy = [&](double a) { return T + (1.0 - std::clamp(a, 0.0, 1.0)) * (H - T - B); };
  static const char* colors[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#66418c", "#4f4f4f"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">accuracy vs " << parameter << "</text>\n";
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    s << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << fmt("%.2f", sy(a)) << "\" y2=\"" << fmt("%.2f", sy(a))
      << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt("%.2f", sy(a) + 4) << "\" text-anchor=\"end\">" << fmt("%.2f", a) << "</text>\n";
  }
  std::set<double> ticks;
  for (const auto& [_, pts] : series)
    for (const auto& p : pts) ticks.insert(p.value);
  for (double v : ticks)
    s << "<text x=\"" << fmt("%.2f", sx(v)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt("%g", v) << "</text>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << parameter << "</text>\n";
  s << "<line x1=\"" << L << "\" x2=\"" << L << "\" y1=\"" << T << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << H - B << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";

  std::size_t k = 0;
  for (const auto& [method, pts] : series) {
    const char* color = colors[k % 6];
    std::string poly;
    for (const auto& p : pts) {
      poly += fmt("%.2f", sx(p.value)) + "," + fmt("%.2f", sy(p.mean)) + " ";
      s << "<line x1=\"" << fmt("%.2f", sx(p.value)) << "\" x2=\"" << fmt("%.2f", sx(p.value)) << "\" y1=\""
        << fmt("%.2f", sy(p.mean - p.std)) << "\" y2=\"" << fmt("%.2f", sy(p.mean + p.std)) << "\" stroke=\"" << color << "\"/>\n";
      s << "<circle cx=\"" << fmt("%.2f", sx(p.value)) << "\" cy=\"" << fmt("%.2f", sy(p.mean)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!poly.empty()) poly.pop_back();
    s << "<polyline points=\"" << poly << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(k);
    s << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 26 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 4 << "\">" << method << "</text>\n";
    ++k;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

ReportOutcome write_report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) fail(Errc::IoError, "run directory not found: " + run_dir.string());
  const auto runs = load_runs(run_dir);
  const fs::path out_dir = run_dir / "report";
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  ReportOutcome outcome;
  outcome.runs = static_cast<int>(runs.size());
  std::string csv = "run,kind,parameter,value,method,mean,std,seeds\n";
  std::ostringstream summary;
  std::map<std::string, std::map<std::string, std::vector<Point>>> curves;  // parameter -> method -> points

  if (runs.empty()) {
    summary << "no runs\n";
  } else {
    summary << runs.size() << (runs.size() == 1 ? " run" : " runs") << "\n\n";
    for (const auto& r : runs) {
      summary << r.name << " (" << r.kind;
      if (!r.parameter.empty()) summary << ", " << r.parameter << " = " << fmt("%g", r.value);
      summary << ")\n";
      for (const auto& [method, s] : r.result["methods"].items()) {
        const double mean = s["mean"].get<double>(), sd = s["std"].get<double>();
        const auto n = s["accuracies"].size();
        char line[160];
        std::snprintf(line, sizeof line, "  %-12s %.3f ± %.3f  (%zu seeds)\n", method.c_str(), mean, sd, n);
        summary << line;
        csv += r.name + "," + r.kind + "," + r.parameter + "," + (r.parameter.empty() ? "" : fmt("%g", r.value)) + "," +
               method + "," + fmt("%.6f", mean) + "," + fmt("%.6f", sd) + "," + std::to_string(n) + "\n";
        if (!r.parameter.empty()) curves[r.parameter][method].push_back({r.value, mean, sd});
      }
    }
  }

  const auto emit = [&](const std::string& name, const std::string& bytes) {
    write_file(out_dir / name, bytes);
    outcome.files.push_back(out_dir / name);
  };
  outcome.summary = summary.str();
  emit("summary.txt", outcome.summary);
  emit("accuracy.csv", csv);
  for (auto& [parameter, series] : curves) {
    for (auto& [_, pts] : series) std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.value < b.value; });
    emit("accuracy_vs_" + parameter + ".svg", curve_svg(parameter, series));
  }
  return outcome;
}

}  // namespace synaudit::cli
