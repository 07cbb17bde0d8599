#include "optoent/scenarios.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef OPTOENT_SOURCE_FIGURE_DIR
#define OPTOENT_SOURCE_FIGURE_DIR ""
#endif
#ifndef OPTOENT_INSTALL_FIGURE_DIR
#define OPTOENT_INSTALL_FIGURE_DIR ""
#endif

namespace optoent::scenarios {

using nlohmann::json;

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"2", "3", "4", "5", "6", "7", "8a", "8b", "9", "S1", "S2"};
  return ids;
}

std::filesystem::path default_figure_dir() {
  if (const char* env = std::getenv("OPTOENT_FIGURE_DIR"); env != nullptr && *env != '\0') return env;
  for (const char* dir : {OPTOENT_SOURCE_FIGURE_DIR, OPTOENT_INSTALL_FIGURE_DIR}) {
    if (*dir != '\0' && std::filesystem::is_directory(dir)) return dir;
  }
  return "configs/figures";
}

FigureResult reproduce_figure(const std::string& id, const RunOptions& options, const std::filesystem::path& figure_dir) {
  bool known = false;
  for (const auto& f : figure_ids()) known = known || f == id;
  if (!known) {
    std::string list;
    for (const auto& f : figure_ids()) list += (list.empty() ? "" : ", ") + f;
    throw ConfigError("unknown figure id '" + id + "' (known: " + list + ")");
  }
  const auto path = figure_dir / ("fig" + id + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("canonical config " + path.string() + " not found");
  std::ostringstream text;
  text << in.rdbuf();

  json doc;
  try {
    doc = json::parse(text.str(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("runs") || !doc.at("runs").is_array()) {
    throw ConfigError(path.string() + ": expected an object with a \"runs\" array");
  }

  FigureResult res;
  res.id = id;
  res.directory = options.out_dir / ("fig" + id);
  std::filesystem::create_directories(res.directory);
  RunOptions sub = options;
  sub.out_dir = res.directory;

  json manifest;
  manifest["figure"] = id;
  manifest["software"] = {{"name", "optoent"}, {"version", version()}};
  if (doc.contains("open")) manifest["open"] = doc.at("open");
  if (doc.contains("description")) manifest["description"] = doc.at("description");
  json runs = json::array();
  const auto& arr = doc.at("runs");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = path.string() + " runs." + std::to_string(i);
    const json& run = arr[i];
    if (run.contains("scenario")) {
      const auto cfg = parse_scenario(run.at("scenario").dump(), where + ".scenario");
      res.scenarios.push_back(run_scenario(cfg, sub));
      const auto& r = res.scenarios.back();
      json entry = {{"kind", "scenario"}, {"name", cfg.name}, {"csv", r.csv.filename().string()},
                    {"sidecar", r.sidecar.filename().string()}, {"status", r.status}};
      if (r.stats) {
        entry["stabilized_peak"] = r.stats->stabilized_peak;
        entry["stabilized_mean"] = r.stats->stabilized_mean;
      }
      runs.push_back(entry);
    } else if (run.contains("sweep")) {
      const auto cfg = parse_sweep(run.at("sweep").dump(), where + ".sweep");
      res.sweeps.push_back(run_sweep(cfg, sub));
      const auto& r = res.sweeps.back();
      json entry = {{"kind", "sweep"}, {"name", cfg.name}, {"csv", r.csv.filename().string()},
                    {"statistic", to_string(cfg.statistic)}, {"failures", r.failures}};
      if (!r.heatmap.empty()) entry["heatmap"] = r.heatmap.filename().string();
      runs.push_back(entry);
    } else {
      throw ConfigError(where + ": expected \"scenario\" or \"sweep\"");
    }
  }
  manifest["runs"] = runs;
  std::ofstream out(res.directory / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
  return res;
}

}  // namespace optoent::scenarios
