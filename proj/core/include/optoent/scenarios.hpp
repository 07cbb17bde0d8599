#pragma once

// Declarative runs: scenario and sweep configs, CSV/JSON output and the
// canonical figure bundles.
//
// Configs are JSON documents. A scenario looks like
//
//   {
//     "name": "fig3",
//     "model": "full_two_mode",
//     "params": {"g_m": 1e-4, "omega_m": 10, "quality_factor": 1e6, "n_th": 6e4},
//     "drives": [{"amplitude": 1e5, "detuning_over_omega_m": -1}],
//     "noise": {"cavity": true, "mechanical": true},
//     "t_end": 40,
//     "integrator": {"method": "magnus4", "precision": "adaptive", "sample_stride": 0.01},
//     "outputs": ["E_N", "purity", "n_p", "n_m", "V_1_3", "eigs"]
//   }
//
// and a sweep wraps one as {"base": {...}, "axes": [...], "statistic": ...}.

#include "optoent/core.hpp"
#include "optoent/integrator.hpp"
#include "optoent/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace optoent::scenarios {

/// One CSV column group. Kinds: "E_N", "purity", "log_purity", "n_p", "n_m",
/// "V" (element row, col, 1-based) and "eigs" (all symplectic eigenvalues).
struct OutputSpec {
  std::string kind;
  std::size_t row = 0;
  std::size_t col = 0;

  std::string label() const;
  static OutputSpec parse(const std::string& token);
};

struct MonteCarloSpec {
  std::size_t trajectories = 0;  // 0 disables the cross-check
  double dt = 1e-3;
  double t_end = 0.0;            // 0: the scenario's t_end
};

struct ScenarioConfig {
  std::string name = "scenario";
  dynamics::ModelKind model = dynamics::ModelKind::FullTwoMode;
  SystemParams params;
  std::vector<DriveSpec> drives;
  std::vector<double> couplings;  // J (and J2) for the asymptotic kinds
  NoiseToggle noise;
  double t_end = 0.0;
  dynamics::IntegratorConfig integrator;
  std::vector<OutputSpec> outputs;
  double window_fraction = 0.2;
  std::uint64_t seed = 1;
  MonteCarloSpec monte_carlo;
  std::string csv_path;      // relative paths resolve against the output directory
  std::string sidecar_path;
  std::vector<std::string> notes;

  void validate() const;
  dynamics::LinearModel build_model() const;
  /// J of the (first) drive, whatever the model kind.
  double coupling() const;
};

/// Parse a scenario from JSON text; `source` names the document in errors.
/// A sidecar written by run_scenario is accepted as well.
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<config>");
ScenarioConfig load_scenario(const std::filesystem::path& path);
/// Fully resolved config as JSON text; parse_scenario(dump) reproduces it.
std::string dump_scenario(const ScenarioConfig& config);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<PrecisionPolicy> precision;  // overrides the config when set
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool quiet = true;
};

struct ScenarioResult {
  std::string status = "ok";  // ok | failed
  std::string diagnostic;
  std::filesystem::path csv;
  std::filesystem::path sidecar;
  dynamics::Trajectory trajectory;
  std::optional<measures::TrajectoryStats> stats;
};

/// Integrate, write the CSV and the JSON sidecar. Integration failures are
/// recorded in the sidecar (the partial CSV is kept) rather than thrown.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Integrate only; throws on failure.
dynamics::Trajectory simulate(const ScenarioConfig& config);

enum class Statistic { StabilizedPeak, StabilizedMean, Analytic, MaxDriftEigenvalue, FinalValue };

std::string to_string(Statistic s);
Statistic parse_statistic(const std::string& text);

struct SweepAxis {
  std::string path;  // dotted path into the scenario document, e.g. "drives.0.amplitude"
  std::vector<double> values;
};

struct SweepConfig {
  std::string name = "sweep";
  std::string base_document;  // scenario JSON
  std::vector<SweepAxis> axes;
  Statistic statistic = Statistic::StabilizedPeak;
  std::string csv_path;
  std::string heatmap_path;

  void validate() const;
  /// Scenario for the point with the given axis values.
  ScenarioConfig point(const std::vector<double>& coords) const;
};

SweepConfig parse_sweep(const std::string& text, const std::string& source = "<sweep>");
SweepConfig load_sweep(const std::filesystem::path& path);

struct SweepPoint {
  std::vector<double> coords;
  double value = 0.0;  // NaN on failure
  std::string reason;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // row-major over the axes
  std::filesystem::path csv;
  std::filesystem::path heatmap;
  std::size_t failures = 0;
};

/// Statistic of a single scenario.
double evaluate_statistic(const ScenarioConfig& config, Statistic statistic);

/// Evaluate every grid point in a work pool. Point failures become NaN rows
/// with a reason; the sweep itself only throws for config problems.
SweepResult run_sweep(const SweepConfig& sweep, const RunOptions& options = {});

/// Figure ids with canonical configs.
const std::vector<std::string>& figure_ids();

/// Directory holding the canonical figure configs: $OPTOENT_FIGURE_DIR, the
/// source tree, or the installed share directory.
std::filesystem::path default_figure_dir();

struct FigureResult {
  std::string id;
  std::vector<ScenarioResult> scenarios;
  std::vector<SweepResult> sweeps;
  std::filesystem::path directory;
};

/// Run every entry of the figure's canonical config into out_dir/fig<id>.
FigureResult reproduce_figure(const std::string& id, const RunOptions& options = {},
                              const std::filesystem::path& figure_dir = default_figure_dir());

/// Shortest round-trip decimal text.
std::string format_number(double x);
std::string format_number(long double x);

}  // namespace optoent::scenarios
