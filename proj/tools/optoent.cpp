// optoent: command-line front end for scenarios, sweeps and figure bundles.

#include "optoent/analytic.hpp"
#include "optoent/checks.hpp"
#include "optoent/scenarios.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Globals {
  std::string out_dir = ".";
  std::string precision;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
};

optoent::scenarios::RunOptions options_from(const Globals& g) {
  optoent::scenarios::RunOptions o;
  o.out_dir = g.out_dir;
  if (!g.precision.empty()) o.precision = optoent::PrecisionPolicy::parse(g.precision);
  o.threads = g.threads;
  o.seed = g.seed;
  return o;
}

void print_stats(const optoent::scenarios::ScenarioResult& r) {
  std::printf("%s: %s, %zu samples, max %ld bits", r.csv.string().c_str(), r.status.c_str(), r.trajectory.samples.size(),
              r.trajectory.max_precision_bits);
  if (r.stats) std::printf(", stabilized peak %.6g, mean %.6g", r.stats->stabilized_peak, r.stats->stabilized_mean);
  std::printf("\n");
  if (!r.diagnostic.empty()) std::fprintf(stderr, "  %s\n", r.diagnostic.c_str());
}

int cmd_simulate(const Globals& g, const std::string& path) {
  const auto cfg = optoent::scenarios::load_scenario(path);
  const auto r = optoent::scenarios::run_scenario(cfg, options_from(g));
  print_stats(r);
  return r.status == "ok" ? kOk : kNumericalError;
}

int cmd_sweep(const Globals& g, const std::string& path) {
  const auto cfg = optoent::scenarios::load_sweep(path);
  const auto r = optoent::scenarios::run_sweep(cfg, options_from(g));
  std::printf("%s: %zu points, %zu failed\n", r.csv.string().c_str(), r.points.size(), r.failures);
  if (!r.heatmap.empty()) std::printf("%s\n", r.heatmap.string().c_str());
  return r.failures == r.points.size() && !r.points.empty() ? kNumericalError : kOk;
}

int cmd_figure(const Globals& g, const std::string& id, const std::string& config_dir) {
  const auto dir = config_dir.empty() ? optoent::scenarios::default_figure_dir() : std::filesystem::path(config_dir);
  const auto r = optoent::scenarios::reproduce_figure(id, options_from(g), dir);
  int rc = kOk;
  for (const auto& s : r.scenarios) {
    print_stats(s);
    if (s.status != "ok") rc = kNumericalError;
  }
  for (const auto& s : r.sweeps) std::printf("%s: %zu points, %zu failed\n", s.csv.string().c_str(), s.points.size(), s.failures);
  std::printf("figure %s written to %s\n", id.c_str(), r.directory.string().c_str());
  return rc;
}

int cmd_check(const Globals& g) {
  int failed = 0;
  for (const auto& c : optoent::checks::invariant_suite(g.seed.value_or(1))) {
    std::printf("%s  %s (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    failed += c.pass ? 0 : 1;
  }
  return failed == 0 ? kOk : kNumericalError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement dynamics of blue-detuned optomechanical systems"};
  app.set_version_flag("--version", std::string(optoent::version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--out-dir", g.out_dir, "Directory for CSV and JSON output")->capture_default_str();
  app.add_option("--precision", g.precision, "Working precision: double, ext:<bits> or adaptive");
  app.add_option("--threads", g.threads, "Worker threads for sweeps and Monte-Carlo (0: all cores)");
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for Monte-Carlo and randomized checks");

  std::string path;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario config");
  simulate->add_option("config", path, "Scenario JSON")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep config");
  sweep->add_option("config", path, "Sweep JSON")->required()->check(CLI::ExistingFile);

  std::string figure_id;
  std::string config_dir;
  auto* figure = app.add_subcommand("figure", "Reproduce a figure from its canonical config");
  figure->add_option("id", figure_id, "Figure id: 2 3 4 5 6 7 8a 8b 9 S1 S2")->required();
  figure->add_option("--config-dir", config_dir, "Directory with the canonical fig<id>.json files");

  double j = 0.0;
  double gn = 0.0;
  double gamma_m = 1e-5;
  auto* analytic = app.add_subcommand("analytic", "Steady entanglement of the omega_m/kappa -> infinity model");
  analytic->add_option("--j", j, "J/kappa")->required();
  analytic->add_option("--gn", gn, "(gamma_m/kappa) n_th")->required();
  analytic->add_option("--gamma-m", gamma_m, "gamma_m/kappa (only used for the validity warning)")->capture_default_str();

  auto* boundary = app.add_subcommand("boundary", "Thermal load at which the steady entanglement vanishes");
  boundary->add_option("--j", j, "J/kappa")->required();

  double temp_k = 0.0;
  double freq_hz = 0.0;
  auto* occupation = app.add_subcommand("occupation", "Bose-Einstein occupation of the mechanical bath");
  occupation->add_option("--temp-k", temp_k, "Temperature in kelvin")->required();
  occupation->add_option("--freq-hz", freq_hz, "Mechanical frequency omega_m / 2 pi in Hz")->required();

  auto* check = app.add_subcommand("check", "Run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*simulate) return cmd_simulate(g, path);
    if (*sweep) return cmd_sweep(g, path);
    if (*figure) return cmd_figure(g, figure_id, config_dir);
    if (*analytic) {
      std::vector<std::string> warnings;
      const double e = optoent::analytic::analytic_EN(j, 1.0, gamma_m, gn / gamma_m, &warnings);
      for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("E_N = %.12g\n", e);
      return kOk;
    }
    if (*boundary) {
      const auto b = optoent::analytic::boundary_gn(j, 1.0);
      std::printf("gn_star = %.12g\nasymptotic = %.12g\n", b.gn_star, b.asymptotic);
      return kOk;
    }
    if (*occupation) {
      const double n = optoent::analytic::thermal_occupation(temp_k, 2.0 * 3.14159265358979323846 * freq_hz);
      std::printf("n_th = %.12g\n", n);
      return kOk;
    }
    if (*check) return cmd_check(g);
  } catch (const optoent::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const optoent::DomainError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return kConfigError;
  } catch (const optoent::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const optoent::NoRoot& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const optoent::WindowTooShort& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
  return kOk;
}
