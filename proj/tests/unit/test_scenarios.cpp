#include "optoent/analytic.hpp"
#include "optoent/scenarios.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

using namespace optoent;
using namespace optoent::scenarios;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("optoent_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const char* kShort = R"({
  "name": "short",
  "model": "full_two_mode",
  "params": {"g_m": 1e-4, "omega_m": 10, "quality_factor": 1e6, "n_th": 100},
  "drives": [{"amplitude": 1e5, "sideband": "blue"}],
  "t_end": 2,
  "integrator": {"sample_stride": 0.05},
  "outputs": ["E_N", "purity", "n_p", "n_m", "V_1_3", "eigs"]
})";

}  // namespace

TEST_SUITE("scenarios") {

TEST_CASE("syntax errors carry line and column") {
  const auto msg = error_of("{\n  \"model\": ,\n}");
  CHECK(msg.find("<config>:2:") == 0);
}

TEST_CASE("field errors name the offending path") {
  CHECK(error_of(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1}], "params": {"bogus": 1}})")
            .find("field 'params.bogus': unknown key") != std::string::npos);
  CHECK(error_of(R"({"model": "five_mode", "t_end": 1})").find("field 'model'") != std::string::npos);
  CHECK(error_of(R"({"model": "full_two_mode", "drives": [{"amplitude": 1}]})").find("field 't_end': missing") !=
        std::string::npos);
  CHECK(error_of(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1, "sideband": "green"}]})")
            .find("sideband") != std::string::npos);
  CHECK(error_of(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1}], "outputs": ["V_5_1"]})")
            .find("V_5_1") != std::string::npos);
  CHECK(error_of(R"({"model": "three_mode", "t_end": 1, "drives": [{"amplitude": 1}]})").find("drive") !=
        std::string::npos);
  CHECK_FALSE(error_of(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1}], "params": {"gamma_m": 1e-5, "quality_factor": 1e6}})")
                  .empty());
}

TEST_CASE("parameter aliases resolve to the stored parameters") {
  auto c = parse_scenario(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1e5}],
    "params": {"omega_m": 10, "quality_factor": 1e6, "temperature_k": 300, "mech_freq_hz": 1e8}})");
  CHECK(c.params.gamma_m == doctest::Approx(1e-5));
  CHECK(c.params.n_th == doctest::Approx(analytic::thermal_occupation(300.0, 2.0 * M_PI * 1e8)));
  // Blue sideband is the default for the first drive.
  CHECK(c.drives[0].detuning == -10.0);

  c = parse_scenario(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1e5}],
    "params": {"omega_m": 10, "quality_factor": 1e6, "q_over_n_th": 2}})");
  CHECK(c.params.n_th == doctest::Approx(5e5));

  c = parse_scenario(R"({"model": "asymptotic_two_mode", "t_end": 1, "coupling_j": 2.5,
    "params": {"gamma_m": 1e-5, "gamma_n_th": 1}})");
  CHECK(c.params.n_th == doctest::Approx(1e5));
  CHECK(c.coupling() == 2.5);

  c = parse_scenario(R"({"model": "full_two_mode", "t_end": 1, "params": {"g_m": 2e-4, "omega_m": 20},
    "drives": [{"coupling_j": 3, "detuning_over_omega_m": 1}]})");
  CHECK(c.drives[0].amplitude == doctest::Approx(3.0 * 20.0 / 2e-4));
  CHECK(c.drives[0].detuning == 20.0);
}

TEST_CASE("dump round-trips") {
  const auto c = parse_scenario(kShort);
  const auto text = dump_scenario(c);
  const auto again = parse_scenario(text, "dump");
  CHECK(dump_scenario(again) == text);
  CHECK(again.params.gamma_m == c.params.gamma_m);
  CHECK(again.outputs.size() == c.outputs.size());
  const auto asym = parse_scenario(R"({"model": "asymptotic_three_mode", "t_end": 1, "coupling_j": [1, 1.5]})");
  CHECK(dump_scenario(parse_scenario(dump_scenario(asym))) == dump_scenario(asym));
}

TEST_CASE("runs are byte-identical and the sidecar re-ingests") {
  const auto c = parse_scenario(kShort);
  RunOptions a;
  a.out_dir = scratch("run_a");
  RunOptions b;
  b.out_dir = scratch("run_b");
  const auto ra = run_scenario(c, a);
  const auto rb = run_scenario(c, b);
  REQUIRE(ra.status == "ok");
  CHECK(slurp(ra.csv) == slurp(rb.csv));
  CHECK(slurp(ra.sidecar) == slurp(rb.sidecar));

  const std::string csv = slurp(ra.csv);
  const auto header = csv.substr(0, csv.find('\n'));
  CHECK(header == "t,E_N,purity,n_p,n_m,V_1_3,nu_1,nu_2");

  const auto back = parse_scenario(slurp(ra.sidecar), ra.sidecar.string());
  CHECK(dump_scenario(back) == dump_scenario(c));
  RunOptions again;
  again.out_dir = scratch("run_c");
  CHECK(slurp(run_scenario(back, again).csv) == csv);
}

TEST_CASE("undriven vacuum stays put") {
  const auto c = parse_scenario(R"({"name": "vac", "model": "full_two_mode", "t_end": 3,
    "params": {"n_th": 0}, "drives": [{"amplitude": 0}], "outputs": ["E_N", "n_p", "n_m", "V_1_1", "V_3_3"],
    "integrator": {"sample_stride": 0.5}})");
  const auto tr = simulate(c);
  for (const auto& s : tr.samples) {
    CHECK(s.measures.e_n < 1e-12);
    CHECK(std::fabs(static_cast<double>(s.measures.n_p)) < 1e-12);
    CHECK(std::fabs(static_cast<double>(s.measures.n_m)) < 1e-12);
    CHECK(static_cast<double>(s.covariance.value(2, 2)) == doctest::Approx(0.5));
  }
}

TEST_CASE("output tokens") {
  CHECK(OutputSpec::parse("V_1_3").label() == "V_1_3");
  CHECK(OutputSpec::parse("V_1_3").row == 1);
  CHECK(OutputSpec::parse("E_N").kind == "E_N");
  CHECK_FALSE(error_of(R"({"model": "full_two_mode", "t_end": 1, "drives": [{"amplitude": 1}], "outputs": ["V_0_1"]})").empty());
  CHECK_THROWS_AS(OutputSpec::parse("entropy"), ConfigError);
}

TEST_CASE("single-point sweep equals the scenario statistic") {
  const std::string text = std::string(R"({"name": "one", "statistic": "final_e_n", "base": )") + kShort +
                           R"(, "axes": [{"path": "drives.0.amplitude", "values": [1e5]}]})";
  const auto sw = parse_sweep(text);
  RunOptions o;
  o.out_dir = scratch("sweep_one");
  const auto r = run_sweep(sw, o);
  REQUIRE(r.points.size() == 1);
  CHECK(r.failures == 0);
  CHECK(r.points[0].value == evaluate_statistic(parse_scenario(kShort), Statistic::FinalValue));
  CHECK(fs::exists(r.csv));
  CHECK_FALSE(fs::exists(o.out_dir / ".one.points"));
}

TEST_CASE("failed points become NaN rows with a reason") {
  const std::string text = R"({"name": "capped", "statistic": "final_e_n",
    "base": {"model": "full_two_mode", "t_end": 20, "params": {"n_th": 100},
             "drives": [{"amplitude": 1e5}],
             "integrator": {"precision": "adaptive", "max_bits": 96, "sample_stride": 0.1}},
    "axes": [{"path": "drives.0.amplitude", "values": [1e3, 1e5]}]})";
  RunOptions o;
  o.out_dir = scratch("sweep_fail");
  const auto r = run_sweep(parse_sweep(text), o);
  REQUIRE(r.points.size() == 2);
  CHECK(std::isfinite(r.points[0].value));
  CHECK(std::isnan(r.points[1].value));
  CHECK(!r.points[1].reason.empty());
  CHECK(r.failures == 1);
  const auto csv = slurp(r.csv);
  CHECK(csv.substr(0, csv.find('\n')) == "drives.0.amplitude,final_e_n,reason");
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("two-axis sweeps write a heatmap") {
  const std::string text = R"({"name": "grid", "statistic": "analytic",
    "base": {"model": "asymptotic_two_mode", "t_end": 1, "coupling_j": 1, "params": {"gamma_m": 1e-5, "gamma_n_th": 1}},
    "axes": [{"path": "coupling_j", "linspace": [1, 3, 3]}, {"path": "params.gamma_n_th", "values": [0.5, 2]}]})";
  RunOptions o;
  o.out_dir = scratch("sweep_grid");
  const auto r = run_sweep(parse_sweep(text), o);
  REQUIRE(r.points.size() == 6);
  CHECK(r.points[1].coords == std::vector<double>{1.0, 2.0});
  CHECK(r.points[5].value == doctest::Approx(analytic::analytic_EN(3.0, 1.0, 1e-5, 2.0 / 1e-5)));
  const auto heat = slurp(r.heatmap);
  std::istringstream lines(heat);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 4);
  CHECK(heat.rfind("coupling_j\\params.gamma_n_th,0.5,2\n", 0) == 0);
}

TEST_CASE("sweep config errors") {
  CHECK_THROWS_AS(parse_sweep(R"({"base": {"model": "asymptotic_two_mode", "t_end": 1, "coupling_j": 1},
    "axes": [{"path": "params.nope", "values": [1]}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_sweep(R"({"base": {"model": "asymptotic_two_mode", "t_end": 1, "coupling_j": 1},
    "axes": [{"path": "coupling_j", "values": [1], "range": [0, 1, 0.5]}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_statistic("median"), ConfigError);
}

TEST_CASE("figure registry") {
  CHECK(figure_ids().size() == 11);
  CHECK_THROWS_AS(reproduce_figure("42", {}, OPTOENT_FIGURE_SOURCE "/figures"), ConfigError);
  for (const auto& id : figure_ids()) CHECK(fs::exists(fs::path(OPTOENT_FIGURE_SOURCE) / "figures" / ("fig" + id + ".json")));
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1e-300, 6.02214076e23, -2.5, 0.0}) CHECK(std::stod(format_number(x)) == x);
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

}  // TEST_SUITE
