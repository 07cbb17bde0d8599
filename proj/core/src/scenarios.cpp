#include "optoent/scenarios.hpp"

#include "optoent/analytic.hpp"
#include "optoent/measures.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace optoent::scenarios {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string format_number(long double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  // Values representable in double print as doubles so that plain numbers
  // stay short; the rest need the long double range.
  const double d = static_cast<double>(x);
  if (std::isfinite(d) && (d != 0.0 || x == 0.0L) && static_cast<long double>(d) == x) return format_number(d);
  char buf[96];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// JSON reading with field diagnostics

struct Ctx {
  std::string source;
  std::string path;

  Ctx at(const std::string& key) const { return {source, path.empty() ? key : path + "." + key}; }
  Ctx at(std::size_t index) const { return {source, path + "." + std::to_string(index)}; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(source + ": field '" + (path.empty() ? "<root>" : path) + "': " + msg);
  }
};

json parse_document(const std::string& text, const std::string& source) {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_keys(const json& obj, const Ctx& ctx, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) ctx.fail("expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) ctx.at(key).fail("unknown key");
  }
}

double number(const json& v, const Ctx& ctx) {
  if (v.is_number()) return v.get<double>();
  // Strings are accepted so that values like "1e-4" survive hand editing.
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    double out = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return out;
  }
  ctx.fail("expected a number");
}

std::optional<double> opt_number(const json& obj, const char* key, const Ctx& ctx) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return number(obj.at(key), ctx.at(key));
}

bool boolean(const json& v, const Ctx& ctx) {
  if (!v.is_boolean()) ctx.fail("expected true or false");
  return v.get<bool>();
}

std::string string(const json& v, const Ctx& ctx) {
  if (!v.is_string()) ctx.fail("expected a string");
  return v.get<std::string>();
}

long integer(const json& v, const Ctx& ctx) {
  const double d = number(v, ctx);
  if (d != std::floor(d) || std::fabs(d) > 1e15) ctx.fail("expected an integer");
  return static_cast<long>(d);
}

// ---------------------------------------------------------------------------
// scenario sections

SystemParams parse_params(const json& obj, const Ctx& ctx) {
  check_keys(obj, ctx,
             {"g_m", "omega_m", "kappa", "gamma_m", "quality_factor", "n_th", "temperature_k", "mech_freq_hz",
              "q_over_n_th", "gamma_n_th", "n_c"});
  SystemParams p;
  if (auto v = opt_number(obj, "g_m", ctx)) p.g_m = *v;
  if (auto v = opt_number(obj, "omega_m", ctx)) p.omega_m = *v;
  if (auto v = opt_number(obj, "kappa", ctx)) p.kappa = *v;
  if (auto v = opt_number(obj, "n_c", ctx)) p.n_c = *v;

  const auto gamma = opt_number(obj, "gamma_m", ctx);
  const auto quality = opt_number(obj, "quality_factor", ctx);
  const auto n_th = opt_number(obj, "n_th", ctx);
  const auto temperature = opt_number(obj, "temperature_k", ctx);
  const auto freq = opt_number(obj, "mech_freq_hz", ctx);
  const auto ratio = opt_number(obj, "q_over_n_th", ctx);
  const auto gn = opt_number(obj, "gamma_n_th", ctx);

  if (gamma && quality) ctx.fail("give either gamma_m or quality_factor, not both");
  if (temperature.has_value() != freq.has_value()) ctx.fail("temperature_k and mech_freq_hz go together");
  if ((n_th ? 1 : 0) + (temperature ? 1 : 0) + (ratio ? 1 : 0) > 1) {
    ctx.fail("give at most one of n_th, temperature_k/mech_freq_hz, q_over_n_th");
  }

  std::optional<double> g = gamma;
  if (quality) {
    if (!(*quality > 0.0)) ctx.at("quality_factor").fail("must be positive");
    g = p.omega_m / *quality;
  }
  std::optional<double> n = n_th;
  if (temperature) {
    try {
      n = analytic::thermal_occupation(*temperature, 2.0 * std::numbers::pi * *freq);
    } catch (const std::exception& e) {
      ctx.at("temperature_k").fail(e.what());
    }
  }
  if (ratio) {
    if (!g) ctx.at("q_over_n_th").fail("needs gamma_m or quality_factor");
    if (!(*ratio > 0.0)) ctx.at("q_over_n_th").fail("must be positive");
    n = (p.omega_m / *g) / *ratio;
  }
  if (gn) {
    if (g && n) ctx.at("gamma_n_th").fail("over-determined: gamma_m and n_th are both given");
    if (g) {
      n = *gn / *g;
    } else if (n) {
      if (!(*n > 0.0)) ctx.at("gamma_n_th").fail("needs a positive n_th");
      g = *gn / *n;
    } else {
      ctx.at("gamma_n_th").fail("needs gamma_m, quality_factor or n_th");
    }
  }
  if (g) p.gamma_m = *g;
  if (n) p.n_th = *n;
  try {
    p.validate();
  } catch (const ConfigError& e) {
    ctx.fail(e.what());
  }
  return p;
}

struct DriveEntry {
  std::optional<DriveSpec> drive;
  std::optional<double> coupling;
};

DriveEntry parse_drive(const json& obj, const SystemParams& p, const Ctx& ctx) {
  check_keys(obj, ctx, {"amplitude", "detuning", "detuning_over_omega_m", "sideband", "coupling_j"});
  DriveEntry out;
  const auto amp = opt_number(obj, "amplitude", ctx);
  const auto j = opt_number(obj, "coupling_j", ctx);
  if (amp && j) ctx.fail("give either amplitude or coupling_j, not both");
  const auto det = opt_number(obj, "detuning", ctx);
  const auto ratio = opt_number(obj, "detuning_over_omega_m", ctx);
  const bool side = obj.contains("sideband");
  if ((det ? 1 : 0) + (ratio ? 1 : 0) + (side ? 1 : 0) > 1) {
    ctx.fail("give one of detuning, detuning_over_omega_m, sideband");
  }
  std::optional<double> delta = det;
  if (ratio) delta = *ratio * p.omega_m;
  if (side) {
    const std::string s = string(obj.at("sideband"), ctx.at("sideband"));
    if (s == "blue") {
      delta = -p.omega_m;
    } else if (s == "red") {
      delta = p.omega_m;
    } else {
      ctx.at("sideband").fail("expected \"blue\" or \"red\"");
    }
  }
  if (j) out.coupling = *j;
  if (amp || delta) {
    DriveSpec d;
    d.amplitude = amp ? *amp : (j ? *j * p.omega_m / p.g_m : 0.0);
    d.detuning = delta ? *delta : -p.omega_m;
    out.drive = d;
  } else if (j) {
    out.drive = DriveSpec{*j * p.omega_m / p.g_m, 0.0};
    out.drive->detuning = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void parse_integrator(const json& obj, const Ctx& ctx, dynamics::IntegratorConfig& cfg) {
  check_keys(obj, ctx,
             {"method", "precision", "rel_tol", "abs_tol", "oversample", "sample_stride", "rebase_exponent",
              "min_step", "healthy_margin_bits", "base_bits", "growth", "max_bits"});
  if (obj.contains("method")) {
    try {
      cfg.method = dynamics::parse_method(string(obj.at("method"), ctx.at("method")));
    } catch (const ConfigError& e) {
      ctx.at("method").fail(e.what());
    }
  }
  if (obj.contains("precision")) {
    try {
      cfg.precision = PrecisionPolicy::parse(string(obj.at("precision"), ctx.at("precision")));
    } catch (const ConfigError& e) {
      ctx.at("precision").fail(e.what());
    }
  }
  if (auto v = opt_number(obj, "rel_tol", ctx)) cfg.rel_tol = *v;
  if (auto v = opt_number(obj, "abs_tol", ctx)) cfg.abs_tol = *v;
  if (obj.contains("oversample")) cfg.oversample = static_cast<int>(integer(obj.at("oversample"), ctx.at("oversample")));
  if (auto v = opt_number(obj, "sample_stride", ctx)) cfg.sample_stride = *v;
  if (obj.contains("rebase_exponent")) cfg.rebase_exponent = integer(obj.at("rebase_exponent"), ctx.at("rebase_exponent"));
  if (auto v = opt_number(obj, "min_step", ctx)) cfg.min_step = *v;
  if (auto v = opt_number(obj, "healthy_margin_bits", ctx)) cfg.healthy_margin_bits = *v;
  if (cfg.precision.mode == PrecisionMode::Adaptive) {
    if (obj.contains("base_bits")) cfg.precision.base_bits = cfg.precision.bits = integer(obj.at("base_bits"), ctx.at("base_bits"));
    if (auto v = opt_number(obj, "growth", ctx)) cfg.precision.growth = *v;
    if (obj.contains("max_bits")) cfg.precision.max_bits = integer(obj.at("max_bits"), ctx.at("max_bits"));
  } else {
    for (const char* k : {"base_bits", "growth", "max_bits"}) {
      if (obj.contains(k)) ctx.at(k).fail("only meaningful with adaptive precision");
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    ctx.fail(e.what());
  }
}

std::size_t drive_count(dynamics::ModelKind kind) {
  return kind == dynamics::ModelKind::FullTwoMode || kind == dynamics::ModelKind::AsymptoticTwoMode ? 1 : 2;
}

bool asymptotic(dynamics::ModelKind kind) {
  return kind == dynamics::ModelKind::AsymptoticTwoMode || kind == dynamics::ModelKind::AsymptoticThreeMode;
}

ScenarioConfig parse_scenario_json(const json& doc, const Ctx& ctx) {
  if (doc.is_object() && doc.contains("config") && doc.contains("software")) {
    return parse_scenario_json(doc.at("config"), ctx.at("config"));
  }
  check_keys(doc, ctx,
             {"name", "model", "params", "drives", "coupling_j", "noise", "t_end", "integrator", "outputs",
              "analysis", "seed", "monte_carlo", "output", "notes"});
  ScenarioConfig c;
  if (doc.contains("name")) c.name = string(doc.at("name"), ctx.at("name"));
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) ctx.at("name").fail("must be a plain file stem");
  if (!doc.contains("model")) ctx.at("model").fail("missing");
  try {
    c.model = dynamics::parse_model_kind(string(doc.at("model"), ctx.at("model")));
  } catch (const ConfigError& e) {
    ctx.at("model").fail(e.what());
  }
  c.params = doc.contains("params") ? parse_params(doc.at("params"), ctx.at("params")) : SystemParams{};

  std::vector<DriveEntry> entries;
  if (doc.contains("drives")) {
    const json& arr = doc.at("drives");
    if (!arr.is_array()) ctx.at("drives").fail("expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) entries.push_back(parse_drive(arr[i], c.params, ctx.at("drives").at(i)));
  }
  if (doc.contains("coupling_j")) {
    if (!entries.empty()) ctx.at("coupling_j").fail("give drives or coupling_j, not both");
    const json& v = doc.at("coupling_j");
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) entries.push_back({std::nullopt, number(v[i], ctx.at("coupling_j").at(i))});
    } else {
      entries.push_back({std::nullopt, number(v, ctx.at("coupling_j"))});
    }
  }
  const std::size_t want = drive_count(c.model);
  if (entries.size() != want) {
    ctx.at("drives").fail("model " + dynamics::to_string(c.model) + " needs " + std::to_string(want) + " drive(s), got " +
                          std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (asymptotic(c.model)) {
      c.couplings.push_back(e.coupling ? *e.coupling : e.drive->coupling(c.params));
    } else {
      if (!e.drive) ctx.at("drives").at(i).fail("needs an amplitude");
      DriveSpec d = *e.drive;
      if (std::isnan(d.detuning)) d.detuning = i == 0 ? -c.params.omega_m : c.params.omega_m;
      c.drives.push_back(d);
    }
  }

  if (doc.contains("noise")) {
    const Ctx n = ctx.at("noise");
    check_keys(doc.at("noise"), n, {"cavity", "mechanical"});
    if (doc.at("noise").contains("cavity")) c.noise.cavity_noise_on = boolean(doc.at("noise").at("cavity"), n.at("cavity"));
    if (doc.at("noise").contains("mechanical")) {
      c.noise.mechanical_noise_on = boolean(doc.at("noise").at("mechanical"), n.at("mechanical"));
    }
  }
  if (!doc.contains("t_end")) ctx.at("t_end").fail("missing");
  c.t_end = number(doc.at("t_end"), ctx.at("t_end"));
  if (doc.contains("integrator")) parse_integrator(doc.at("integrator"), ctx.at("integrator"), c.integrator);

  if (doc.contains("outputs")) {
    const json& arr = doc.at("outputs");
    if (!arr.is_array()) ctx.at("outputs").fail("expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      try {
        c.outputs.push_back(OutputSpec::parse(string(arr[i], ctx.at("outputs").at(i))));
      } catch (const ConfigError& e) {
        ctx.at("outputs").at(i).fail(e.what());
      }
    }
  } else {
    for (const char* k : {"E_N", "purity", "n_p", "n_m"}) c.outputs.push_back(OutputSpec::parse(k));
  }
  if (doc.contains("analysis")) {
    check_keys(doc.at("analysis"), ctx.at("analysis"), {"window_fraction"});
    if (auto v = opt_number(doc.at("analysis"), "window_fraction", ctx.at("analysis"))) c.window_fraction = *v;
  }
  if (doc.contains("seed")) {
    const long s = integer(doc.at("seed"), ctx.at("seed"));
    if (s < 0) ctx.at("seed").fail("must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("monte_carlo")) {
    const Ctx m = ctx.at("monte_carlo");
    const json& obj = doc.at("monte_carlo");
    check_keys(obj, m, {"trajectories", "dt", "t_end"});
    if (obj.contains("trajectories")) {
      const long n = integer(obj.at("trajectories"), m.at("trajectories"));
      if (n < 0) m.at("trajectories").fail("must be non-negative");
      c.monte_carlo.trajectories = static_cast<std::size_t>(n);
    }
    if (auto v = opt_number(obj, "dt", m)) c.monte_carlo.dt = *v;
    if (auto v = opt_number(obj, "t_end", m)) c.monte_carlo.t_end = *v;
  }
  if (doc.contains("output")) {
    const Ctx o = ctx.at("output");
    check_keys(doc.at("output"), o, {"csv", "sidecar"});
    if (doc.at("output").contains("csv")) c.csv_path = string(doc.at("output").at("csv"), o.at("csv"));
    if (doc.at("output").contains("sidecar")) c.sidecar_path = string(doc.at("output").at("sidecar"), o.at("sidecar"));
  }
  if (doc.contains("notes")) {
    const json& arr = doc.at("notes");
    if (!arr.is_array()) ctx.at("notes").fail("expected an array of strings");
    for (std::size_t i = 0; i < arr.size(); ++i) c.notes.push_back(string(arr[i], ctx.at("notes").at(i)));
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(ctx.source + ": " + e.what());
  }
  return c;
}

json integrator_json(const dynamics::IntegratorConfig& cfg) {
  json j;
  j["method"] = dynamics::to_string(cfg.method);
  j["precision"] = cfg.precision.to_string();
  if (cfg.precision.mode == PrecisionMode::Adaptive) {
    j["base_bits"] = cfg.precision.base_bits;
    j["growth"] = cfg.precision.growth;
    j["max_bits"] = cfg.precision.max_bits;
  }
  j["rel_tol"] = cfg.rel_tol;
  j["abs_tol"] = cfg.abs_tol;
  j["oversample"] = cfg.oversample;
  j["sample_stride"] = cfg.sample_stride;
  j["rebase_exponent"] = cfg.rebase_exponent;
  j["min_step"] = cfg.min_step;
  j["healthy_margin_bits"] = cfg.healthy_margin_bits;
  return j;
}

json scenario_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["model"] = dynamics::to_string(c.model);
  j["params"] = {{"g_m", c.params.g_m},         {"omega_m", c.params.omega_m}, {"kappa", c.params.kappa},
                 {"gamma_m", c.params.gamma_m}, {"n_th", c.params.n_th},       {"n_c", c.params.n_c}};
  json drives = json::array();
  if (asymptotic(c.model)) {
    for (double jj : c.couplings) drives.push_back({{"coupling_j", jj}});
  } else {
    for (const auto& d : c.drives) drives.push_back({{"amplitude", d.amplitude}, {"detuning", d.detuning}});
  }
  j["drives"] = drives;
  j["noise"] = {{"cavity", c.noise.cavity_noise_on}, {"mechanical", c.noise.mechanical_noise_on}};
  j["t_end"] = c.t_end;
  j["integrator"] = integrator_json(c.integrator);
  json outs = json::array();
  for (const auto& o : c.outputs) outs.push_back(o.label());
  j["outputs"] = outs;
  j["analysis"] = {{"window_fraction", c.window_fraction}};
  j["seed"] = c.seed;
  if (c.monte_carlo.trajectories > 0) {
    j["monte_carlo"] = {{"trajectories", c.monte_carlo.trajectories}, {"dt", c.monte_carlo.dt}, {"t_end", c.monte_carlo.t_end}};
  }
  json out = json::object();
  if (!c.csv_path.empty()) out["csv"] = c.csv_path;
  if (!c.sidecar_path.empty()) out["sidecar"] = c.sidecar_path;
  if (!out.empty()) j["output"] = out;
  if (!c.notes.empty()) j["notes"] = c.notes;
  return j;
}

std::filesystem::path resolve(const std::filesystem::path& out_dir, const std::string& p, const std::string& fallback) {
  const std::filesystem::path rel = p.empty() ? std::filesystem::path(fallback) : std::filesystem::path(p);
  return rel.is_absolute() ? rel : out_dir / rel;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> column_labels(const ScenarioConfig& c) {
  std::vector<std::string> cols{"t"};
  for (const auto& o : c.outputs) {
    if (o.kind == "eigs") {
      for (std::size_t k = 1; k <= c.build_model().modes(); ++k) cols.push_back("nu_" + std::to_string(k));
    } else {
      cols.push_back(o.label());
    }
  }
  return cols;
}

std::string trajectory_csv(const ScenarioConfig& c, const dynamics::Trajectory& tr) {
  std::string out;
  const auto cols = column_labels(c);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& s : tr.samples) {
    out += format_number(s.t);
    for (const auto& o : c.outputs) {
      if (o.kind == "E_N") {
        out += "," + format_number(s.measures.e_n);
      } else if (o.kind == "purity") {
        out += "," + format_number(s.measures.purity);
      } else if (o.kind == "log_purity") {
        out += "," + format_number(s.measures.log_purity);
      } else if (o.kind == "n_p") {
        out += "," + format_number(s.measures.n_p);
      } else if (o.kind == "n_m") {
        out += "," + format_number(s.measures.n_m);
      } else if (o.kind == "V") {
        out += "," + format_number(s.covariance.value(o.row - 1, o.col - 1));
      } else if (o.kind == "eigs") {
        for (long double nu : s.measures.symplectic) out += "," + format_number(nu);
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<long double> ode_moments(const dynamics::TrajectorySample& s, std::vector<long double>* cov) {
  std::vector<long double> mean;
  for (double q : s.mean.quadratures) mean.push_back(std::ldexp(static_cast<long double>(q), static_cast<int>(s.mean.scale_exponent)));
  const std::size_t n = s.covariance.dim();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cov->push_back(s.covariance.value(i, j));
  }
  return mean;
}

json monte_carlo_section(const ScenarioConfig& c, const RunOptions& options, const std::filesystem::path& csv_path) {
  const auto model = c.build_model();
  const auto init = initial_state(c.params, static_cast<int>(model.modes()));
  const double t_mc = c.monte_carlo.t_end > 0.0 ? c.monte_carlo.t_end : c.t_end;
  dynamics::MonteCarloConfig mc;
  mc.n_traj = c.monte_carlo.trajectories;
  mc.dt = c.monte_carlo.dt;
  mc.seed = c.seed;
  mc.threads = options.threads;
  const auto est = dynamics::monte_carlo_cross_check(model, init, t_mc, mc);
  dynamics::IntegratorConfig icfg = c.integrator;
  icfg.sample_stride = t_mc;
  const auto tr = dynamics::integrate(model, init, t_mc, icfg);
  std::vector<long double> cov;
  const auto mean = ode_moments(tr.samples.back(), &cov);

  std::string csv = "quantity,ode,monte_carlo,standard_error,bias_estimate,z\n";
  double max_z = 0.0;
  auto row = [&](const std::string& name, long double ode, double est_v, double se, double bias) {
    const double z = se > 0.0 ? std::fabs(est_v - static_cast<double>(ode)) / se : 0.0;
    max_z = std::max(max_z, z);
    csv += name + "," + format_number(ode) + "," + format_number(est_v) + "," + format_number(se) + "," +
           format_number(bias) + "," + format_number(z) + "\n";
  };
  for (std::size_t i = 0; i < mean.size(); ++i) {
    row("mu_" + std::to_string(i + 1), mean[i], est.mean[i], est.mean_se[i], est.mean_bias[i]);
  }
  const std::size_t n = mean.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      row("V_" + std::to_string(i + 1) + "_" + std::to_string(j + 1), cov[i * n + j], est.covariance[i * n + j],
          est.covariance_se[i * n + j], 0.0);
    }
  }
  write_atomically(csv_path, csv);
  return {{"csv", csv_path.filename().string()}, {"trajectories", est.trajectories}, {"dt", est.dt},
          {"t_end", t_mc},                       {"max_z", max_z}};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string OutputSpec::label() const {
  if (kind == "V") return "V_" + std::to_string(row) + "_" + std::to_string(col);
  return kind;
}

OutputSpec OutputSpec::parse(const std::string& token) {
  static const std::regex element(R"(V_?\(?(\d+)[_,](\d+)\)?)");
  std::smatch m;
  if (std::regex_match(token, m, element)) return {"V", std::stoul(m[1].str()), std::stoul(m[2].str())};
  for (const char* k : {"E_N", "purity", "log_purity", "n_p", "n_m", "eigs"}) {
    if (token == k) return {k, 0, 0};
  }
  throw ConfigError("unknown output '" + token + "' (expected E_N, purity, log_purity, n_p, n_m, V_<i>_<j> or eigs)");
}

void ScenarioConfig::validate() const {
  params.validate();
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
  integrator.validate();
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) throw ConfigError("window_fraction must be in (0, 1]");
  const std::size_t dim = 2 * (drive_count(model) == 1 ? 2 : 3);
  if (asymptotic(model) ? couplings.size() != drive_count(model) : drives.size() != drive_count(model)) {
    throw ConfigError("wrong number of drives for model " + dynamics::to_string(model));
  }
  std::set<std::string> seen;
  for (const auto& o : outputs) {
    if (o.kind == "V" && (o.row < 1 || o.col < 1 || o.row > dim || o.col > dim)) {
      throw ConfigError("output " + o.label() + " is outside the " + std::to_string(dim) + "x" + std::to_string(dim) +
                        " covariance matrix (indices are 1-based)");
    }
    if (!seen.insert(o.label()).second) throw ConfigError("output " + o.label() + " requested twice");
  }
  if (monte_carlo.trajectories == 1) throw ConfigError("monte_carlo.trajectories must be 0 or at least 2");
  if (monte_carlo.trajectories > 0 && !(monte_carlo.dt > 0.0)) throw ConfigError("monte_carlo.dt must be positive");
}

dynamics::LinearModel ScenarioConfig::build_model() const {
  switch (model) {
    case dynamics::ModelKind::FullTwoMode:
      return dynamics::build_full_two_mode(params, drives.at(0), noise);
    case dynamics::ModelKind::AsymptoticTwoMode:
      return dynamics::build_asymptotic_two_mode(couplings.at(0), params, noise);
    case dynamics::ModelKind::ThreeModeTwoDrive:
      return dynamics::build_three_mode(params, drives.at(0), drives.at(1), noise);
    case dynamics::ModelKind::AsymptoticThreeMode:
      return dynamics::build_asymptotic_three_mode(couplings.at(0), couplings.at(1), params, noise);
  }
  throw ConfigError("unknown model kind");
}

double ScenarioConfig::coupling() const {
  return asymptotic(model) ? couplings.at(0) : drives.at(0).coupling(params);
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
  return parse_scenario_json(parse_document(text, source), Ctx{source, ""});
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.string());
}

std::string dump_scenario(const ScenarioConfig& config) { return scenario_json(config).dump(2) + "\n"; }

dynamics::Trajectory simulate(const ScenarioConfig& config) {
  config.validate();
  const auto model = config.build_model();
  return dynamics::integrate(model, initial_state(config.params, static_cast<int>(model.modes())), config.t_end,
                             config.integrator);
}

ScenarioResult run_scenario(const ScenarioConfig& input, const RunOptions& options) {
  ScenarioConfig c = input;
  if (options.precision) c.integrator.precision = *options.precision;
  if (options.seed) c.seed = *options.seed;
  c.validate();

  ScenarioResult res;
  res.csv = resolve(options.out_dir, c.csv_path, c.name + ".csv");
  res.sidecar = resolve(options.out_dir, c.sidecar_path, c.name + ".json");

  const auto model = c.build_model();
  try {
    res.trajectory = simulate(c);
  } catch (const dynamics::IntegrationError& e) {
    res.status = "failed";
    res.diagnostic = e.what();
    res.trajectory = e.partial();
  } catch (const NumericalError& e) {
    res.status = "failed";
    res.diagnostic = e.what();
  }
  write_atomically(res.csv, trajectory_csv(c, res.trajectory));

  json side;
  side["software"] = {{"name", "optoent"}, {"version", version()}};
  side["config"] = scenario_json(c);
  side["status"] = res.status;
  if (!res.diagnostic.empty()) side["diagnostic"] = res.diagnostic;
  side["csv"] = res.csv.filename().string();
  side["columns"] = column_labels(c);
  const auto& tr = res.trajectory;
  side["precision"] = {{"policy", c.integrator.precision.to_string()},
                       {"max_bits", tr.max_precision_bits},
                       {"min_margin_bits", tr.min_margin_bits},
                       {"healthy_margin_bits", c.integrator.healthy_margin_bits}};
  side["integration"] = {{"method", dynamics::to_string(c.integrator.method)},
                         {"samples", tr.samples.size()},
                         {"stride", tr.stride},
                         {"steps", tr.steps},
                         {"rejected_steps", tr.rejected_steps},
                         {"channels_built", tr.channels_built}};
  if (!tr.samples.empty()) {
    try {
      res.stats = measures::trajectory_stats(tr.times(), tr.log_negativity(), model.oscillation_period(), c.window_fraction);
      json esd = json::array();
      for (const auto& [a, b] : res.stats->esd_intervals) esd.push_back({a, b});
      side["stats"] = {{"window_fraction", c.window_fraction},
                       {"stabilized_peak", res.stats->stabilized_peak},
                       {"stabilized_mean", res.stats->stabilized_mean},
                       {"peak_count", res.stats->peak_count},
                       {"esd_intervals", esd}};
    } catch (const WindowTooShort& e) {
      side["stats_error"] = e.what();
    }
  }
  if (c.model == dynamics::ModelKind::AsymptoticTwoMode) {
    try {
      side["analytic_e_n"] = analytic::analytic_EN(c.coupling(), c.params.kappa, c.params.gamma_m, c.params.n_th);
    } catch (const DomainError& e) {
      side["analytic_error"] = e.what();
    }
  }
  if (c.monte_carlo.trajectories > 0 && res.status == "ok") {
    try {
      side["monte_carlo"] = monte_carlo_section(c, options, resolve(options.out_dir, "", c.name + "_mc.csv"));
    } catch (const NumericalError& e) {
      side["monte_carlo"] = {{"error", e.what()}};
    }
  }
  write_atomically(res.sidecar, side.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------------------
// sweeps

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::StabilizedPeak: return "stabilized_peak";
    case Statistic::StabilizedMean: return "stabilized_mean";
    case Statistic::Analytic: return "analytic";
    case Statistic::MaxDriftEigenvalue: return "max_drift_eigenvalue";
    case Statistic::FinalValue: return "final_e_n";
  }
  return "?";
}

Statistic parse_statistic(const std::string& text) {
  for (auto s : {Statistic::StabilizedPeak, Statistic::StabilizedMean, Statistic::Analytic,
                 Statistic::MaxDriftEigenvalue, Statistic::FinalValue}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown statistic '" + text +
                    "' (expected stabilized_peak, stabilized_mean, analytic, max_drift_eigenvalue or final_e_n)");
}

namespace {

json* resolve_path(json& doc, const std::string& path) {
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (node->is_array()) {
      std::size_t idx = 0;
      const auto r = std::from_chars(part.data(), part.data() + part.size(), idx);
      if (r.ec != std::errc() || r.ptr != part.data() + part.size() || idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else if (node->is_object()) {
      if (!node->contains(part)) return nullptr;
      node = &(*node)[part];
    } else {
      return nullptr;
    }
  }
  return node;
}

std::vector<double> axis_values(const json& obj, const Ctx& ctx) {
  std::vector<double> v;
  const int forms = (obj.contains("values") ? 1 : 0) + (obj.contains("range") ? 1 : 0) + (obj.contains("linspace") ? 1 : 0) +
                    (obj.contains("logspace") ? 1 : 0);
  if (forms != 1) ctx.fail("give exactly one of values, range, linspace, logspace");
  if (obj.contains("values")) {
    const json& arr = obj.at("values");
    if (!arr.is_array() || arr.empty()) ctx.at("values").fail("expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) v.push_back(number(arr[i], ctx.at("values").at(i)));
    return v;
  }
  const char* key = obj.contains("range") ? "range" : obj.contains("linspace") ? "linspace" : "logspace";
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.size() != 3) ctx.at(key).fail("expected [start, stop, step-or-count]");
  const double a = number(arr[0], ctx.at(key).at(0));
  const double b = number(arr[1], ctx.at(key).at(1));
  const double third = number(arr[2], ctx.at(key).at(2));
  if (std::string(key) == "range") {
    if (!(third > 0.0) || b < a) ctx.at(key).fail("need start <= stop and a positive step");
    const auto n = static_cast<long>(std::floor((b - a) / third * (1.0 + 1e-12) + 1e-9));
    for (long i = 0; i <= n; ++i) v.push_back(a + static_cast<double>(i) * third);
    return v;
  }
  const long n = static_cast<long>(third);
  if (n < 1 || static_cast<double>(n) != third) ctx.at(key).fail("count must be a positive integer");
  if (std::string(key) == "logspace" && !(a > 0.0 && b > 0.0)) ctx.at(key).fail("logspace endpoints must be positive");
  for (long i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    if (std::string(key) == "linspace") {
      v.push_back(i == n - 1 ? b : a + f * (b - a));
    } else {
      v.push_back(i == n - 1 ? b : a * std::pow(b / a, f));
    }
  }
  return v;
}

SweepConfig parse_sweep_json(const json& doc, const Ctx& ctx) {
  check_keys(doc, ctx, {"name", "base", "axes", "statistic", "output", "notes"});
  SweepConfig s;
  if (doc.contains("name")) s.name = string(doc.at("name"), ctx.at("name"));
  if (!doc.contains("base")) ctx.at("base").fail("missing");
  const json& base = doc.at("base");
  if (!base.is_object()) ctx.at("base").fail("expected a scenario object");
  s.base_document = base.dump();
  parse_scenario_json(base, ctx.at("base"));

  if (!doc.contains("axes")) ctx.at("axes").fail("missing");
  const json& axes = doc.at("axes");
  if (!axes.is_array() || axes.empty() || axes.size() > 2) ctx.at("axes").fail("expected one or two axes");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const Ctx a = ctx.at("axes").at(i);
    check_keys(axes[i], a, {"path", "values", "range", "linspace", "logspace"});
    if (!axes[i].contains("path")) a.at("path").fail("missing");
    SweepAxis axis{string(axes[i].at("path"), a.at("path")), axis_values(axes[i], a)};
    s.axes.push_back(std::move(axis));
  }
  if (doc.contains("statistic")) {
    try {
      s.statistic = parse_statistic(string(doc.at("statistic"), ctx.at("statistic")));
    } catch (const ConfigError& e) {
      ctx.at("statistic").fail(e.what());
    }
  }
  if (doc.contains("output")) {
    const Ctx o = ctx.at("output");
    check_keys(doc.at("output"), o, {"csv", "heatmap"});
    if (doc.at("output").contains("csv")) s.csv_path = string(doc.at("output").at("csv"), o.at("csv"));
    if (doc.at("output").contains("heatmap")) s.heatmap_path = string(doc.at("output").at("heatmap"), o.at("heatmap"));
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(ctx.source + ": " + e.what());
  }
  return s;
}

}  // namespace

void SweepConfig::validate() const {
  if (axes.empty() || axes.size() > 2) throw ConfigError("a sweep needs one or two axes");
  json base = json::parse(base_document);
  for (const auto& a : axes) {
    const json* node = resolve_path(base, a.path);
    if (node == nullptr || !node->is_number()) {
      throw ConfigError("axis path '" + a.path + "' does not resolve to a numeric field of the base scenario");
    }
    if (a.values.empty()) throw ConfigError("axis '" + a.path + "' has no values");
  }
}

ScenarioConfig SweepConfig::point(const std::vector<double>& coords) const {
  if (coords.size() != axes.size()) throw ConfigError("point has the wrong number of coordinates");
  json doc = json::parse(base_document);
  for (std::size_t i = 0; i < axes.size(); ++i) *resolve_path(doc, axes[i].path) = coords[i];
  return parse_scenario_json(doc, Ctx{name, "base"});
}

SweepConfig parse_sweep(const std::string& text, const std::string& source) {
  return parse_sweep_json(parse_document(text, source), Ctx{source, ""});
}

SweepConfig load_sweep(const std::filesystem::path& path) { return parse_sweep(read_file(path), path.string()); }

double evaluate_statistic(const ScenarioConfig& config, Statistic statistic) {
  switch (statistic) {
    case Statistic::Analytic:
      return analytic::analytic_EN(config.coupling(), config.params.kappa, config.params.gamma_m, config.params.n_th);
    case Statistic::MaxDriftEigenvalue: {
      const auto model = config.build_model();
      return dynamics::max_real_eigenvalue(model.time_dependent() ? dynamics::averaged_drift(model) : model.drift(0.0));
    }
    case Statistic::FinalValue: {
      const auto tr = simulate(config);
      return tr.samples.back().measures.e_n;
    }
    case Statistic::StabilizedPeak:
    case Statistic::StabilizedMean: {
      const auto tr = simulate(config);
      const auto st = measures::trajectory_stats(tr.times(), tr.log_negativity(), config.build_model().oscillation_period(),
                                                 config.window_fraction);
      return statistic == Statistic::StabilizedPeak ? st.stabilized_peak : st.stabilized_mean;
    }
  }
  throw ConfigError("unknown statistic");
}

SweepResult run_sweep(const SweepConfig& sweep, const RunOptions& options) {
  sweep.validate();
  std::vector<std::vector<double>> grid;
  if (sweep.axes.size() == 1) {
    for (double x : sweep.axes[0].values) grid.push_back({x});
  } else {
    for (double x : sweep.axes[0].values) {
      for (double y : sweep.axes[1].values) grid.push_back({x, y});
    }
  }

  SweepResult res;
  res.csv = resolve(options.out_dir, sweep.csv_path, sweep.name + ".csv");
  if (sweep.axes.size() == 2) res.heatmap = resolve(options.out_dir, sweep.heatmap_path, sweep.name + "_heatmap.csv");
  const std::filesystem::path parts = res.csv.parent_path() / ("." + sweep.name + ".points");
  std::filesystem::create_directories(parts);

  auto part_file = [&](std::size_t i) { return parts / ("point_" + std::to_string(i) + ".csv"); };
  auto csv_field = [](std::string s) {
    for (auto& ch : s) {
      if (ch == '"') ch = '\'';
      if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return "\"" + s + "\"";
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      double value = std::numeric_limits<double>::quiet_NaN();
      std::string reason;
      try {
        ScenarioConfig c = sweep.point(grid[i]);
        if (options.precision) c.integrator.precision = *options.precision;
        if (options.seed) c.seed = *options.seed;
        value = evaluate_statistic(c, sweep.statistic);
      } catch (const std::exception& e) {
        reason = e.what();
      }
      std::string row;
      for (double x : grid[i]) row += format_number(x) + ",";
      row += format_number(value) + "," + (reason.empty() ? std::string() : csv_field(reason)) + "\n";
      write_atomically(part_file(i), row);
    }
  };
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, grid.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv;
  for (const auto& a : sweep.axes) csv += a.path + ",";
  csv += to_string(sweep.statistic) + ",reason\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string row = read_file(part_file(i));
    csv += row;
    SweepPoint p;
    p.coords = grid[i];
    std::size_t pos = 0;
    for (std::size_t k = 0; k < grid[i].size(); ++k) pos = row.find(',', pos) + 1;
    const std::size_t end = row.find(',', pos);
    const std::string v = row.substr(pos, end - pos);
    p.value = v == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(v);
    p.reason = row.substr(end + 1);
    while (!p.reason.empty() && (p.reason.back() == '\n' || p.reason.back() == '"')) p.reason.pop_back();
    if (!p.reason.empty() && p.reason.front() == '"') p.reason.erase(0, 1);
    if (std::isnan(p.value)) ++res.failures;
    res.points.push_back(std::move(p));
  }
  write_atomically(res.csv, csv);
  std::filesystem::remove_all(parts);

  if (sweep.axes.size() == 2) {
    const auto& ax = sweep.axes[0];
    const auto& ay = sweep.axes[1];
    std::string hm = ax.path + "\\" + ay.path;
    for (double y : ay.values) hm += "," + format_number(y);
    hm += "\n";
    for (std::size_t i = 0; i < ax.values.size(); ++i) {
      hm += format_number(ax.values[i]);
      for (std::size_t j = 0; j < ay.values.size(); ++j) hm += "," + format_number(res.points[i * ay.values.size() + j].value);
      hm += "\n";
    }
    write_atomically(res.heatmap, hm);
  }
  return res;
}

}  // namespace optoent::scenarios
