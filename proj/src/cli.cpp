#include "pertlab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/exact.hpp"
#include "pertlab/io.hpp"
#include "pertlab/kernels.hpp"
#include "pertlab/model.hpp"
#include "pertlab/sim.hpp"
#include "pertlab/thermo.hpp"
#include "pertlab/waves.hpp"

namespace pertlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  json cfg;
  json params;
  json resolved;  // parameters with every default made explicit
  fs::path base_dir;
  fs::path out_dir;
  int threads = 1;
  json inputs = json::array();
  std::vector<fs::path> outputs;
  json extra = json::object();
  std::string summary;
};

template <class T>
T param(Context& ctx, const std::string& key, const T& fallback) {
  T value = ctx.params.contains(key) ? ctx.params.at(key).get<T>() : fallback;
  ctx.resolved[key] = value;
  return value;
}

template <class T>
T required(Context& ctx, const std::string& key) {
  if (!ctx.params.contains(key)) throw ConfigError("missing parameter '" + key + "' for mode " + ctx.cfg.value("mode", ""));
  T value = ctx.params.at(key).get<T>();
  ctx.resolved[key] = value;
  return value;
}

fs::path resolve(const Context& ctx, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? ctx.base_dir / path : path;
}

std::string record_input(Context& ctx, const fs::path& path) {
  const std::string text = io::read_text(path);
  const std::string hash = io::fnv1a_hex(text);
  ctx.inputs.push_back({{"path", path.string()}, {"fnv1a64", hash}});
  return text;
}

struct LoadedModel {
  ModelSpec spec;
  std::string hash;
};

LoadedModel load_model(Context& ctx) {
  if (!ctx.cfg.contains("model")) throw ConfigError("config needs a 'model' path");
  const fs::path path = resolve(ctx, ctx.cfg.at("model").get<std::string>());
  if (!fs::exists(path)) throw ConfigError("model file '" + path.string() + "' does not exist");
  const std::string text = record_input(ctx, path);
  return {parse_model_spec(text, path.string()), io::fnv1a_hex(text)};
}

Profile profile_param(Context& ctx, const std::string& key) {
  if (!ctx.params.contains(key)) {
    ctx.resolved[key] = {{"shape", "zero"}, {"amplitude", 0.0}};
    return Profile::parse("zero", 0.0);
  }
  const json& j = ctx.params.at(key);
  Profile p = j.is_string() ? Profile::parse(j.get<std::string>(), 1.0)
                            : Profile::parse(j.at("shape").get<std::string>(), j.value("amplitude", 1.0));
  ctx.resolved[key] = {{"shape", p.name()}, {"amplitude", p.amplitude}};
  return p;
}

std::vector<double> times_param(Context& ctx, bool include_zero_default) {
  std::vector<double> times;
  if (ctx.params.contains("times")) {
    times = ctx.params.at("times").get<std::vector<double>>();
  } else if (ctx.params.contains("t_end")) {
    const double t_end = ctx.params.at("t_end").get<double>();
    const int points = ctx.params.value("points", 20);
    if (points < 1) throw ConfigError("'points' must be positive");
    for (int i = 0; i < points; ++i)
      times.push_back(include_zero_default ? t_end * i / std::max(1, points - 1) : t_end * (i + 1) / points);
  } else {
    throw ConfigError("missing 'times' (or 't_end' with 'points') for mode " + ctx.cfg.value("mode", ""));
  }
  if (times.empty()) throw ConfigError("'times' must not be empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) throw ConfigError("times must be non-negative");
    if (i > 0 && times[i] <= times[i - 1]) throw ConfigError("times must be strictly increasing");
  }
  ctx.resolved["times"] = times;
  return times;
}

double beta_param(Context& ctx) {
  const double beta = required<double>(ctx, "beta");
  if (!(beta > 0.0 && beta < 0.2))
    throw ConfigError("beta = " + std::to_string(beta) + " violates the bound beta in (0, 1/5)");
  return beta;
}

std::vector<std::uint64_t> seeds_from(const Context& ctx, const RunOptions& options) {
  std::vector<std::uint64_t> seeds;
  const json s = ctx.cfg.contains("seeds") ? ctx.cfg.at("seeds") : json{{"start", 1}, {"count", 1}};
  if (s.is_array()) {
    for (const auto& x : s) seeds.push_back(x.get<std::uint64_t>());
  } else {
    const std::uint64_t start = s.value("start", std::uint64_t{1});
    const std::uint64_t count = s.value("count", std::uint64_t{1});
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(start + i);
  }
  if (options.seed_override) {
    const std::size_t count = std::max<std::size_t>(1, seeds.size());
    seeds.clear();
    for (std::size_t i = 0; i < count; ++i) seeds.push_back(options.seed + i);
  }
  return seeds;
}

void write_csv(Context& ctx, const std::string& name, const std::string& schema,
               std::vector<std::pair<std::string, std::string>> meta, const std::string& body) {
  meta.insert(meta.begin(), {"generator", std::string("pertlab ") + kVersion});
  meta.insert(meta.begin(), {"schema", schema});
  std::string text;
  for (const auto& [k, v] : meta) text += "# " + k + ": " + v + "\n";
  text += body;
  const fs::path path = ctx.out_dir / name;
  io::write_atomic(path, text);
  ctx.outputs.push_back(path);
}

void write_text(Context& ctx, const std::string& name, const std::string& text) {
  const fs::path path = ctx.out_dir / name;
  io::write_atomic(path, text);
  ctx.outputs.push_back(path);
}

std::string num(double x) { return io::format_double(x); }

json eigen_json(const EigenStructure& e) {
  return {{"lambda", e.lambda}, {"mu", e.mu}, {"r", {e.r(0), e.r(1)}}, {"s", {e.s(0), e.s(1)}},
          {"l", {e.l(0), e.l(1)}}, {"m", {e.m(0), e.m(1)}}};
}

json coeffs_json(const GeoCoeffs& c) {
  return {{"a1", c.a1},   {"a2", c.a2},   {"b1", c.b1},   {"b2", c.b2},           {"a2n", c.a2n},
          {"a3", c.a3},   {"b2n", c.b2n}, {"b3", c.b3},   {"c_sigma", c.c_sigma}, {"c_delta", c.c_delta},
          {"frame_discrepancy", c.frame_discrepancy}, {"genuinely_nonlinear", c.genuinely_nonlinear()}};
}

// ---- modes ---------------------------------------------------------------

void mode_validate(Context& ctx) {
  const LoadedModel m = load_model(ctx);
  const auto sizes = param<std::vector<int>>(ctx, "sizes", {3, 4});
  const double tol = param<double>(ctx, "tolerance", 1e-10);
  const ValidationReport rep = validate_model(m.spec, sizes, tol);
  write_text(ctx, "validation.json", rep.to_json());
  write_text(ctx, "validation.txt", rep.to_text());
  ctx.extra["valid"] = rep.ok();
  ctx.summary = rep.to_text();
  if (!rep.ok()) {
    std::string why;
    for (const auto& v : rep.violations) why += (why.empty() ? "" : "; ") + v;
    throw InvariantError("rates", "model fails validation: " + why);
  }
}

void mode_thermo_table(Context& ctx) {
  const LoadedModel m = load_model(ctx);
  const int grid = param<int>(ctx, "grid", 9);
  const double margin = param<double>(ctx, "margin", 0.05);
  if (grid < 1) throw ConfigError("'grid' must be positive");
  const FluxModel model(m.spec);
  const PhysicalDomain& dom = model.domain();
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  for (const auto& p : dom.vertices) {
    umin = std::min(umin, p(0));
    umax = std::max(umax, p(0));
    vmin = std::min(vmin, p(1));
    vmax = std::max(vmax, p(1));
  }
  std::string body = "u,v,theta,tau,S,Phi,Psi,D11,D12,D21,D22,lambda,mu,onsager\n";
  int rows = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double u = umin + (umax - umin) * (i + 1) / (grid + 1);
      const double v = vmin + (vmax - vmin) * (j + 1) / (grid + 1);
      if (!dom.contains_interior(u, v, margin)) continue;
      const CanonicalPoint cp = invert_densities(m.spec, u, v);
      const auto [phi, psi] = model.macro_flux(u, v);
      const Eigen::Matrix2d D = model.flux_jacobian(u, v);
      double lambda = std::nan(""), mu = std::nan("");
      try {
        const EigenStructure e = eigen_structure(D);
        lambda = e.lambda;
        mu = e.mu;
      } catch (const DomainError&) {
      }
      body += num(u) + ',' + num(v) + ',' + num(cp.theta) + ',' + num(cp.tau) + ',' + num(entropy_S(m.spec, u, v)) +
              ',' + num(phi) + ',' + num(psi) + ',' + num(D(0, 0)) + ',' + num(D(0, 1)) + ',' + num(D(1, 0)) + ',' +
              num(D(1, 1)) + ',' + num(lambda) + ',' + num(mu) + ',' + num(model.onsager_residual(cp.theta, cp.tau)) +
              '\n';
      ++rows;
    }
  }
  write_csv(ctx, "thermo.csv", "pertlab.thermo/1", {{"model_fnv1a64", m.hash}}, body);
  ctx.summary = "thermo table: " + std::to_string(rows) + " interior points";
}

struct WaveSetup {
  double u0, v0;
  Profile u_star, v_star;
  int cells;
};

WaveSetup wave_setup(Context& ctx) {
  WaveSetup w;
  w.u0 = required<double>(ctx, "u0");
  w.v0 = required<double>(ctx, "v0");
  w.u_star = profile_param(ctx, "u_star");
  w.v_star = profile_param(ctx, "v_star");
  w.cells = param<int>(ctx, "wave_cells", 1024);
  return w;
}

void mode_waves_solve(Context& ctx) {
  const LoadedModel m = load_model(ctx);
  const WaveSetup w = wave_setup(ctx);
  const std::vector<double> times = times_param(ctx, true);
  const FluxModel model(m.spec);
  const WavePrediction pred(model, w.u0, w.v0, w.u_star, w.v_star, w.cells, times);
  std::string body = "t,x,sigma,delta\n";
  json corrections = json::array();
  for (std::size_t k = 0; k < pred.times().size(); ++k) {
    const WaveField& f = pred.field(k);
    for (int i = 0; i < f.grid.cells; ++i)
      body += num(f.time) + ',' + num(f.grid.center(i)) + ',' + num(f.sigma[static_cast<std::size_t>(i)]) + ',' +
              num(f.delta[static_cast<std::size_t>(i)]) + '\n';
    const auto [ms, md] = pred.correction(k).max_abs();
    corrections.push_back({{"t", f.time}, {"max_abs_sigma_bar", ms}, {"max_abs_delta_bar", md}});
  }
  write_csv(ctx, "waves.csv", "pertlab.waves/1",
            {{"model_fnv1a64", m.hash}, {"u0", num(w.u0)}, {"v0", num(w.v0)}, {"cells", std::to_string(w.cells)}}, body);
  const json geo = {{"schema", "pertlab.geo/1"},
                    {"eigen", eigen_json(pred.eigen())},
                    {"coefficients", coeffs_json(pred.coeffs())},
                    {"shock_time", pred.shock_time()},
                    {"sigma_steps", pred.sigma_solution().steps},
                    {"delta_steps", pred.delta_solution().steps},
                    {"max_mass_change", std::max(pred.sigma_solution().max_mass_change,
                                                 pred.delta_solution().max_mass_change)},
                    {"corrections", corrections}};
  write_text(ctx, "geo.json", geo.dump(2) + "\n");
  ctx.summary = "lambda=" + num(pred.eigen().lambda) + " mu=" + num(pred.eigen().mu) +
                " shock_time=" + num(pred.shock_time());
}

struct Study {
  std::vector<ResidualReport> reports;
};

std::vector<TestFunction> tests_param(Context& ctx) {
  const auto names = param<std::vector<std::string>>(ctx, "test_functions", {"one", "cos", "sin"});
  std::vector<TestFunction> tests;
  for (const auto& n : names) tests.push_back(TestFunction::parse(n));
  if (tests.empty()) throw ConfigError("'test_functions' must not be empty");
  return tests;
}

void run_study(Context& ctx, const RunOptions& options, std::vector<int> sizes) {
  const LoadedModel m = load_model(ctx);
  const double beta = beta_param(ctx);
  const WaveSetup w = wave_setup(ctx);
  const std::vector<double> times = times_param(ctx, false);
  const std::vector<TestFunction> tests = tests_param(ctx);
  const bool check_cache = param<bool>(ctx, "check_cache", false);
  const std::vector<std::uint64_t> seeds = seeds_from(ctx, options);
  ctx.resolved["seeds"] = seeds;

  const FluxModel model(m.spec);
  const WavePrediction pred(model, w.u0, w.v0, w.u_star, w.v_star, w.cells, times);

  std::string samples = "n,seed,t,g,res_u,res_v\n";
  std::string summary;
  std::string trend = "n,mean_abs_u,mean_abs_v\n";
  std::vector<std::pair<double, double>> overall;
  json events = json::object();
  for (int n : sizes) {
    SimParams p;
    p.n = n;
    p.beta = beta;
    p.t_end = times.back();
    p.u0 = w.u0;
    p.v0 = w.v0;
    p.u_star = w.u_star;
    p.v_star = w.v_star;
    ExperimentOptions eo;
    eo.wave_cells = w.cells;
    eo.threads = ctx.threads;
    eo.check_cache = check_cache;
    const ResidualReport rep = run_experiment(m.spec, p, pred, seeds, tests, eo);
    const std::string sb = rep.samples_csv_body();
    samples += sb.substr(sb.find('\n') + 1);
    const std::string ab = rep.aggregates_csv_body();
    summary += summary.empty() ? ab : ab.substr(ab.find('\n') + 1);
    long long total = 0;
    for (long long e : rep.events_per_seed) total += e;
    events[std::to_string(n)] = total;
    overall.push_back(rep.overall_mean_abs());
    trend += std::to_string(n) + ',' + num(overall.back().first) + ',' + num(overall.back().second) + '\n';
  }
  if (summary.empty())
    summary = "n,t,g,count,mean_u,stderr_u,mean_v,stderr_v,mean_abs_u,stderr_abs_u,mean_abs_v,stderr_abs_v\n";
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"model_fnv1a64", m.hash}, {"beta", num(beta)}, {"u0", num(w.u0)}, {"v0", num(w.v0)},
      {"rng", Rng::name}};
  write_csv(ctx, "residuals.csv", "pertlab.residuals/1", meta, samples);
  write_csv(ctx, "residual_summary.csv", "pertlab.residual_summary/1", meta, summary);
  ctx.extra["rng"] = Rng::name;
  ctx.extra["events"] = events;
  ctx.extra["shock_time"] = pred.shock_time();
  if (sizes.size() > 1) {
    write_csv(ctx, "trend.csv", "pertlab.trend/1", meta, trend);
    bool decreasing = true;
    for (std::size_t i = 1; i < overall.size(); ++i)
      decreasing = decreasing && overall[i].first < overall[i - 1].first && overall[i].second < overall[i - 1].second;
    const bool halved = !overall.empty() && overall.back().first < 0.5 * overall.front().first &&
                        overall.back().second < 0.5 * overall.front().second;
    ctx.extra["monotone_decrease"] = decreasing;
    ctx.extra["halved"] = halved;
  }
  ctx.summary = trend;
}

void mode_simulate(Context& ctx, const RunOptions& options) {
  run_study(ctx, options, {required<int>(ctx, "n")});
}

void mode_experiment(Context& ctx, const RunOptions& options) {
  std::vector<int> sizes;
  if (ctx.params.contains("n") && ctx.params.at("n").is_array())
    sizes = required<std::vector<int>>(ctx, "n");
  else
    sizes = {required<int>(ctx, "n")};
  run_study(ctx, options, sizes);
}

void mode_exact_entropy(Context& ctx) {
  const LoadedModel m = load_model(ctx);
  const int n = required<int>(ctx, "n");
  const double beta = beta_param(ctx);
  const WaveSetup w = wave_setup(ctx);
  std::vector<double> times = times_param(ctx, true);
  if (times.front() != 0.0) times.insert(times.begin(), 0.0);
  const FluxModel model(m.spec);
  const WavePrediction pred(model, w.u0, w.v0, w.u_star, w.v_star, w.cells, times);
  const std::vector<EntropyRow> rows = entropy_trajectory(m.spec, n, beta, pred);
  write_csv(ctx, "entropy.csv", "pertlab.entropy/1",
            {{"model_fnv1a64", m.hash}, {"n", std::to_string(n)}, {"beta", num(beta)}}, entropy_csv_body(rows));
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].H_pi <= rows[i - 1].H_pi + 1e-13;
  ctx.extra["H_pi_non_increasing"] = monotone;
  ctx.summary = "entropy trajectory: " + std::to_string(rows.size()) + " times";
}

void mode_gap_scan(Context& ctx) {
  const LoadedModel m = load_model(ctx);
  const int lmin = param<int>(ctx, "l_min", 2);
  const int lmax = param<int>(ctx, "l_max", 8);
  const auto budget = param<std::size_t>(ctx, "dim_budget", 20000);
  const GapReport rep = gap_scaling_report(m.spec, lmin, lmax, budget, ctx.threads);
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"model_fnv1a64", m.hash},
      {"note", "W is the empirical maximum over the tested range; larger l is an extrapolation"}};
  write_csv(ctx, "gap.csv", "pertlab.gap/1", meta, rep.entries_csv_body());
  write_csv(ctx, "gap_summary.csv", "pertlab.gap_summary/1", meta, rep.summary_csv_body());
  ctx.extra["slope"] = rep.slope;
  ctx.extra["spread"] = rep.spread;
  ctx.extra["bounded"] = rep.bounded;
  ctx.extra["partial"] = rep.partial;
  ctx.extra["violations"] = rep.violations;
  ctx.summary = "W spread " + num(rep.spread) + ", slope " + num(rep.slope) + (rep.bounded ? ", bounded" : ", NOT bounded");
  if (!rep.violations.empty() && !rep.partial)
    throw InvariantError("irreducibility", "gap scan flagged: " + rep.violations.front());
}

void mode_synthesize(Context& ctx) {
  const std::string problem_path = required<std::string>(ctx, "problem");
  const fs::path path = resolve(ctx, problem_path);
  const std::string text = record_input(ctx, path);
  const std::string obj = param<std::string>(ctx, "objective", "max-min");
  SynthesisObjective objective;
  if (obj == "max-min") objective = SynthesisObjective::max_min_rate;
  else if (obj == "none") objective = SynthesisObjective::none;
  else throw ConfigError("objective must be 'max-min' or 'none'");
  const SynthesisProblem problem = parse_synthesis_problem(text, path.string());
  const std::vector<Transition> rates = synthesize_rates(problem, objective);
  const ModelSpec spec = ModelSpec::create(problem.labels, problem.zeta, problem.eta, problem.base_measure, rates);
  write_text(ctx, "synthesized.model",
             format_model_spec(spec, "synthesized from " + path.filename().string() + " (objective " + obj + ")"));
  ctx.summary = "synthesized " + std::to_string(spec.nonzero_rate_count()) + " positive rates";
}

// ---- plotdata ------------------------------------------------------------

void plot_row(std::string& out, const std::string& series, const std::string& x, const std::string& y,
              const std::string& err) {
  out += series + ',' + x + ',' + y + ',' + err + '\n';
}

}  // namespace

std::string emit_plotdata(const std::vector<std::string>& csv_texts) {
  std::string out = "# schema: pertlab.plotdata/1\nseries,x,y,stderr\n";
  for (const std::string& text : csv_texts) {
    const io::CsvDocument doc = io::CsvDocument::parse(text);
    const std::string schema = doc.meta_value("schema");
    if (schema == "pertlab.residual_summary/1") {
      const auto n = doc.column("n"), t = doc.column("t"), g = doc.column("g"), c = doc.column("count");
      for (const auto& r : doc.rows) {
        const std::string base = "g=" + r[g] + ";n=" + r[n];
        for (const char* comp : {"u", "v"}) {
          const std::string cs(comp);
          plot_row(out, base + ";component=" + cs + ";stat=mean", r[t], r[doc.column("mean_" + cs)],
                   r[doc.column("stderr_" + cs)]);
          plot_row(out, base + ";component=" + cs + ";stat=mean_abs", r[t], r[doc.column("mean_abs_" + cs)],
                   r[doc.column("stderr_abs_" + cs)]);
        }
        plot_row(out, base + ";stat=count", r[t], r[c], "0");
      }
    } else if (schema == "pertlab.residuals/1") {
      const auto n = doc.column("n"), s = doc.column("seed"), t = doc.column("t"), g = doc.column("g");
      const auto ru = doc.column("res_u"), rv = doc.column("res_v");
      for (const auto& r : doc.rows) {
        const std::string base = "g=" + r[g] + ";n=" + r[n] + ";seed=" + r[s];
        plot_row(out, base + ";component=u", r[t], r[ru], "0");
        plot_row(out, base + ";component=v", r[t], r[rv], "0");
      }
    } else if (schema == "pertlab.entropy/1") {
      const auto t = doc.column("t");
      for (const auto& r : doc.rows)
        for (const char* col : {"H_nu", "H_nutilde", "H_pi"}) plot_row(out, col, r[t], r[doc.column(col)], "0");
    } else if (schema == "pertlab.gap/1") {
      const auto l = doc.column("l"), z = doc.column("Z"), nn = doc.column("N");
      for (const auto& r : doc.rows) {
        const std::string base = "Z=" + r[z] + ";N=" + r[nn] + ";dim=" + r[doc.column("dim")];
        plot_row(out, base + ";stat=gap", r[l], r[doc.column("gap")], "0");
        plot_row(out, base + ";stat=W", r[l], r[doc.column("W")], "0");
      }
    } else if (schema == "pertlab.gap_summary/1") {
      const auto l = doc.column("l"), w = doc.column("W");
      for (const auto& r : doc.rows) plot_row(out, "W", r[l], r[w], "0");
    } else if (schema == "pertlab.trend/1") {
      const auto n = doc.column("n");
      for (const auto& r : doc.rows) {
        plot_row(out, "mean_abs_u", r[n], r[doc.column("mean_abs_u")], "0");
        plot_row(out, "mean_abs_v", r[n], r[doc.column("mean_abs_v")], "0");
      }
    } else if (schema == "pertlab.waves/1") {
      const auto t = doc.column("t"), x = doc.column("x");
      for (const auto& r : doc.rows) {
        plot_row(out, "sigma;t=" + r[t], r[x], r[doc.column("sigma")], "0");
        plot_row(out, "delta;t=" + r[t], r[x], r[doc.column("delta")], "0");
      }
    } else {
      throw ConfigError("plotdata: unsupported or missing schema '" + schema + "'");
    }
  }
  return out;
}

RunResult run_config(const std::string& json_text, const fs::path& base_dir, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  Context ctx;
  try {
    ctx.cfg = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!ctx.cfg.is_object()) throw ConfigError("config must be a JSON object");
  if (!ctx.cfg.contains("mode")) throw ConfigError("config needs a 'mode'");
  const std::string mode = ctx.cfg.at("mode").get<std::string>();
  ctx.params = ctx.cfg.value("params", json::object());
  ctx.resolved = json::object();
  ctx.base_dir = base_dir;
  ctx.threads = std::max(1, options.threads);
  ctx.out_dir = !options.out_override.empty() ? options.out_override : fs::path(ctx.cfg.value("out", "pertlab_out"));

  try {
    if (mode == "validate") mode_validate(ctx);
    else if (mode == "thermo-table") mode_thermo_table(ctx);
    else if (mode == "waves-solve") mode_waves_solve(ctx);
    else if (mode == "simulate") mode_simulate(ctx, options);
    else if (mode == "experiment") mode_experiment(ctx, options);
    else if (mode == "exact-entropy") mode_exact_entropy(ctx);
    else if (mode == "gap-scan") mode_gap_scan(ctx);
    else if (mode == "synthesize") mode_synthesize(ctx);
    else
      throw ConfigError("unknown mode '" + mode +
                        "' (validate, thermo-table, waves-solve, simulate, exact-entropy, gap-scan, experiment, "
                        "synthesize)");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad parameter block: ") + e.what());
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json outputs = json::array();
  for (const auto& p : ctx.outputs) outputs.push_back(p.filename().string());
  const json manifest = {{"schema", "pertlab.manifest/1"},
                         {"version", kVersion},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)},
                         {"kernels", std::string(kernels::isa_name(kernels::active_isa()))},
                         {"mode", mode},
                         {"config", ctx.cfg},
                         {"resolved_params", ctx.resolved},
                         {"inputs", ctx.inputs},
                         {"outputs", outputs},
                         {"threads", ctx.threads},
                         {"wall_time_s", wall},
                         {"finished_unix", static_cast<long long>(std::time(nullptr))},
                         {"results", ctx.extra}};
  io::write_atomic(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");

  RunResult res;
  res.out_dir = ctx.out_dir;
  res.outputs = ctx.outputs;
  res.outputs.push_back(ctx.out_dir / "manifest.json");
  res.summary = ctx.summary;
  return res;
}

namespace {

std::string profile_flag_json(const std::string& s) {
  const auto colon = s.find(':');
  const std::string shape = s.substr(0, colon);
  const double amp = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
  return json{{"shape", shape}, {"amplitude", amp}}.dump();
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pertlab: small perturbations of two-component lattice gases"};
  app.fallthrough();  // global flags may follow the subcommand
  app.require_subcommand(1);
  RunOptions options;
  options.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out_dir;
  app.add_option("--threads", options.threads, "worker threads for seeds / sectors")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", options.seed, "base seed (overrides the config seed list start)");
  app.add_option("--out", out_dir, "output directory");

  json cfg = json::object();
  json params = json::object();
  std::string config_path, model_path, problem_path, u_star = "zero", v_star = "zero", objective = "max-min";
  std::vector<std::string> inputs;
  std::vector<int> sizes{3, 4};
  std::vector<double> times;
  double u0 = 0, v0 = 0, beta = 0.1, t_end = 0.3;
  int grid = 9, cells = 1024, n = 5, points = 20, lmin = 2, lmax = 8;

  auto* validate = app.add_subcommand("validate", "check conditions (A)-(C) and stationarity");
  validate->add_option("--model", model_path)->required();
  validate->add_option("--sizes", sizes)->delimiter(',');

  auto* thermo = app.add_subcommand("thermo-table", "tabulate duals, entropy, fluxes and Jacobians");
  thermo->add_option("--model", model_path)->required();
  thermo->add_option("--grid", grid);

  auto add_wave_opts = [&](CLI::App* sub) {
    sub->add_option("--u0", u0)->required();
    sub->add_option("--v0", v0)->required();
    sub->add_option("--u-star", u_star, "profile shape[:amplitude], shape in zero|one|cos|sin");
    sub->add_option("--v-star", v_star);
    sub->add_option("--cells", cells);
  };
  auto* waves = app.add_subcommand("waves-solve", "solve the two Burgers waves and corrections");
  waves->add_option("--model", model_path)->required();
  add_wave_opts(waves);
  waves->add_option("--times", times)->delimiter(',')->required();

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo residual study from an experiment config");
  simulate->add_option("--config", config_path)->required()->check(CLI::ExistingFile);

  auto* entropy = app.add_subcommand("exact-entropy", "exact relative-entropy trajectory on a tiny torus");
  entropy->add_option("--model", model_path)->required();
  entropy->add_option("--n", n);
  entropy->add_option("--beta", beta);
  add_wave_opts(entropy);
  entropy->add_option("--t-end", t_end);
  entropy->add_option("--points", points);

  auto* gap = app.add_subcommand("gap-scan", "spectral gaps of the block dynamics over all sectors");
  gap->add_option("--model", model_path)->required();
  gap->add_option("--l-min", lmin);
  gap->add_option("--l-max", lmax);

  auto* synth = app.add_subcommand("synthesize", "find rates satisfying the cyclic condition on a support");
  synth->add_option("--problem", problem_path)->required();
  synth->add_option("--objective", objective)->check(CLI::IsMember({"max-min", "none"}));

  auto* plot = app.add_subcommand("plotdata", "reshape report CSVs into long format");
  plot->add_option("--input", inputs)->required();

  auto* run = app.add_subcommand("run", "execute a JSON experiment config");
  run->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  options.seed_override = seed_opt->count() > 0;
  if (!out_dir.empty()) options.out_override = out_dir;

  try {
    fs::path base = fs::current_path();
    std::string text;
    if (plot->parsed()) {
      std::vector<std::string> texts;
      for (const auto& p : inputs) texts.push_back(io::read_text(p));
      const fs::path dest = (out_dir.empty() ? fs::path("pertlab_out") : fs::path(out_dir)) / "plotdata.csv";
      io::write_atomic(dest, emit_plotdata(texts));
      out << "wrote " << dest.string() << "\n";
      return kOk;
    }
    if (run->parsed() || simulate->parsed()) {
      if (!fs::exists(config_path)) throw ConfigError("config file '" + config_path + "' does not exist");
      text = io::read_text(config_path);
      base = fs::absolute(config_path).parent_path();
      if (simulate->parsed()) {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
        if (!j.contains("mode")) j["mode"] = "simulate";
        if (j["mode"] != "simulate" && j["mode"] != "experiment")
          throw ConfigError("simulate expects a config with mode 'simulate' or 'experiment'");
        text = j.dump();
      }
    } else {
      if (!model_path.empty()) cfg["model"] = fs::absolute(model_path).string();
      if (validate->parsed()) {
        cfg["mode"] = "validate";
        params["sizes"] = sizes;
      } else if (thermo->parsed()) {
        cfg["mode"] = "thermo-table";
        params["grid"] = grid;
      } else if (waves->parsed() || entropy->parsed()) {
        cfg["mode"] = waves->parsed() ? "waves-solve" : "exact-entropy";
        params["u0"] = u0;
        params["v0"] = v0;
        params["u_star"] = json::parse(profile_flag_json(u_star));
        params["v_star"] = json::parse(profile_flag_json(v_star));
        params["wave_cells"] = cells;
        if (waves->parsed()) {
          params["times"] = times;
        } else {
          params["n"] = n;
          params["beta"] = beta;
          params["t_end"] = t_end;
          params["points"] = points;
        }
      } else if (gap->parsed()) {
        cfg["mode"] = "gap-scan";
        params["l_min"] = lmin;
        params["l_max"] = lmax;
      } else if (synth->parsed()) {
        cfg["mode"] = "synthesize";
        params["problem"] = fs::absolute(problem_path).string();
        params["objective"] = objective;
      }
      cfg["params"] = params;
      text = cfg.dump();
    }
    const RunResult res = run_config(text, base, options);
    if (!res.summary.empty()) out << res.summary << (res.summary.back() == '\n' ? "" : "\n");
    for (const auto& p : res.outputs) out << "wrote " << p.string() << "\n";
    return kOk;
  } catch (const DomainError& e) {
    err << "domain error [" << e.guard() << "]: " << e.what() << "\n";
    return kDomainError;
  } catch (const pertlab::ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvariantError& e) {
    err << "invariant violated [" << e.field() << "]: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace pertlab::cli
