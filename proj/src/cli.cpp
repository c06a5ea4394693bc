#include "fowler/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fowler/errors.hpp"
#include "fowler/io.hpp"

namespace fowler {

namespace {

using io::json;
namespace fs = std::filesystem;

// Effective configuration: defaults, then the JSON config file, then flags.
struct RunConfig {
  int N = 3;
  double mu1 = 1.0, mu2 = 1.0, beta = 1.0;

  std::string initial_kind = "bubble";
  double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
  double eps = 1.0;

  IntegratorSettings settings;

  std::optional<std::string> sampler;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  double box = 1.0;
  double psi_min = 1e-3;
  double wronskian_min = 1e-3;
  double sigma_scale = 0.05;
  double horizon = 50.0;
  unsigned threads = 1;
  std::vector<InitialData> draws;

  json sweep_params = json::array();
  json sweep_initial = json::array();

  std::string input, out, csv, archive_dir, trajectory_out;
  bool with_reports = false;
  int per_step = 4;
};

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw SchemaMismatch("config " + where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaMismatch("config " + where + ": unknown key '" + key + "'");
  }
}

template <class T>
void take(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  if constexpr (std::is_same_v<T, double>)
    into = io::number_from(j.at(key));
  else
    into = j.at(key).get<T>();
}

void apply_config_file(RunConfig& c, const json& j) {
  try {
    check_keys(j, {"params", "initial", "settings", "experiment", "sweep", "output", "seed"},
               "root");
    if (j.contains("params")) {
      const auto& p = j.at("params");
      check_keys(p, {"N", "mu1", "mu2", "beta"}, "params");
      take(p, "N", c.N);
      take(p, "mu1", c.mu1);
      take(p, "mu2", c.mu2);
      take(p, "beta", c.beta);
    }
    if (j.contains("initial")) {
      const auto& p = j.at("initial");
      check_keys(p, {"kind", "a1", "a2", "b1", "b2", "eps"}, "initial");
      take(p, "kind", c.initial_kind);
      take(p, "a1", c.a1);
      take(p, "a2", c.a2);
      take(p, "b1", c.b1);
      take(p, "b2", c.b2);
      take(p, "eps", c.eps);
    }
    if (j.contains("settings")) c.settings = io::settings_from_json(j.at("settings"), c.settings);
    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      check_keys(e, {"sampler", "runs", "box", "psi_min", "wronskian_min", "sigma_scale",
                     "horizon", "threads", "draws"},
                 "experiment");
      if (e.contains("sampler")) c.sampler = e.at("sampler").get<std::string>();
      take(e, "runs", c.runs);
      take(e, "box", c.box);
      take(e, "psi_min", c.psi_min);
      take(e, "wronskian_min", c.wronskian_min);
      take(e, "sigma_scale", c.sigma_scale);
      take(e, "horizon", c.horizon);
      take(e, "threads", c.threads);
      if (e.contains("draws")) {
        for (const auto& d : e.at("draws")) {
          check_keys(d, {"a1", "a2", "b1", "b2"}, "experiment.draws");
          InitialData x;
          take(d, "a1", x.a1);
          take(d, "a2", x.a2);
          take(d, "b1", x.b1);
          take(d, "b2", x.b2);
          c.draws.push_back(x);
        }
      }
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      check_keys(s, {"params", "initial"}, "sweep");
      if (s.contains("params")) c.sweep_params = s.at("params");
      if (s.contains("initial")) c.sweep_initial = s.at("initial");
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      check_keys(o, {"input", "out", "csv", "archive_dir", "trajectory_out", "with_reports",
                     "per_step"},
                 "output");
      take(o, "input", c.input);
      take(o, "out", c.out);
      take(o, "csv", c.csv);
      take(o, "archive_dir", c.archive_dir);
      take(o, "trajectory_out", c.trajectory_out);
      take(o, "with_reports", c.with_reports);
      take(o, "per_step", c.per_step);
    }
    take(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("config: ") + e.what());
  }
}

// Flags are optional so that only the ones actually given override the file.
struct Flags {
  std::string config;
  std::optional<int> N;
  std::optional<double> mu1, mu2, beta;
  std::optional<std::string> initial;
  std::optional<double> a1, a2, b1, b2, eps;
  std::optional<double> rtol, atol, t_min, t_max, max_step, blowup, floor;
  std::optional<std::string> mode;
  bool stop_on_sign_change = false;
  std::optional<std::string> sampler;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<double> box, psi_min, sigma_scale, horizon;
  std::optional<unsigned> threads;
  std::optional<std::string> input, out, csv, archive_dir, trajectory_out;
  std::optional<std::string> initial_list;
  std::vector<double> beta_list;
  std::vector<int> N_list;
  bool with_reports = false;
  std::optional<int> per_step;
  bool json_errors = false;
};

void apply_flags(RunConfig& c, const Flags& f) {
  if (f.N) c.N = *f.N;
  if (f.mu1) c.mu1 = *f.mu1;
  if (f.mu2) c.mu2 = *f.mu2;
  if (f.beta) c.beta = *f.beta;
  if (f.a1 || f.a2 || f.b1 || f.b2) c.initial_kind = "data";
  if (f.initial) c.initial_kind = *f.initial;
  if (f.a1) c.a1 = *f.a1;
  if (f.a2) c.a2 = *f.a2;
  if (f.b1) c.b1 = *f.b1;
  if (f.b2) c.b2 = *f.b2;
  if (f.eps) c.eps = *f.eps;
  if (f.rtol) c.settings.rel_tol = *f.rtol;
  if (f.atol) c.settings.abs_tol = *f.atol;
  if (f.t_min) c.settings.t_min = *f.t_min;
  if (f.t_max) c.settings.t_max = *f.t_max;
  if (f.max_step) c.settings.max_step = *f.max_step;
  if (f.blowup) c.settings.blowup_threshold = *f.blowup;
  if (f.floor) c.settings.positivity_floor = *f.floor;
  if (f.mode) {
    if (*f.mode == "positive") c.settings.mode = IntegrationMode::Positive;
    else if (*f.mode == "signed") c.settings.mode = IntegrationMode::Signed;
    else throw DomainError("--mode must be 'positive' or 'signed'");
  }
  if (f.stop_on_sign_change) c.settings.stop_on_sign_change = true;
  if (f.sampler) c.sampler = *f.sampler;
  if (f.runs) c.runs = *f.runs;
  if (f.seed) c.seed = *f.seed;
  if (f.box) c.box = *f.box;
  if (f.psi_min) c.psi_min = *f.psi_min;
  if (f.sigma_scale) c.sigma_scale = *f.sigma_scale;
  if (f.horizon) c.horizon = *f.horizon;
  if (f.threads) c.threads = *f.threads;
  if (f.input) c.input = *f.input;
  if (f.out) c.out = *f.out;
  if (f.csv) c.csv = *f.csv;
  if (f.archive_dir) c.archive_dir = *f.archive_dir;
  if (f.trajectory_out) c.trajectory_out = *f.trajectory_out;
  if (f.with_reports) c.with_reports = true;
  if (f.per_step) c.per_step = *f.per_step;
}

fs::path resolve_output(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* dir = std::getenv("FOWLER_OUTPUT_DIR"); dir && *dir) return fs::path(dir) / path;
  }
  return path;
}

void emit_text(const std::string& text, const RunConfig& c, std::ostream& out) {
  if (c.out.empty())
    out << text;
  else
    io::write_text(text, resolve_output(c.out));
}

void emit(const json& j, const RunConfig& c, std::ostream& out) { emit_text(j.dump(1) + "\n", c, out); }

json header(const SystemParams& sp) {
  return {{"schema_version", io::kSchemaVersion}, {"params", io::to_json(sp)}};
}

FowlerState initial_state(const SystemParams& sp, const RunConfig& c) {
  if (c.initial_kind == "bubble") return bubble_fowler(sp, c.eps, 0.0);
  if (c.initial_kind == "cylinder") return cylinder_state(sp).state;
  if (c.initial_kind == "data") return {0.0, c.a1, c.a2, c.b1, c.b2};
  throw DomainError("initial kind must be 'data', 'bubble' or 'cylinder' (got '" +
                    c.initial_kind + "')");
}

Trajectory obtain_trajectory(const SystemParams& sp, const RunConfig& c) {
  if (!c.input.empty()) return io::load_trajectory(c.input);
  return integrate(sp, initial_state(sp, c), c.settings);
}

SamplerSpec sampler_spec(const SystemParams& sp, const RunConfig& c, SamplerKind fallback) {
  SamplerSpec s;
  s.kind = c.sampler ? sampler_kind_from_string(*c.sampler) : fallback;
  s.seed = c.seed;
  s.box = c.box;
  s.psi_min = c.psi_min;
  s.wronskian_min = c.wronskian_min;
  s.sigma_scale = c.sigma_scale;
  for (const auto& d : c.draws) s.draws.push_back(make_initial_data(sp, d.a1, d.a2, d.b1, d.b2));
  return s;
}

InitialSpec initial_spec_from(const json& j) {
  InitialSpec s;
  if (j.is_string()) {
    const auto k = j.get<std::string>();
    if (k == "bubble") s.kind = InitialSpec::Kind::Bubble;
    else if (k == "cylinder") s.kind = InitialSpec::Kind::Cylinder;
    else throw DomainError("sweep initial entry must be 'bubble', 'cylinder' or a data object");
    return s;
  }
  check_keys(j, {"kind", "a1", "a2", "b1", "b2", "eps"}, "sweep.initial");
  std::string kind = "data";
  take(j, "kind", kind);
  if (kind == "bubble") s.kind = InitialSpec::Kind::Bubble;
  else if (kind == "cylinder") s.kind = InitialSpec::Kind::Cylinder;
  else if (kind == "data") s.kind = InitialSpec::Kind::Data;
  else throw DomainError("sweep initial kind must be 'data', 'bubble' or 'cylinder'");
  take(j, "a1", s.data.a1);
  take(j, "a2", s.data.a2);
  take(j, "b1", s.data.b1);
  take(j, "b2", s.data.b2);
  take(j, "eps", s.eps);
  return s;
}

int exit_for(const ExperimentReport& r) { return has_theorem_failure(r) ? kExitTheorem : kExitOk; }

int run_command(const std::string& cmd, RunConfig& c, const Flags& f, std::ostream& out) {
  if (cmd == "sweep") {
    std::vector<SystemParams> grid;
    try {
      for (const auto& p : c.sweep_params) {
        check_keys(p, {"N", "mu1", "mu2", "beta"}, "sweep.params");
        int N = c.N;
        double mu1 = c.mu1, mu2 = c.mu2, beta = c.beta;
        take(p, "N", N);
        take(p, "mu1", mu1);
        take(p, "mu2", mu2);
        take(p, "beta", beta);
        grid.push_back(make_params(N, mu1, mu2, beta));
      }
    } catch (const json::exception& e) {
      throw SchemaMismatch(std::string("config sweep.params: ") + e.what());
    }
    if (grid.empty()) {
      const std::vector<int> Ns = f.N_list.empty() ? std::vector<int>{c.N} : f.N_list;
      const std::vector<double> betas =
          f.beta_list.empty() ? std::vector<double>{c.beta} : f.beta_list;
      for (int N : Ns)
        for (double b : betas) grid.push_back(make_params(N, c.mu1, c.mu2, b));
    }
    std::vector<InitialSpec> inits;
    try {
      for (const auto& j : c.sweep_initial) inits.push_back(initial_spec_from(j));
    } catch (const json::exception& e) {
      throw SchemaMismatch(std::string("config sweep.initial: ") + e.what());
    }
    if (inits.empty()) {
      std::stringstream ss(f.initial_list.value_or("bubble,cylinder"));
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) inits.push_back(initial_spec_from(json(item)));
    }
    ExperimentOptions exec{c.threads, !c.archive_dir.empty()};
    auto res = sweep(grid, inits, c.settings, exec);
    if (!c.archive_dir.empty()) {
      const fs::path dir = resolve_output(c.archive_dir);
      for (std::size_t i = 0; i < res.trajectories.size(); ++i) {
        if (!res.trajectories[i]) continue;
        std::ostringstream name;
        name << "run_" << std::setw(5) << std::setfill('0') << i << ".json";
        io::save_trajectory(*res.trajectories[i], dir / name.str());
        res.report.runs[i].trajectory_path = (fs::path(c.archive_dir) / name.str()).string();
      }
    }
    emit(io::to_json(res.report), c, out);
    return exit_for(res.report);
  }

  const SystemParams sp = make_params(c.N, c.mu1, c.mu2, c.beta);

  if (cmd == "solve-kl") {
    const auto kl = solve_coupling(sp);
    json j = header(sp);
    j.update(io::to_json(kl));
    j["ratio"] = io::number(kl.l / kl.k);
    emit(j, c, out);
    return kExitOk;
  }
  if (cmd == "bubble") {
    const auto kl = solve_coupling(sp);
    json j = header(sp);
    j["eps"] = io::number(c.eps);
    j["k"] = io::number(kl.k);
    j["l"] = io::number(kl.l);
    j["U0"] = io::number(standard_bubble(sp.N, c.eps, 0.0));
    j["scalar_apex"] = io::number(standard_bubble_apex(sp.N));
    j["state"] = io::to_json(bubble_fowler(sp, c.eps, 0.0));
    emit(j, c, out);
    return kExitOk;
  }
  if (cmd == "cylinder") {
    const auto cyl = cylinder_state(sp);
    json j = header(sp);
    j["C1"] = io::number(cyl.state.w1);
    j["C2"] = io::number(cyl.state.w2);
    j["K"] = io::number(cyl.K);
    j["psi"] = io::number(psi(sp, cyl.state));
    j["f"] = {io::number(f_pair(sp, cyl.state)[0]), io::number(f_pair(sp, cyl.state)[1])};
    j["state"] = io::to_json(cyl.state);
    emit(j, c, out);
    return kExitOk;
  }
  if (cmd == "integrate") {
    const auto traj = integrate(sp, initial_state(sp, c), c.settings);
    io::TrajectoryReports reps;
    if (c.with_reports) {
      reps.invariants = monitor(traj);
      reps.classification = classify(traj, *reps.invariants);
      if (reps.classification->verdict == Verdict::BothSingularCandidate)
        reps.estimate = sharp_constants(traj, *reps.classification);
    }
    if (!c.csv.empty()) io::save_csv(traj, resolve_output(c.csv));
    emit(io::to_json(traj, reps), c, out);
    return kExitOk;
  }
  if (cmd == "classify") {
    const auto traj = obtain_trajectory(sp, c);
    const auto cl = classify(traj);
    json j = header(traj.params);
    j.update(io::to_json(cl));
    if (cl.verdict == Verdict::BothSingularCandidate) {
      j["estimate"] = io::to_json(sharp_constants(traj, cl));
      j["proportionality"] = io::number(proportionality_probe(traj));
    }
    emit(j, c, out);
    const bool semi_anomaly = cl.verdict == Verdict::SemiSingularCandidate && cl.evidence.anomaly;
    return (semi_anomaly || cl.evidence.theorem_violation) ? kExitTheorem : kExitOk;
  }
  if (cmd == "invariants") {
    const auto traj = obtain_trajectory(sp, c);
    json j = header(traj.params);
    j["report"] = io::to_json(monitor(traj));
    emit(j, c, out);
    return kExitOk;
  }
  if (cmd == "plot-data") {
    const auto traj = obtain_trajectory(sp, c);
    std::ostringstream os;
    io::write_plot_data(traj, os, c.per_step);
    emit_text(os.str(), c, out);
    return kExitOk;
  }
  if (cmd == "sign-change") {
    auto fallback = SamplerKind::UniformBox;
    if (c.initial_kind == "data" && c.draws.empty()) {
      c.draws.push_back({c.a1, c.a2, c.b1, c.b2, 0.0});
      fallback = SamplerKind::Explicit;
    }
    const auto spec = sampler_spec(sp, c, fallback);
    const std::size_t n = spec.kind == SamplerKind::Explicit ? spec.draws.size() : c.runs;
    SignChangeOptions opts;
    opts.horizon = c.horizon;
    const auto rep = sign_change_experiment(sp, spec, n, c.settings, opts, {c.threads, false});
    emit(io::to_json(rep), c, out);
    return exit_for(rep);
  }
  if (cmd == "search-semi") {
    const auto spec = sampler_spec(sp, c, SamplerKind::NearCylinder);
    const std::size_t n = spec.kind == SamplerKind::Explicit ? spec.draws.size() : c.runs;
    const auto rep = semi_singular_search(sp, spec, n, c.settings, {c.threads, false});
    emit(io::to_json(rep), c, out);
    return exit_for(rep);
  }
  if (cmd == "shoot") {
    const auto res = shoot_entire(sp, c.settings);
    const auto kl = solve_coupling(sp);
    const double expected = kl.k * standard_bubble_apex(sp.N);
    const double rel = std::abs(res.apex.a1 - expected) / expected;
    constexpr double kApexTolerance = 1e-6;
    json j = header(sp);
    j["apex"] = io::to_json(res.apex);
    j["expected_apex"] = io::number(expected);
    j["relative_error"] = io::number(rel);
    j["tolerance"] = io::number(kApexTolerance);
    j["ratio"] = io::number(res.ratio);
    j["iterations"] = res.iterations;
    j["bracket"] = {io::number(res.bracket_lo), io::number(res.bracket_hi)};
    if (!c.trajectory_out.empty())
      io::save_trajectory(res.trajectory, resolve_output(c.trajectory_out));
    emit(j, c, out);
    return rel <= kApexTolerance ? kExitOk : kExitTheorem;
  }
  throw DomainError("unknown command '" + cmd + "'");
}

void report_error(std::ostream& err, bool as_json, const std::string& kind,
                  const std::string& message, int code) {
  if (as_json)
    err << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
        << "\n";
  else
    err << "error (" << kind << "): " << message << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Flags f;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--json-errors") f.json_errors = true;

  CLI::App app{"Radial Fowler-transform laboratory for the coupled critical system"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json-errors", f.json_errors, "Print errors as JSON on stderr");
  app.add_option("--config", f.config, "JSON run configuration");
  auto* g = "Parameters";
  app.add_option("--N", f.N, "Dimension (>= 3)")->group(g);
  app.add_option("--mu1", f.mu1)->group(g);
  app.add_option("--mu2", f.mu2)->group(g);
  app.add_option("--beta", f.beta)->group(g);
  g = "Initial data";
  app.add_option("--initial", f.initial, "data | bubble | cylinder")->group(g);
  app.add_option("--a1", f.a1)->group(g);
  app.add_option("--a2", f.a2)->group(g);
  app.add_option("--b1", f.b1)->group(g);
  app.add_option("--b2", f.b2)->group(g);
  app.add_option("--eps", f.eps, "Bubble scale")->group(g);
  g = "Integrator";
  app.add_option("--rtol", f.rtol)->group(g);
  app.add_option("--atol", f.atol)->group(g);
  app.add_option("--t-min", f.t_min)->group(g);
  app.add_option("--t-max", f.t_max)->group(g);
  app.add_option("--max-step", f.max_step)->group(g);
  app.add_option("--blowup-threshold", f.blowup)->group(g);
  app.add_option("--positivity-floor", f.floor)->group(g);
  app.add_option("--mode", f.mode, "positive | signed")->group(g);
  app.add_flag("--stop-on-sign-change", f.stop_on_sign_change)->group(g);
  g = "Experiments";
  app.add_option("--sampler", f.sampler,
                 "uniform_box | psi_zero_surface | near_cylinder | near_cylinder_proportional | "
                 "explicit")
      ->group(g);
  app.add_option("--runs", f.runs)->group(g);
  app.add_option("--seed", f.seed)->group(g);
  app.add_option("--box", f.box)->group(g);
  app.add_option("--psi-min", f.psi_min)->group(g);
  app.add_option("--sigma-scale", f.sigma_scale)->group(g);
  app.add_option("--horizon", f.horizon)->group(g);
  app.add_option("--threads", f.threads)->group(g);
  app.add_option("--initial-list", f.initial_list, "Sweep initial grid, e.g. bubble,cylinder")
      ->group(g);
  app.add_option("--beta-list", f.beta_list, "Sweep beta grid")->delimiter(',')->group(g);
  app.add_option("--N-list", f.N_list, "Sweep dimension grid")->delimiter(',')->group(g);
  g = "Files";
  app.add_option("--input", f.input, "Trajectory JSON to read instead of integrating")->group(g);
  app.add_option("--out", f.out, "Output file (default stdout)")->group(g);
  app.add_option("--csv", f.csv, "Node table CSV (integrate)")->group(g);
  app.add_option("--archive-dir", f.archive_dir, "Per-run trajectories (sweep)")->group(g);
  app.add_option("--trajectory-out", f.trajectory_out, "Shot orbit (shoot)")->group(g);
  app.add_flag("--with-reports", f.with_reports, "Embed reports in the trajectory")->group(g);
  app.add_option("--per-step", f.per_step, "Interior samples per step (plot-data)")->group(g);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"integrate", "Integrate one orbit and write the trajectory"},
      {"classify", "Classify an orbit"},
      {"invariants", "Run the invariant monitors on an orbit"},
      {"solve-kl", "Solve the coupling equations for (k, l)"},
      {"bubble", "Closed-form bubble data"},
      {"cylinder", "Closed-form cylinder equilibrium"},
      {"sign-change", "Sign-change experiment"},
      {"search-semi", "Semi-singular search"},
      {"sweep", "Parameter and initial-data sweep"},
      {"shoot", "Shoot for the homoclinic (entire) orbit"},
      {"plot-data", "Columnar samples for plotting"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, f.json_errors, "UsageError", e.what(), kExitDomain);
    return kExitDomain;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    RunConfig c;
    if (!f.config.empty()) apply_config_file(c, io::read_json(f.config));
    apply_flags(c, f);
    return run_command(cmd, c, f, out);
  } catch (const SchemaMismatch& e) {
    report_error(err, f.json_errors, e.kind(), e.what(), kExitIo);
    return kExitIo;
  } catch (const IoError& e) {
    report_error(err, f.json_errors, e.kind(), e.what(), kExitIo);
    return kExitIo;
  } catch (const Error& e) {
    report_error(err, f.json_errors, e.kind(), e.what(), kExitDomain);
    return kExitDomain;
  }
}

int cli_main(int argc, const char* const* argv) {
  return cli_main(argc, argv, std::cout, std::cerr);
}

}  // namespace fowler
