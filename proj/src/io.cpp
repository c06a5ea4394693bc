#include "fowler/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <sstream>

#include "fowler/errors.hpp"

namespace fowler::io {

namespace {

std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  if (!j.is_object()) throw SchemaMismatch(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaMismatch(where + ": unknown key '" + key + "'");
  }
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw SchemaMismatch(where + ": missing field '" + key + "'");
  return j.at(key);
}

json numbers(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

template <std::size_t M>
json numbers(const std::array<double, M>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

std::vector<double> numbers_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaMismatch(where + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(number_from(x));
  return out;
}

}  // namespace

json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw SchemaMismatch("expected a number, got " + j.dump());
}

json to_json(const SystemParams& sp) {
  return {{"N", sp.N},
          {"mu1", number(sp.mu1)},
          {"mu2", number(sp.mu2)},
          {"beta", number(sp.beta)},
          {"delta", number(sp.delta)},
          {"p", number(sp.p)},
          {"two_star", number(sp.two_star)},
          {"sphere_area", number(sp.sphere_area)},
          {"lambda", numbers(sp.lambda)},
          {"lambda_star", numbers(sp.lambda_star)}};
}

SystemParams params_from_json(const json& j) {
  const std::string where = "params";
  require_keys(j, {"N", "mu1", "mu2", "beta", "delta", "p", "two_star", "sphere_area", "lambda",
                   "lambda_star"},
               where);
  const auto& n = field(j, "N", where);
  if (!n.is_number_integer()) throw SchemaMismatch("params: N must be an integer");
  // Derived fields are recomputed; make_params is deterministic.
  return make_params(n.get<int>(), number_from(field(j, "mu1", where)),
                     number_from(field(j, "mu2", where)), number_from(field(j, "beta", where)));
}

json to_json(const IntegratorSettings& s) {
  return {{"rel_tol", number(s.rel_tol)},
          {"abs_tol", number(s.abs_tol)},
          {"t_min", number(s.t_min)},
          {"t_max", number(s.t_max)},
          {"max_step", number(s.max_step)},
          {"blowup_threshold", number(s.blowup_threshold)},
          {"positivity_floor", number(s.positivity_floor)},
          {"event_refinement_tol", number(s.event_refinement_tol)},
          {"mode", s.mode == IntegrationMode::Positive ? "positive" : "signed"},
          {"stop_on_sign_change", s.stop_on_sign_change},
          {"max_steps", s.max_steps}};
}

IntegratorSettings settings_from_json(const json& j, IntegratorSettings s) {
  require_keys(j, {"rel_tol", "abs_tol", "t_min", "t_max", "max_step", "blowup_threshold",
                   "positivity_floor", "event_refinement_tol", "mode", "stop_on_sign_change",
                   "max_steps"},
               "settings");
  auto get = [&](const char* key, double& into) {
    if (j.contains(key)) into = number_from(j.at(key));
  };
  get("rel_tol", s.rel_tol);
  get("abs_tol", s.abs_tol);
  get("t_min", s.t_min);
  get("t_max", s.t_max);
  get("max_step", s.max_step);
  get("blowup_threshold", s.blowup_threshold);
  get("positivity_floor", s.positivity_floor);
  get("event_refinement_tol", s.event_refinement_tol);
  try {
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "positive") s.mode = IntegrationMode::Positive;
      else if (m == "signed") s.mode = IntegrationMode::Signed;
      else throw SchemaMismatch("settings: mode must be 'positive' or 'signed'");
    }
    if (j.contains("stop_on_sign_change"))
      s.stop_on_sign_change = j.at("stop_on_sign_change").get<bool>();
    if (j.contains("max_steps")) s.max_steps = j.at("max_steps").get<std::size_t>();
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("settings: ") + e.what());
  }
  return s;
}

json to_json(const FowlerState& s) {
  return {{"t", number(s.t)},
          {"w1", number(s.w1)},
          {"w2", number(s.w2)},
          {"dw1", number(s.dw1)},
          {"dw2", number(s.dw2)}};
}

FowlerState state_from_json(const json& j) {
  const std::string where = "state";
  return {number_from(field(j, "t", where)), number_from(field(j, "w1", where)),
          number_from(field(j, "w2", where)), number_from(field(j, "dw1", where)),
          number_from(field(j, "dw2", where))};
}

json to_json(const InitialData& d) {
  return {{"a1", number(d.a1)},
          {"a2", number(d.a2)},
          {"b1", number(d.b1)},
          {"b2", number(d.b2)},
          {"psi0", number(d.psi0)}};
}

InitialData initial_data_from_json(const SystemParams& sp, const json& j) {
  const std::string where = "initial data";
  require_keys(j, {"a1", "a2", "b1", "b2", "psi0"}, where);
  return make_initial_data(sp, number_from(field(j, "a1", where)),
                           number_from(field(j, "a2", where)), number_from(field(j, "b1", where)),
                           number_from(field(j, "b2", where)));
}

json to_json(const Event& e) {
  return {{"kind", to_string(e.kind)},
          {"component", e.component},
          {"t", number(e.t)},
          {"state", to_json(e.state)}};
}

json to_json(const CouplingSolution& kl) {
  return {{"k", number(kl.k)}, {"l", number(kl.l)}, {"residuals", numbers(kl.residuals)}};
}

json to_json(const InvariantReport& r) {
  return {{"psi_drift", number(r.psi_drift)},
          {"f_positive", r.f_positive},
          {"f_margin", numbers(r.f_margin)},
          {"lambda_bound", r.lambda_bound},
          {"lambda_margin", numbers(r.lambda_margin)},
          {"gradient_bound", r.gradient_bound},
          {"gradient_margin", numbers(r.gradient_margin)},
          {"f_w_monotone_coupling", r.f_w_monotone_coupling},
          {"coupling_checks", r.coupling_checks},
          {"coupling_violations", r.coupling_violations},
          {"pohozaev_match", number(r.pohozaev_match)},
          {"pohozaev_scale", number(r.pohozaev_scale)},
          {"samples", r.samples},
          {"tolerance", number(InvariantReport::kTolerance)},
          {"all_pass", r.all_pass()}};
}

json to_json(const DecayFit& f) {
  return {{"rate", number(f.rate)},
          {"amplitude", number(f.amplitude)},
          {"t_from", number(f.t_from)},
          {"t_to", number(f.t_to)}};
}

json to_json(const Classification& c) {
  const auto& ev = c.evidence;
  auto fits = [](const std::array<std::optional<DecayFit>, 2>& f) {
    json a = json::array();
    for (const auto& x : f) a.push_back(x ? to_json(*x) : json(nullptr));
    return a;
  };
  json events = json::array();
  for (const auto& e : ev.terminal_events) events.push_back(to_json(e));
  return {{"verdict", to_string(c.verdict)},
          {"K_value", number(c.K_value)},
          {"evidence",
           {{"K_tol", number(ev.K_tol)},
            {"psi0", number(ev.psi0)},
            {"window_plus", number(ev.window_plus)},
            {"window_minus", number(ev.window_minus)},
            {"decay_plus", fits(ev.decay_plus)},
            {"decay_minus", fits(ev.decay_minus)},
            {"inf_w", numbers(ev.inf_w)},
            {"sup_w", numbers(ev.sup_w)},
            {"terminal_events", events},
            {"margins", to_json(ev.margins)},
            {"thresholds",
             {{"k_tol_factor", number(ev.thresholds.k_tol_factor)},
              {"decay_tolerance", number(ev.thresholds.decay_tolerance)},
              {"positivity_evidence", number(ev.thresholds.positivity_evidence)},
              {"min_side_window", number(ev.thresholds.min_side_window)}}},
            {"anomaly", ev.anomaly},
            {"theorem_violation", ev.theorem_violation},
            {"regime", ev.regime},
            {"reason", ev.reason}}}};
}

json to_json(const EstimateReport& e) {
  return {{"C1", number(e.C1)},       {"C2", number(e.C2)},   {"ratio", number(e.ratio)},
          {"t_from", number(e.t_from)}, {"t_to", number(e.t_to)}, {"regime", e.regime}};
}

json to_json(const RunRecord& r) {
  json j = {{"index", r.index},
            {"params_index", r.params_index},
            {"initial_index", r.initial_index},
            {"data", to_json(r.data)},
            {"verdict", to_string(r.verdict)},
            {"K_value", number(r.K_value)},
            {"certified", r.certified},
            {"failure", r.failure}};
  j["event_t"] = r.event_t ? number(*r.event_t) : json(nullptr);
  j["estimate"] = r.estimate ? to_json(*r.estimate) : json(nullptr);
  j["inf_w1"] = r.inf_w1 ? number(*r.inf_w1) : json(nullptr);
  j["proportionality"] = r.proportionality ? number(*r.proportionality) : json(nullptr);
  if (!r.note.empty()) j["note"] = r.note;
  if (!r.error.empty()) j["error"] = r.error;
  if (!r.trajectory_path.empty()) j["trajectory_path"] = r.trajectory_path;
  return j;
}

json to_json(const ExperimentReport& r) {
  json runs = json::array(), failures = json::array(), params = json::array();
  for (const auto& x : r.runs) runs.push_back(to_json(x));
  for (const auto& x : r.failures) failures.push_back(to_json(x));
  for (const auto& p : r.params) params.push_back(to_json(p));
  json summary = json::object();
  for (const auto& [k, v] : r.summary) summary[k] = number(v);
  return {{"schema_version", kSchemaVersion},
          {"experiment", r.experiment},
          {"seed", r.seed},
          {"n_runs", r.n_runs},
          {"counts", r.counts},
          {"failures", failures},
          {"summary", summary},
          {"rejected_draws", r.rejected_draws},
          {"regime", r.regime},
          {"params", params},
          {"runs", runs}};
}

json to_json(const Trajectory& traj, const TrajectoryReports& reports) {
  std::vector<double> t, w1, w2, dw1, dw2;
  for (const auto& n : traj.nodes) {
    t.push_back(n.t);
    w1.push_back(n.w1);
    w2.push_back(n.w2);
    dw1.push_back(n.dw1);
    dw2.push_back(n.dw2);
  }
  std::vector<double> t0, h, lo, hi;
  json coeff = json::array();
  for (const auto& s : traj.segments) {
    t0.push_back(s.t0);
    h.push_back(s.h);
    lo.push_back(s.t_lo);
    hi.push_back(s.t_hi);
    json c = json::array();
    for (const auto& row : s.coeff)
      for (double x : row) c.push_back(number(x));
    coeff.push_back(std::move(c));
  }
  json events = json::array();
  for (const auto& e : traj.events) events.push_back(to_json(e));

  json rep = json::object();
  if (reports.invariants) rep["invariants"] = to_json(*reports.invariants);
  if (reports.classification) rep["classification"] = to_json(*reports.classification);
  if (reports.estimate) rep["estimate"] = to_json(*reports.estimate);

  return {{"schema_version", kSchemaVersion},
          {"params", to_json(traj.params)},
          {"settings", to_json(traj.settings)},
          {"initial", to_json(traj.initial)},
          {"initial_index", traj.initial_index},
          {"nodes",
           {{"t", numbers(t)},
            {"w1", numbers(w1)},
            {"w2", numbers(w2)},
            {"dw1", numbers(dw1)},
            {"dw2", numbers(dw2)},
            {"psi", numbers(traj.psi)}}},
          {"segments",
           {{"t0", numbers(t0)}, {"h", numbers(h)}, {"t_lo", numbers(lo)}, {"t_hi", numbers(hi)},
            {"coeff", coeff}}},
          {"events", events},
          {"forward_status", to_string(traj.forward_status)},
          {"backward_status", to_string(traj.backward_status)},
          {"psi0", number(traj.psi0)},
          {"drift", number(traj.drift)},
          {"error_estimate", number(traj.error_estimate)},
          {"certified", traj.certified},
          {"reports", rep}};
}

Trajectory trajectory_from_json(const json& j) {
  const std::string where = "trajectory";
  try {
    const auto& version = field(j, "schema_version", where);
    if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
      throw SchemaMismatch("trajectory: unsupported schema_version " + version.dump());

    require_keys(j,
                 {"schema_version", "params", "settings", "initial", "initial_index", "nodes",
                  "segments", "events", "forward_status", "backward_status", "psi0", "drift",
                  "error_estimate", "certified", "reports"},
                 where);
    Trajectory tr;
    tr.params = params_from_json(field(j, "params", where));
    tr.settings = settings_from_json(field(j, "settings", where));
    tr.settings.validate();
    tr.initial = state_from_json(field(j, "initial", where));
    tr.initial_index = field(j, "initial_index", where).get<std::size_t>();

    const auto& nodes = field(j, "nodes", where);
    require_keys(nodes, {"t", "w1", "w2", "dw1", "dw2", "psi"}, "nodes");
    const auto t = numbers_from(field(nodes, "t", where), "nodes.t");
    const auto w1 = numbers_from(field(nodes, "w1", where), "nodes.w1");
    const auto w2 = numbers_from(field(nodes, "w2", where), "nodes.w2");
    const auto dw1 = numbers_from(field(nodes, "dw1", where), "nodes.dw1");
    const auto dw2 = numbers_from(field(nodes, "dw2", where), "nodes.dw2");
    tr.psi = numbers_from(field(nodes, "psi", where), "nodes.psi");
    const std::size_t n = t.size();
    if (n == 0 || w1.size() != n || w2.size() != n || dw1.size() != n || dw2.size() != n ||
        tr.psi.size() != n)
      throw SchemaMismatch("trajectory: node columns are empty or of unequal length");
    if (tr.initial_index >= n) throw SchemaMismatch("trajectory: initial_index out of range");
    for (std::size_t i = 0; i < n; ++i) tr.nodes.push_back({t[i], w1[i], w2[i], dw1[i], dw2[i]});

    const auto& seg = field(j, "segments", where);
    require_keys(seg, {"t0", "h", "t_lo", "t_hi", "coeff"}, "segments");
    const auto t0 = numbers_from(field(seg, "t0", where), "segments.t0");
    const auto h = numbers_from(field(seg, "h", where), "segments.h");
    const auto lo = numbers_from(field(seg, "t_lo", where), "segments.t_lo");
    const auto hi = numbers_from(field(seg, "t_hi", where), "segments.t_hi");
    const auto& coeff = field(seg, "coeff", where);
    const std::size_t m = t0.size();
    if (h.size() != m || lo.size() != m || hi.size() != m || !coeff.is_array() ||
        coeff.size() != m)
      throw SchemaMismatch("trajectory: segment columns of unequal length");
    for (std::size_t i = 0; i < m; ++i) {
      DenseSegment s;
      s.t0 = t0[i];
      s.h = h[i];
      s.t_lo = lo[i];
      s.t_hi = hi[i];
      const auto c = numbers_from(coeff[i], "segments.coeff");
      if (c.size() != 20) throw SchemaMismatch("trajectory: segment needs 20 coefficients");
      for (int r = 0; r < 5; ++r)
        for (int k = 0; k < 4; ++k) s.coeff[r][k] = c[4 * r + k];
      tr.segments.push_back(s);
    }

    for (const auto& e : field(j, "events", where)) {
      Event ev;
      ev.kind = event_kind_from_string(field(e, "kind", "event").get<std::string>());
      ev.component = field(e, "component", "event").get<int>();
      ev.t = number_from(field(e, "t", "event"));
      ev.state = state_from_json(field(e, "state", "event"));
      tr.events.push_back(ev);
    }
    tr.forward_status =
        run_status_from_string(field(j, "forward_status", where).get<std::string>());
    tr.backward_status =
        run_status_from_string(field(j, "backward_status", where).get<std::string>());
    tr.psi0 = number_from(field(j, "psi0", where));
    tr.drift = number_from(field(j, "drift", where));
    tr.error_estimate = number_from(field(j, "error_estimate", where));
    tr.certified = field(j, "certified", where).get<bool>();
    return tr;
  } catch (const SchemaMismatch&) {
    throw;
  } catch (const DomainError& e) {
    throw SchemaMismatch(std::string("trajectory: ") + e.what());
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("trajectory: ") + e.what());
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaMismatch("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_json(const json& j, const std::filesystem::path& path) {
  write_text(j.dump(1) + "\n", path);
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                     const TrajectoryReports& reports) {
  write_json(to_json(traj, reports), path);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(read_json(path));
}

void write_csv(const Trajectory& traj, std::ostream& os) {
  os << "t,w1,w2,dw1,dw2,psi\n";
  for (std::size_t i = 0; i < traj.nodes.size(); ++i) {
    const auto& n = traj.nodes[i];
    os << shortest(n.t) << ',' << shortest(n.w1) << ',' << shortest(n.w2) << ','
       << shortest(n.dw1) << ',' << shortest(n.dw2) << ',' << shortest(traj.psi[i]) << '\n';
  }
}

void save_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ostringstream os;
  write_csv(traj, os);
  write_text(os.str(), path);
}

void write_plot_data(const Trajectory& traj, std::ostream& os, int per_step) {
  const auto& sp = traj.params;
  os << "t,w1,w2,psi,f1,f2,r,u,v\n";
  for (const auto& s : dense_samples(traj, per_step)) {
    const auto f = f_pair(sp, s);
    const auto rp = to_radial(sp, s);
    os << shortest(s.t) << ',' << shortest(s.w1) << ',' << shortest(s.w2) << ','
       << shortest(psi(sp, s)) << ',' << shortest(f[0]) << ',' << shortest(f[1]) << ','
       << shortest(rp.r) << ',' << shortest(rp.u) << ',' << shortest(rp.v) << '\n';
  }
}

}  // namespace fowler::io
