#include "fowler/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "fowler/errors.hpp"
#include "fowler/invariants.hpp"

namespace fowler {

namespace {

using Vec = std::array<double, 4>;

// sign(w) |w|^e, i.e. |w|^{e-1} w
double odd_pow(double w, double e) { return std::copysign(std::pow(std::abs(w), e), w); }

Vec field(const SystemParams& sp, const Vec& y) {
  const double d2 = sp.delta * sp.delta;
  const double p = sp.p;
  const double a1 = std::pow(std::abs(y[0]), p);
  const double a2 = std::pow(std::abs(y[1]), p);
  return {
      y[2],
      y[3],
      d2 * y[0] - sp.mu1 * odd_pow(y[0], 2 * p - 1) - sp.beta * a2 * odd_pow(y[0], p - 1),
      d2 * y[1] - sp.mu2 * odd_pow(y[1], 2 * p - 1) - sp.beta * a1 * odd_pow(y[1], p - 1),
  };
}

// Dormand-Prince 5(4) tableau with Hairer's dense output coefficients.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

struct Step {
  Vec y1{};
  Vec k7{};
  double err = 0.0;     // scaled RMS error, accept when <= 1
  double err_abs = 0.0; // max-norm absolute error estimate
  DenseSegment seg;
};

Step dopri_step(const SystemParams& sp, double t, const Vec& y, const Vec& k1, double h,
                const IntegratorSettings& st) {
  using namespace dp;
  Vec tmp{};
  auto stage = [&](auto&& combine) {
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + h * combine(i);
    return field(sp, tmp);
  };
  const Vec k2 = stage([&](int i) { return a21 * k1[i]; });
  const Vec k3 = stage([&](int i) { return a31 * k1[i] + a32 * k2[i]; });
  const Vec k4 = stage([&](int i) { return a41 * k1[i] + a42 * k2[i] + a43 * k3[i]; });
  const Vec k5 = stage(
      [&](int i) { return a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]; });
  const Vec k6 = stage([&](int i) {
    return a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i];
  });

  Step out;
  for (int i = 0; i < 4; ++i)
    out.y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                            a76 * k6[i]);
  out.k7 = field(sp, out.y1);

  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                          e7 * out.k7[i]);
    const double sc = st.abs_tol + st.rel_tol * std::max(std::abs(y[i]), std::abs(out.y1[i]));
    sum += (e / sc) * (e / sc);
    out.err_abs = std::max(out.err_abs, std::abs(e));
  }
  out.err = std::sqrt(sum / 4.0);

  auto& seg = out.seg;
  seg.t0 = t;
  seg.h = h;
  seg.t_lo = std::min(t, t + h);
  seg.t_hi = std::max(t, t + h);
  for (int i = 0; i < 4; ++i) {
    const double ydiff = out.y1[i] - y[i];
    const double bspl = h * k1[i] - ydiff;
    seg.coeff[0][i] = y[i];
    seg.coeff[1][i] = ydiff;
    seg.coeff[2][i] = bspl;
    seg.coeff[3][i] = ydiff - h * out.k7[i] - bspl;
    seg.coeff[4][i] =
        h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * out.k7[i]);
  }
  return out;
}

double initial_step(const SystemParams& sp, const Vec& y, const Vec& f,
                    const IntegratorSettings& st, double dir) {
  auto norm = [&](const Vec& v) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double sc = st.abs_tol + st.rel_tol * std::abs(y[i]);
      s += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(s / 4.0);
  };
  const double d0 = norm(y);
  const double d1 = norm(f);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, st.max_step);
  Vec y1{};
  for (int i = 0; i < 4; ++i) y1[i] = y[i] + dir * h0 * f[i];
  const Vec f1 = field(sp, y1);
  Vec df{};
  for (int i = 0; i < 4; ++i) df[i] = f1[i] - f[i];
  const double d2 = norm(df) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  return std::min({100.0 * h0, h1, st.max_step});
}

struct EventProbe {
  EventKind kind;
  int component;
  bool terminal;
};

double probe_value(const EventProbe& probe, const IntegratorSettings& st, const Vec& y) {
  switch (probe.kind) {
    case EventKind::SignChange:
      return y[probe.component];
    case EventKind::PositivityLoss:
      return y[probe.component] - st.positivity_floor;
    case EventKind::BlowUp:
      return st.blowup_threshold - std::max(std::abs(y[0]), std::abs(y[1]));
    default:
      return 1.0;
  }
}

std::vector<EventProbe> probes_for(const IntegratorSettings& st) {
  std::vector<EventProbe> probes;
  for (int i = 0; i < 2; ++i) {
    if (st.mode == IntegrationMode::Signed)
      probes.push_back({EventKind::SignChange, i, st.stop_on_sign_change});
    else
      probes.push_back({EventKind::PositivityLoss, i, true});
  }
  probes.push_back({EventKind::BlowUp, -1, true});
  return probes;
}

bool crossed(double a, double b) { return (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0); }

// Locates the first crossing of `probe` on the segment, scanning in the
// direction of integration.
std::optional<Event> locate(const EventProbe& probe, const DenseSegment& seg,
                            const IntegratorSettings& st) {
  constexpr int kSub = 8;
  const double ta = seg.t0;
  const double tb = seg.t0 + seg.h;
  auto at = [&](double t) { return probe_value(probe, st, seg.eval(t)); };

  double t_prev = ta;
  double g_prev = at(ta);
  for (int j = 1; j <= kSub; ++j) {
    const double t_cur = j == kSub ? tb : ta + (tb - ta) * j / kSub;
    const double g_cur = at(t_cur);
    if (g_prev != 0.0 && crossed(g_prev, g_cur)) {
      double lo = t_prev, hi = t_cur;  // g(lo) on the pre-crossing side
      const double g_lo_sign = g_prev;
      for (int it = 0; it < 200; ++it) {
        const double width = std::abs(hi - lo);
        const double g_hi = at(hi);
        const bool close = probe.kind != EventKind::SignChange ||
                           std::abs(g_hi) <= st.event_refinement_tol;
        if (width <= st.event_refinement_tol && close) break;
        if (width <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi)))
          break;
        const double mid = 0.5 * (lo + hi);
        const double gm = at(mid);
        if (crossed(g_lo_sign, gm))
          hi = mid;
        else
          lo = mid;
      }
      double te = hi;
      if (probe.kind == EventKind::SignChange && std::abs(at(lo)) < std::abs(at(hi))) te = lo;
      Event ev;
      ev.kind = probe.kind;
      ev.component = probe.component;
      ev.t = te;
      ev.state = FowlerState::from_phase(te, seg.eval(te));
      return ev;
    }
    t_prev = t_cur;
    g_prev = g_cur;
  }
  return std::nullopt;
}

bool event_order(const Event& a, const Event& b, double dir) {
  if (a.t != b.t) return dir > 0 ? a.t < b.t : a.t > b.t;
  if (a.component != b.component) return a.component < b.component;
  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
}

struct DirectionRun {
  std::vector<FowlerState> nodes;
  std::vector<DenseSegment> segments;
  std::vector<Event> events;
  RunStatus status = RunStatus::Completed;
  double err_sum = 0.0;
};

DirectionRun run_direction(const SystemParams& sp, const FowlerState& start, double t_end,
                           const IntegratorSettings& st) {
  DirectionRun run;
  const double dir = t_end >= start.t ? 1.0 : -1.0;
  if (t_end == start.t) return run;

  const auto probes = probes_for(st);
  Vec y = start.phase();
  double t = start.t;
  Vec k1 = field(sp, y);
  double h = dir * initial_step(sp, y, k1, st, dir);
  bool last_rejected = false;
  const bool rough = st.mode == IntegrationMode::Signed && sp.p < 2.0;

  for (std::size_t n = 0;; ++n) {
    if (n >= st.max_steps) {
      run.status = RunStatus::StepLimit;
      return run;
    }
    const double remaining = t_end - t;
    bool final_step = false;
    if (std::abs(h) >= std::abs(remaining)) {
      h = remaining;
      final_step = true;
    }
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t))) {
      run.status = RunStatus::StepSizeUnderflow;
      return run;
    }

    Step step = dopri_step(sp, t, y, k1, h, st);
    bool finite = std::isfinite(step.err);
    for (double v : step.y1) finite = finite && std::isfinite(v);

    if (!finite || step.err > 1.0) {
      const double fac = finite ? std::max(0.2, 0.9 * std::pow(step.err, -0.2)) : 0.2;
      h *= fac;
      last_rejected = true;
      continue;
    }

    // Accepted.
    const double t_new = final_step ? t_end : t + h;
    step.seg.t_lo = std::min(t, t_new);
    step.seg.t_hi = std::max(t, t_new);
    run.err_sum += step.err_abs;

    std::vector<Event> found;
    for (const auto& probe : probes)
      if (auto ev = locate(probe, step.seg, st)) found.push_back(*ev);
    std::sort(found.begin(), found.end(),
              [dir](const Event& a, const Event& b) { return event_order(a, b, dir); });

    // For p < 2 the field is only Hoelder continuous at w_i = 0. A step that
    // straddles a zero has an unreliable error estimate, so shorten it to end
    // on the crossing and start the next one there.
    if (rough && !found.empty() && found.front().kind == EventKind::SignChange &&
        !st.stop_on_sign_change) {
      const double tc = found.front().t;
      const double slack = 1e-9 * std::abs(h) + 1e-13 * std::max(1.0, std::abs(t));
      if (std::abs(tc - t) > slack && std::abs(t_new - tc) > slack) {
        h = tc - t;
        last_rejected = true;
        run.err_sum -= step.err_abs;
        continue;
      }
    }

    std::optional<double> stop_at;
    for (const auto& ev : found) {
      const bool terminal = ev.kind == EventKind::BlowUp || ev.kind == EventKind::PositivityLoss ||
                            (ev.kind == EventKind::SignChange && st.stop_on_sign_change);
      if (stop_at && dir * (ev.t - *stop_at) > 0) break;
      run.events.push_back(ev);
      if (terminal && !stop_at) stop_at = ev.t;
    }

    if (stop_at) {
      auto seg = step.seg;
      seg.t_lo = std::min(t, *stop_at);
      seg.t_hi = std::max(t, *stop_at);
      run.segments.push_back(seg);
      run.nodes.push_back(FowlerState::from_phase(*stop_at, seg.eval(*stop_at)));
      run.status = RunStatus::TerminalEvent;
      return run;
    }

    run.segments.push_back(step.seg);
    run.nodes.push_back(FowlerState::from_phase(t_new, step.y1));
    t = t_new;
    y = step.y1;
    k1 = step.k7;
    if (final_step) return run;

    double fac = 0.9 * std::pow(std::max(step.err, 1e-10), -0.2);
    fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
    h = dir * std::min(std::abs(h) * fac, st.max_step);
    last_rejected = false;
  }
}

}  // namespace

PhaseDerivative rhs(const SystemParams& sp, const FowlerState& s) {
  return field(sp, s.phase());
}

FowlerState to_fowler(const SystemParams& sp, double r, double u, double v, double du,
                      double dv) {
  if (!(r > 0.0)) {
    std::ostringstream msg;
    msg << "Fowler transform needs r > 0 (got " << r << ")";
    throw DomainError(msg.str());
  }
  const double d = sp.delta;
  const double rd = std::pow(r, d);
  const double rd1 = rd * r;
  FowlerState s;
  s.t = -std::log(r);
  s.w1 = rd * u;
  s.w2 = rd * v;
  // u'(r) = -r^{-delta-1} (w' + delta w)  =>  w' = -r^{delta+1} u' - delta w
  s.dw1 = -rd1 * du - d * s.w1;
  s.dw2 = -rd1 * dv - d * s.w2;
  return s;
}

RadialPoint to_radial(const SystemParams& sp, const FowlerState& s) {
  const double d = sp.delta;
  RadialPoint pt;
  pt.r = std::exp(-s.t);
  const double rmd = std::exp(d * s.t);  // r^{-delta}
  const double rmd1 = rmd * std::exp(s.t);
  pt.u = rmd * s.w1;
  pt.v = rmd * s.w2;
  pt.du = -rmd1 * (s.dw1 + d * s.w1);
  pt.dv = -rmd1 * (s.dw2 + d * s.w2);
  return pt;
}

void IntegratorSettings::validate() const {
  auto fail = [](const std::string& m) { throw DomainError("integrator settings: " + m); };
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) fail("tolerances must be positive");
  if (!(t_max > t_min) || !std::isfinite(t_min) || !std::isfinite(t_max))
    fail("t_span must be a finite nondegenerate interval");
  if (!(max_step > 0.0)) fail("max_step must be positive");
  if (!(blowup_threshold > 0.0)) fail("blowup_threshold must be positive");
  if (!(positivity_floor >= 0.0)) fail("positivity_floor must be nonnegative");
  if (!(event_refinement_tol > 0.0)) fail("event_refinement_tol must be positive");
  if (max_steps == 0) fail("max_steps must be positive");
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SignChange: return "SignChange";
    case EventKind::BlowUp: return "BlowUp";
    case EventKind::PositivityLoss: return "PositivityLoss";
    case EventKind::LocalMin: return "LocalMin";
    case EventKind::LocalMax: return "LocalMax";
    case EventKind::DegenerateCritical: return "DegenerateCritical";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& name) {
  for (auto k : {EventKind::SignChange, EventKind::BlowUp, EventKind::PositivityLoss,
                 EventKind::LocalMin, EventKind::LocalMax, EventKind::DegenerateCritical})
    if (name == to_string(k)) return k;
  throw DomainError("unknown event kind '" + name + "'");
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "Completed";
    case RunStatus::TerminalEvent: return "TerminalEvent";
    case RunStatus::StepSizeUnderflow: return "StepSizeUnderflow";
    case RunStatus::StepLimit: return "StepLimit";
  }
  return "?";
}

RunStatus run_status_from_string(const std::string& name) {
  for (auto s : {RunStatus::Completed, RunStatus::TerminalEvent, RunStatus::StepSizeUnderflow,
                 RunStatus::StepLimit})
    if (name == to_string(s)) return s;
  throw DomainError("unknown run status '" + name + "'");
}

std::array<double, 4> DenseSegment::eval(double t) const {
  const double th = (t - t0) / h;
  const double th1 = 1.0 - th;
  std::array<double, 4> y{};
  for (int i = 0; i < 4; ++i)
    y[i] = coeff[0][i] +
           th * (coeff[1][i] + th1 * (coeff[2][i] + th * (coeff[3][i] + th1 * coeff[4][i])));
  return y;
}

FowlerState Trajectory::state_at(double t) const {
  if (!(t >= t_begin() && t <= t_end())) {
    std::ostringstream msg;
    msg << "t = " << t << " outside trajectory range [" << t_begin() << ", " << t_end() << "]";
    throw DomainError(msg.str());
  }
  if (segments.empty()) return nodes.front();
  auto it = std::lower_bound(segments.begin(), segments.end(), t,
                             [](const DenseSegment& s, double x) { return s.t_hi < x; });
  if (it == segments.end()) it = std::prev(segments.end());
  return FowlerState::from_phase(t, it->eval(t));
}

bool Trajectory::has_terminal_event() const {
  return forward_status == RunStatus::TerminalEvent || backward_status == RunStatus::TerminalEvent;
}

double drift_bound(double psi0) { return 1e-8 * std::max(1.0, std::abs(psi0)); }

Trajectory integrate(const SystemParams& sp, const FowlerState& initial,
                     const IntegratorSettings& st) {
  st.validate();
  if (!initial.finite()) throw DomainError("initial state must be finite");
  if (initial.t < st.t_min || initial.t > st.t_max)
    throw DomainError("initial time lies outside t_span");

  Trajectory traj;
  traj.params = sp;
  traj.settings = st;
  traj.initial = initial;
  traj.psi0 = psi(sp, initial);

  // Data already outside the admissible region terminates at the initial time.
  std::optional<Event> immediate;
  const auto y0 = initial.phase();
  for (const auto& probe : probes_for(st)) {
    if (probe.kind == EventKind::SignChange) continue;
    if (probe_value(probe, st, y0) <= 0.0) {
      immediate = Event{probe.kind, probe.component, initial.t, initial};
      break;
    }
  }

  DirectionRun fwd, bwd;
  if (immediate) {
    fwd.status = bwd.status = RunStatus::TerminalEvent;
    traj.events.push_back(*immediate);
  } else {
    fwd = run_direction(sp, initial, st.t_max, st);
    bwd = run_direction(sp, initial, st.t_min, st);
  }

  traj.nodes.reserve(bwd.nodes.size() + 1 + fwd.nodes.size());
  traj.nodes.assign(bwd.nodes.rbegin(), bwd.nodes.rend());
  traj.initial_index = traj.nodes.size();
  traj.nodes.push_back(initial);
  traj.nodes.insert(traj.nodes.end(), fwd.nodes.begin(), fwd.nodes.end());

  traj.segments.assign(bwd.segments.rbegin(), bwd.segments.rend());
  traj.segments.insert(traj.segments.end(), fwd.segments.begin(), fwd.segments.end());

  traj.events.insert(traj.events.end(), bwd.events.begin(), bwd.events.end());
  traj.events.insert(traj.events.end(), fwd.events.begin(), fwd.events.end());
  std::stable_sort(traj.events.begin(), traj.events.end(),
                   [](const Event& a, const Event& b) { return event_order(a, b, 1.0); });

  traj.forward_status = fwd.status;
  traj.backward_status = bwd.status;
  traj.error_estimate = fwd.err_sum + bwd.err_sum;

  traj.psi.reserve(traj.nodes.size());
  for (const auto& node : traj.nodes) {
    const double e = psi(sp, node);
    traj.psi.push_back(e);
    traj.drift = std::max(traj.drift, std::abs(e - traj.psi0));
  }
  auto trustworthy = [](RunStatus s) {
    return s == RunStatus::Completed || s == RunStatus::TerminalEvent;
  };
  traj.certified = trustworthy(fwd.status) && trustworthy(bwd.status) &&
                   traj.drift <= drift_bound(traj.psi0);
  return traj;
}

std::vector<Event> detect_extrema(const Trajectory& traj) {
  constexpr int kSub = 8;
  const auto& sp = traj.params;
  const double noise = traj.settings.abs_tol;
  const double degenerate = 10.0 * traj.settings.abs_tol;
  const double tol = traj.settings.event_refinement_tol;

  std::vector<Event> out;
  auto classify_at = [&](int i, double t) {
    const auto s = FowlerState::from_phase(t, traj.state_at(t).phase());
    const double dd = rhs(sp, s)[2 + i];
    Event ev;
    ev.component = i;
    ev.t = t;
    ev.state = s;
    if (std::abs(dd) < degenerate)
      ev.kind = EventKind::DegenerateCritical;
    else
      ev.kind = dd > 0.0 ? EventKind::LocalMin : EventKind::LocalMax;
    out.push_back(ev);
  };

  for (const auto& seg : traj.segments) {
    for (int i = 0; i < 2; ++i) {
      auto g = [&](double t) { return seg.eval(t)[2 + i]; };
      std::array<double, kSub + 1> ts{}, gs{};
      for (int j = 0; j <= kSub; ++j) {
        ts[j] = seg.t_lo + (seg.t_hi - seg.t_lo) * j / kSub;
        gs[j] = g(ts[j]);
      }
      for (int j = 0; j < kSub; ++j) {
        // Roundoff-level wiggles of w' (constant orbits) are not critical points.
        if (std::max(std::abs(gs[j]), std::abs(gs[j + 1])) <= noise) continue;
        if (gs[j] == 0.0) {
          classify_at(i, ts[j]);
          continue;
        }
        if (gs[j + 1] == 0.0 || (gs[j] < 0.0) == (gs[j + 1] < 0.0)) continue;
        double lo = ts[j], hi = ts[j + 1];
        const bool lo_neg = gs[j] < 0.0;
        while (hi - lo > tol &&
               hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi))) {
          const double mid = 0.5 * (lo + hi);
          if ((g(mid) < 0.0) == lo_neg)
            lo = mid;
          else
            hi = mid;
        }
        classify_at(i, std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.component != b.component) return a.component < b.component;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return out;
}

}  // namespace fowler
