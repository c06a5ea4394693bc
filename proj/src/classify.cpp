#include "fowler/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fowler/errors.hpp"

namespace fowler {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::EntireCandidate: return "EntireCandidate";
    case Verdict::BothSingularCandidate: return "BothSingularCandidate";
    case Verdict::SemiSingularCandidate: return "SemiSingularCandidate";
    case Verdict::SignChanging: return "SignChanging";
    case Verdict::BlowUp: return "BlowUp";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

Verdict verdict_from_string(const std::string& name) {
  for (auto v : kAllVerdicts)
    if (name == to_string(v)) return v;
  throw DomainError("unknown verdict '" + name + "'");
}

std::vector<FowlerState> dense_samples(const Trajectory& traj, int per_step) {
  std::vector<FowlerState> out(traj.nodes.begin(), traj.nodes.end());
  out.reserve(traj.nodes.size() + traj.segments.size() * per_step);
  for (const auto& seg : traj.segments) {
    const double len = seg.t_hi - seg.t_lo;
    if (!(len > 0.0)) continue;
    for (int j = 0; j < per_step; ++j) {
      const double t = seg.t_lo + (j + 0.5) * len / per_step;
      out.push_back(FowlerState::from_phase(t, seg.eval(t)));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const FowlerState& a, const FowlerState& b) { return a.t < b.t; });
  return out;
}

DecayFit decay_fit(const Trajectory& traj, int component, Side side) {
  constexpr double kMinWindow = 10.0;
  constexpr int kSamples = 101;
  const bool plus = side == Side::Plus;
  const double t0 = traj.initial.t;
  const double t_far = plus ? traj.t_end() : traj.t_begin();
  const double length = std::abs(t_far - t0);
  const RunStatus status = plus ? traj.forward_status : traj.backward_status;

  if (status != RunStatus::Completed || length < kMinWindow) {
    std::ostringstream msg;
    msg << "decay fit on the " << (plus ? "+" : "-") << " side needs " << kMinWindow
        << " units of t without terminal events (have " << length << ", status "
        << to_string(status) << ")";
    throw InsufficientWindow(msg.str());
  }

  const double a = plus ? t_far - length / 3.0 : t_far;
  const double b = plus ? t_far : t_far + length / 3.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = 0; j < kSamples; ++j) {
    const double t = a + (b - a) * j / (kSamples - 1);
    const double w = traj.state_at(t).w(component);
    if (!(w > 0.0)) throw DomainError("decay fit met a nonpositive sample");
    const double y = std::log(w);
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
  }
  const double n = kSamples;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;

  DecayFit fit;
  fit.rate = plus ? -slope : slope;
  fit.amplitude = std::exp(intercept);
  fit.t_from = a;
  fit.t_to = b;
  return fit;
}

double decay_rate(const Trajectory& traj, int component, Side side) {
  return decay_fit(traj, component, side).rate;
}

std::string estimate_regime(const SystemParams& sp) {
  if (sp.N >= 5) return "N>=5: sharp estimate holds for every K<0 solution";
  if (sp.N == 4) {
    if (sp.beta >= 3.0 * std::max(sp.mu1, sp.mu2))
      return "N=4, beta>=3max(mu1,mu2): sharp estimate holds for every K<0 solution";
    return "N=4, beta<3max(mu1,mu2): sharp estimate conjectural";
  }
  return "N=3: sharp estimate conditional on nonexistence of semi-singular solutions";
}

Classification classify(const Trajectory& traj, const ClassifyOptions& opts) {
  return classify(traj, monitor(traj), opts);
}

Classification classify(const Trajectory& traj, const InvariantReport& report,
                        const ClassifyOptions& opts) {
  const auto& sp = traj.params;
  Classification out;
  auto& ev = out.evidence;
  ev.thresholds = opts;
  ev.margins = report;
  ev.regime = estimate_regime(sp);
  ev.psi0 = traj.psi0;
  out.K_value = sp.sphere_area * traj.psi0;
  ev.K_tol = opts.k_tol_factor * std::max(1.0, sp.sphere_area * psi_scale(sp, traj.initial));
  ev.window_plus = traj.t_end() - traj.initial.t;
  ev.window_minus = traj.initial.t - traj.t_begin();

  const double inf = std::numeric_limits<double>::infinity();
  ev.inf_w = {inf, inf};
  ev.sup_w = {-inf, -inf};
  for (const auto& s : dense_samples(traj)) {
    for (int i = 0; i < 2; ++i) {
      ev.inf_w[i] = std::min(ev.inf_w[i], s.w(i));
      ev.sup_w[i] = std::max(ev.sup_w[i], s.w(i));
    }
  }

  bool blowup = false, sign = false;
  for (const auto& e : traj.events) {
    if (e.kind == EventKind::BlowUp) blowup = true;
    if (e.kind == EventKind::SignChange || e.kind == EventKind::PositivityLoss) sign = true;
    if (e.kind == EventKind::BlowUp || e.kind == EventKind::SignChange ||
        e.kind == EventKind::PositivityLoss)
      ev.terminal_events.push_back(e);
  }
  if (blowup) {
    out.verdict = Verdict::BlowUp;
    ev.reason = "state left the blow-up threshold";
    return out;
  }
  if (sign) {
    out.verdict = Verdict::SignChanging;
    ev.reason = "a component reached zero";
    return out;
  }
  if (!traj.certified) {
    out.verdict = Verdict::Inconclusive;
    ev.reason = "trajectory not certified (drift or step-size failure)";
    return out;
  }

  for (int i = 0; i < 2; ++i) {
    try {
      ev.decay_plus[i] = decay_fit(traj, i, Side::Plus);
    } catch (const DomainError&) {
    }
    try {
      ev.decay_minus[i] = decay_fit(traj, i, Side::Minus);
    } catch (const DomainError&) {
    }
  }
  const double d = sp.delta;
  auto decays = [&](const std::optional<DecayFit>& f) {
    return f && std::abs(f->rate - d) <= opts.decay_tolerance * d;
  };

  if (std::abs(out.K_value) < ev.K_tol) {
    const bool all = decays(ev.decay_plus[0]) && decays(ev.decay_plus[1]) &&
                     decays(ev.decay_minus[0]) && decays(ev.decay_minus[1]);
    out.verdict = all ? Verdict::EntireCandidate : Verdict::Inconclusive;
    ev.reason = all ? "K vanishes and both components decay at rate delta at both ends"
                    : "K vanishes but the decay evidence is incomplete";
    return out;
  }

  if (out.K_value > ev.K_tol) {
    out.verdict = Verdict::Inconclusive;
    ev.theorem_violation = true;
    ev.reason = "positive orbit with K > 0 survived the full window";
    return out;
  }

  // K < 0: singular candidates.
  const int n_decay = int(decays(ev.decay_plus[0])) + int(decays(ev.decay_plus[1]));
  if (n_decay == 1) {
    const int dec = decays(ev.decay_plus[0]) ? 0 : 1;
    const int other = 1 - dec;
    const auto& fit = *ev.decay_plus[dec];
    double inf_other = inf;
    for (const auto& s : dense_samples(traj))
      if (s.t >= fit.t_from && s.t <= fit.t_to) inf_other = std::min(inf_other, s.w(other));
    const double floor = 10.0 * fit.amplitude * std::exp(-d * ev.window_plus / 3.0);
    if (inf_other > floor) {
      out.verdict = Verdict::SemiSingularCandidate;
      ev.anomaly = sp.N >= 4;
      ev.reason = "one component decays at rate delta while the other stays bounded below";
      return out;
    }
  }
  if (n_decay == 0 && ev.inf_w[0] > opts.positivity_evidence &&
      ev.inf_w[1] > opts.positivity_evidence) {
    out.verdict = Verdict::BothSingularCandidate;
    ev.reason = "K < 0 and both components stay bounded away from zero";
    return out;
  }
  out.verdict = Verdict::Inconclusive;
  ev.reason = "K < 0 but neither singular pattern is established";
  return out;
}

EstimateReport sharp_constants(const Trajectory& traj) {
  return sharp_constants(traj, classify(traj));
}

EstimateReport sharp_constants(const Trajectory& traj, const Classification& c) {
  if (c.verdict != Verdict::BothSingularCandidate)
    throw WrongVerdict(std::string("sharp constants need a both-singular candidate, got ") +
                       to_string(c.verdict));
  EstimateReport rep;
  rep.C1 = std::numeric_limits<double>::infinity();
  rep.C2 = -rep.C1;
  for (const auto& s : dense_samples(traj)) {
    rep.C1 = std::min({rep.C1, s.w1, s.w2});
    rep.C2 = std::max({rep.C2, s.w1, s.w2});
  }
  rep.ratio = rep.C2 / rep.C1;
  rep.t_from = traj.t_begin();
  rep.t_to = traj.t_end();
  rep.regime = c.evidence.regime;
  return rep;
}

double proportionality_probe(const Trajectory& traj) {
  const auto samples = dense_samples(traj);
  std::vector<double> ratio;
  ratio.reserve(samples.size());
  for (const auto& s : samples) {
    if (!(s.w1 > 0.0 && s.w2 > 0.0))
      throw DomainError("proportionality probe needs a positive orbit");
    ratio.push_back(s.w1 / s.w2);
  }
  std::vector<double> sorted = ratio;
  const auto mid = sorted.begin() + sorted.size() / 2;
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double m = *mid;
  double worst = 0.0;
  for (double q : ratio) worst = std::max(worst, std::abs(q - m) / m);
  return worst;
}

}  // namespace fowler
