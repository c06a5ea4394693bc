#include "fowler/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fowler/errors.hpp"
#include "fowler/invariants.hpp"
#include "fowler/rng.hpp"

namespace fowler {

InitialData make_initial_data(const SystemParams& sp, double a1, double a2, double b1,
                              double b2) {
  InitialData d{a1, a2, b1, b2, 0.0};
  if (!d.state().finite()) throw DomainError("initial data must be finite");
  d.psi0 = psi(sp, d.state());
  return d;
}

const char* to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::UniformBox: return "uniform_box";
    case SamplerKind::PsiZeroSurface: return "psi_zero_surface";
    case SamplerKind::NearCylinder: return "near_cylinder";
    case SamplerKind::NearCylinderProportional: return "near_cylinder_proportional";
    case SamplerKind::Explicit: return "explicit";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  for (auto k : {SamplerKind::UniformBox, SamplerKind::PsiZeroSurface, SamplerKind::NearCylinder,
                 SamplerKind::NearCylinderProportional, SamplerKind::Explicit})
    if (name == to_string(k)) return k;
  throw DomainError("unknown sampler '" + name + "'");
}

namespace {

std::optional<InitialData> attempt(const SystemParams& sp, const SamplerSpec& spec,
                                   CounterRng& rng, std::string& reason) {
  switch (spec.kind) {
    case SamplerKind::UniformBox: {
      double x[4];
      for (double& v : x) v = rng.uniform(-spec.box, spec.box);
      auto d = make_initial_data(sp, x[0], x[1], x[2], x[3]);
      if (d.psi0 > spec.psi_min) return d;
      reason = "psi_below_min";
      return std::nullopt;
    }
    case SamplerKind::PsiZeroSurface: {
      double x[4];
      for (double& v : x) v = rng.uniform(-spec.box, spec.box);
      const double V = psi(sp, {0.0, x[0], x[1], 0.0, 0.0});
      const double b2 = x[2] * x[2] + x[3] * x[3];
      if (!(V < 0.0) || !(b2 > 0.0)) {
        // SamplerDegenerate: no real rescaling of b reaches psi = 0.
        reason = "psi_zero_no_real_root";
        return std::nullopt;
      }
      const double scale = std::sqrt(-2.0 * V / b2);
      auto d = make_initial_data(sp, x[0], x[1], scale * x[2], scale * x[3]);
      if (std::abs(d.wronskian()) > spec.wronskian_min) return d;
      reason = "wronskian_below_min";
      return std::nullopt;
    }
    case SamplerKind::NearCylinder: {
      const auto cyl = cylinder_state(sp).state;
      const double sigma = spec.sigma_scale * std::hypot(cyl.w1, cyl.w2);
      double x[4];
      for (double& v : x) v = sigma * rng.normal();
      auto d = make_initial_data(sp, cyl.w1 + x[0], cyl.w2 + x[1], x[2], x[3]);
      if (!(d.a1 > 0.0 && d.a2 > 0.0)) {
        reason = "not_positive";
        return std::nullopt;
      }
      if (!(d.psi0 < 0.0)) {
        reason = "psi_not_negative";
        return std::nullopt;
      }
      return d;
    }
    case SamplerKind::NearCylinderProportional: {
      const auto cyl = cylinder_state(sp).state;
      const double amp = 1.0 + spec.sigma_scale * rng.normal();
      const double vel = spec.sigma_scale * rng.normal();
      auto d = make_initial_data(sp, amp * cyl.w1, amp * cyl.w2, vel * cyl.w1, vel * cyl.w2);
      if (!(amp > 0.0)) {
        reason = "not_positive";
        return std::nullopt;
      }
      if (!(d.psi0 < 0.0)) {
        reason = "psi_not_negative";
        return std::nullopt;
      }
      return d;
    }
    case SamplerKind::Explicit:
      break;
  }
  reason = "unsupported";
  return std::nullopt;
}

void add_counts(std::map<std::string, std::size_t>& into,
                const std::map<std::string, std::size_t>& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

IntegratorSettings signed_settings(IntegratorSettings s, double horizon) {
  s.mode = IntegrationMode::Signed;
  s.stop_on_sign_change = true;
  s.t_min = -horizon;
  s.t_max = horizon;
  return s;
}

void finish_counts(ExperimentReport& rep) {
  rep.n_runs = rep.runs.size();
  for (const auto& run : rep.runs) {
    ++rep.counts[to_string(run.verdict)];
    if (run.failure) rep.failures.push_back(run);
  }
}

}  // namespace

Draw draw_initial(const SystemParams& sp, const SamplerSpec& spec, std::size_t index) {
  Draw out;
  if (spec.kind == SamplerKind::Explicit) {
    if (index < spec.draws.size()) {
      const auto& d = spec.draws[index];
      out.data = make_initial_data(sp, d.a1, d.a2, d.b1, d.b2);
    }
    return out;
  }
  for (int j = 0; j < spec.max_attempts; ++j) {
    CounterRng rng(spec.seed, index, static_cast<std::uint64_t>(j));
    std::string reason;
    if (auto d = attempt(sp, spec, rng, reason)) {
      out.data = d;
      return out;
    }
    ++out.rejections[reason];
  }
  ++out.rejections["attempts_exhausted"];
  return out;
}

bool satisfies_sign_change_hypothesis(const InitialData& d, const SignChangeOptions& opts) {
  if (d.psi0 > opts.psi_tol) return true;
  return std::abs(d.psi0) <= opts.psi_tol && d.wronskian() != 0.0;
}

RunRecord sign_change_run(const SystemParams& sp, const InitialData& data,
                          const IntegratorSettings& base, const SignChangeOptions& opts) {
  if (!satisfies_sign_change_hypothesis(data, opts)) {
    std::ostringstream msg;
    msg << "sign-change hypothesis fails: need psi0 > 0, or psi0 = 0 with a1 b2 - a2 b1 != 0 "
        << "(psi0 = " << data.psi0 << ", wronskian = " << data.wronskian() << ")";
    throw DomainError(msg.str());
  }
  RunRecord rec;
  rec.data = data;
  const auto traj = integrate(sp, data.state(), signed_settings(base, opts.horizon));
  const auto c = classify(traj);
  rec.verdict = c.verdict;
  rec.K_value = c.K_value;
  rec.certified = traj.certified;
  for (const auto& e : traj.events) {
    if (e.kind != EventKind::SignChange) continue;
    if (!rec.event_t || std::abs(e.t) < std::abs(*rec.event_t)) rec.event_t = e.t;
  }
  if (!rec.event_t) {
    rec.failure = true;
    rec.note = "no sign change within the horizon";
  }
  return rec;
}

ExperimentReport sign_change_experiment(const SystemParams& sp, const SamplerSpec& sampler,
                                        std::size_t n_runs, const IntegratorSettings& settings,
                                        const SignChangeOptions& opts,
                                        const ExperimentOptions& exec) {
  settings.validate();
  ExperimentReport rep;
  rep.experiment = "sign_change";
  rep.seed = sampler.seed;
  rep.params = {sp};
  rep.regime = estimate_regime(sp);

  std::vector<Draw> draws(n_runs);
  std::vector<std::optional<RunRecord>> runs(n_runs);
  parallel_for(n_runs, exec.threads, [&](std::size_t i) {
    draws[i] = draw_initial(sp, sampler, i);
    if (!draws[i].data) return;
    if (!satisfies_sign_change_hypothesis(*draws[i].data, opts)) {
      ++draws[i].rejections["hypothesis_not_met"];
      return;
    }
    auto rec = sign_change_run(sp, *draws[i].data, settings, opts);
    rec.index = i;
    runs[i] = std::move(rec);
  });

  double latest = 0.0;
  for (std::size_t i = 0; i < n_runs; ++i) {
    add_counts(rep.rejected_draws, draws[i].rejections);
    if (!runs[i]) continue;
    if (runs[i]->event_t) latest = std::max(latest, std::abs(*runs[i]->event_t));
    rep.runs.push_back(std::move(*runs[i]));
  }
  finish_counts(rep);
  rep.summary["max_abs_event_t"] = latest;
  rep.summary["horizon"] = opts.horizon;
  return rep;
}

ShootResult shoot_entire(const SystemParams& sp, const IntegratorSettings& base,
                         const ShootOptions& opts) {
  CouplingSolution kl;
  try {
    kl = solve_coupling(sp);
  } catch (const NoPositiveSolution& e) {
    throw BracketFailure(std::string("no positive (k, l) to fix the shooting ray: ") + e.what());
  }
  const double ratio = kl.l / kl.k;
  IntegratorSettings settings = base;
  settings.mode = IntegrationMode::Positive;
  settings.stop_on_sign_change = false;
  settings.validate();
  if (!(settings.t_min < 0.0 && settings.t_max > 0.0))
    throw DomainError("shooting needs a window around t = 0");

  auto launch = [&](double a) { return integrate(sp, {0.0, a, ratio * a, 0.0, 0.0}, settings); };
  auto loses = [](const Trajectory& tr) {
    for (const auto& e : tr.events)
      if (e.kind == EventKind::PositivityLoss || e.kind == EventKind::SignChange ||
          e.kind == EventKind::BlowUp)
        return true;
    return false;
  };

  double lo = 0.01 * sp.lambda[0];
  double hi = sp.lambda[0];
  int n = 0;
  while (loses(launch(lo)) && n++ < opts.bracket_expansions) lo *= 0.5;
  n = 0;
  while (!loses(launch(hi)) && n++ < opts.bracket_expansions) hi *= 2.0;
  if (loses(launch(lo)) || !loses(launch(hi)) || !(lo < hi)) {
    std::ostringstream msg;
    msg << "shooting bracket [" << lo << ", " << hi << "] does not separate loss from return";
    throw BracketFailure(msg.str());
  }

  ShootResult res;
  res.ratio = ratio;
  int it = 0;
  for (; it < opts.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    (loses(launch(mid)) ? hi : lo) = mid;
  }
  res.iterations = it;
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  res.apex = make_initial_data(sp, lo, ratio * lo, 0.0, 0.0);
  res.trajectory = launch(lo);
  return res;
}

ExperimentReport semi_singular_search(const SystemParams& sp, const SamplerSpec& sampler,
                                      std::size_t n_runs, const IntegratorSettings& base,
                                      const ExperimentOptions& exec) {
  if (sp.N < 4) throw DomainError("semi-singular search is defined for N >= 4");
  IntegratorSettings settings = base;
  settings.mode = IntegrationMode::Positive;
  settings.stop_on_sign_change = false;
  settings.validate();

  ExperimentReport rep;
  rep.experiment = "semi_singular_search";
  rep.seed = sampler.seed;
  rep.params = {sp};
  rep.regime = estimate_regime(sp);
  const bool sharp_regime = sp.N >= 5 || sp.beta >= 3.0 * std::max(sp.mu1, sp.mu2);
  const double lambda_max = std::max(sp.lambda[0], sp.lambda[1]);
  constexpr double kBoundSlack = 1e-6;

  std::vector<Draw> draws(n_runs);
  std::vector<std::optional<RunRecord>> runs(n_runs);
  parallel_for(n_runs, exec.threads, [&](std::size_t i) {
    draws[i] = draw_initial(sp, sampler, i);
    if (!draws[i].data) return;
    RunRecord rec;
    rec.index = i;
    rec.data = *draws[i].data;
    const auto traj = integrate(sp, rec.data.state(), settings);
    const auto c = classify(traj);
    rec.verdict = c.verdict;
    rec.K_value = c.K_value;
    rec.certified = traj.certified;
    if (c.verdict == Verdict::SemiSingularCandidate) {
      rec.failure = true;
      rec.note = "semi-singular candidate for N >= 4";
    } else if (c.evidence.theorem_violation) {
      rec.failure = true;
      rec.note = c.evidence.reason;
    } else if (c.verdict == Verdict::BothSingularCandidate) {
      rec.estimate = sharp_constants(traj, c);
      rec.inf_w1 = c.evidence.inf_w[0];
      rec.proportionality = proportionality_probe(traj);
      if (sharp_regime && rec.estimate->C2 > lambda_max + kBoundSlack) {
        rec.failure = true;
        rec.note = "upper constant exceeds max lambda_i";
      }
    }
    runs[i] = std::move(rec);
  });

  const double inf = std::numeric_limits<double>::infinity();
  double min_c1 = inf, max_c2 = -inf, max_ratio = -inf, min_inf_w1 = inf, max_prop = -inf;
  std::size_t n_both = 0;
  for (std::size_t i = 0; i < n_runs; ++i) {
    add_counts(rep.rejected_draws, draws[i].rejections);
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    if (r.estimate) {
      ++n_both;
      min_c1 = std::min(min_c1, r.estimate->C1);
      max_c2 = std::max(max_c2, r.estimate->C2);
      max_ratio = std::max(max_ratio, r.estimate->ratio);
      min_inf_w1 = std::min(min_inf_w1, *r.inf_w1);
      max_prop = std::max(max_prop, *r.proportionality);
    }
    rep.runs.push_back(std::move(*runs[i]));
  }
  finish_counts(rep);
  rep.summary["lambda_max"] = lambda_max;
  rep.summary["both_singular"] = static_cast<double>(n_both);
  if (n_both > 0) {
    rep.summary["min_C1"] = min_c1;
    rep.summary["max_C2"] = max_c2;
    rep.summary["max_C2_over_C1"] = max_ratio;
    rep.summary["min_inf_w1"] = min_inf_w1;
    rep.summary["max_proportionality_deviation"] = max_prop;
  }
  return rep;
}

SweepResult sweep(const std::vector<SystemParams>& params_grid,
                  const std::vector<InitialSpec>& initial_grid,
                  const IntegratorSettings& settings, const ExperimentOptions& exec) {
  settings.validate();
  const std::size_t n = params_grid.size() * initial_grid.size();
  SweepResult out;
  auto& rep = out.report;
  rep.experiment = "sweep";
  rep.params = params_grid;
  std::vector<RunRecord> runs(n);
  if (exec.keep_trajectories) out.trajectories.resize(n);

  parallel_for(n, exec.threads, [&](std::size_t i) {
    RunRecord& rec = runs[i];
    rec.index = i;
    rec.params_index = i / initial_grid.size();
    rec.initial_index = i % initial_grid.size();
    const auto& sp = params_grid[rec.params_index];
    const auto& init = initial_grid[rec.initial_index];
    try {
      FowlerState s0;
      switch (init.kind) {
        case InitialSpec::Kind::Data: s0 = init.data.state(); break;
        case InitialSpec::Kind::Bubble: s0 = bubble_fowler(sp, init.eps, 0.0); break;
        case InitialSpec::Kind::Cylinder: s0 = cylinder_state(sp).state; break;
      }
      rec.data = make_initial_data(sp, s0.w1, s0.w2, s0.dw1, s0.dw2);
      auto traj = integrate(sp, s0, settings);
      const auto c = classify(traj);
      rec.verdict = c.verdict;
      rec.K_value = c.K_value;
      rec.certified = traj.certified;
      rec.note = c.evidence.reason;
      if (c.evidence.theorem_violation) rec.failure = true;
      if (exec.keep_trajectories) out.trajectories[i] = std::move(traj);
    } catch (const Error& e) {
      rec.verdict = Verdict::Inconclusive;
      rec.error = std::string(e.kind()) + ": " + e.what();
    }
  });
  rep.runs = std::move(runs);
  finish_counts(rep);
  std::size_t errors = 0;
  for (const auto& r : rep.runs) errors += !r.error.empty();
  rep.summary["errors"] = static_cast<double>(errors);
  return out;
}

bool has_theorem_failure(const ExperimentReport& report) { return !report.failures.empty(); }

}  // namespace fowler
