#include "fowler/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fowler/errors.hpp"

namespace fowler {

double psi(const SystemParams& sp, const FowlerState& s) {
  const double d2 = sp.delta * sp.delta;
  const double p = sp.p;
  const double a1 = std::pow(std::abs(s.w1), p);
  const double a2 = std::pow(std::abs(s.w2), p);
  const double kinetic = 0.5 * (s.dw1 * s.dw1 + s.dw2 * s.dw2);
  const double quadratic = 0.5 * d2 * (s.w1 * s.w1 + s.w2 * s.w2);
  const double critical = (sp.mu1 * a1 * a1 + 2.0 * sp.beta * a1 * a2 + sp.mu2 * a2 * a2) / (2.0 * p);
  return kinetic - quadratic + critical;
}

double psi_scale(const SystemParams& sp, const FowlerState& s) {
  const double d2 = sp.delta * sp.delta;
  const double p = sp.p;
  const double a1 = std::pow(std::abs(s.w1), p);
  const double a2 = std::pow(std::abs(s.w2), p);
  return std::max({0.5 * (s.dw1 * s.dw1 + s.dw2 * s.dw2),
                   0.5 * d2 * (s.w1 * s.w1 + s.w2 * s.w2),
                   (sp.mu1 * a1 * a1 + 2.0 * sp.beta * a1 * a2 + sp.mu2 * a2 * a2) / (2.0 * p)});
}

std::array<double, 2> f_pair(const SystemParams& sp, const FowlerState& s) {
  const double d2 = sp.delta * sp.delta;
  const double p = sp.p;
  std::array<double, 2> f{};
  for (int i = 0; i < 2; ++i) {
    const double w = s.w(i);
    const double dw = s.dw(i);
    f[i] = -0.5 * dw * dw + 0.5 * d2 * w * w - sp.mu(i) / (2.0 * p) * std::pow(std::abs(w), 2 * p);
  }
  return f;
}

std::array<double, 2> f_pair_derivative(const SystemParams& sp, const FowlerState& s) {
  const double p = sp.p;
  std::array<double, 2> df{};
  for (int i = 0; i < 2; ++i) {
    const double wi = std::abs(s.w(i));
    const double wj = std::abs(s.w(1 - i));
    df[i] = sp.beta * std::pow(wi, p - 1) * std::pow(wj, p) * s.dw(i);
  }
  return df;
}

double pohozaev_system(const SystemParams& sp, double r, double u, double v, double du,
                       double dv) {
  if (!(r > 0.0)) throw DomainError("Pohozaev functional needs r > 0");
  const double ts = sp.two_star;
  const double au = std::pow(std::abs(u), 0.5 * ts);
  const double av = std::pow(std::abs(v), 0.5 * ts);
  // On the sphere of radius r the normal derivative is d/dr and |grad u| = |u'|.
  const double grad2 = du * du + dv * dv;
  const double bracket = 0.5 * (sp.N - 2) * (u * du + v * dv) - 0.5 * r * grad2 + r * grad2 +
                         r / ts * (sp.mu1 * au * au + sp.mu2 * av * av + 2.0 * sp.beta * au * av);
  return sp.sphere_area * std::pow(r, sp.N - 1) * bracket;
}

double pohozaev_system(const SystemParams& sp, const RadialPoint& pt) {
  return pohozaev_system(sp, pt.r, pt.u, pt.v, pt.du, pt.dv);
}

double pohozaev_scalar(int N, double coefficient, double r, double u, double du) {
  if (N < 3) throw DomainError("Pohozaev functional needs N >= 3");
  if (!(r > 0.0)) throw DomainError("Pohozaev functional needs r > 0");
  const double ts = 2.0 * N / (N - 2);
  const double bracket = 0.5 * (N - 2) * u * du - 0.5 * r * du * du + r * du * du +
                         r / ts * coefficient * std::pow(std::abs(u), ts);
  return unit_sphere_area(N) * std::pow(r, N - 1) * bracket;
}

bool InvariantReport::all_pass() const {
  return f_positive[0] && f_positive[1] && lambda_bound[0] && lambda_bound[1] &&
         gradient_bound[0] && gradient_bound[1] && f_w_monotone_coupling &&
         pohozaev_match <= kTolerance * std::max(1.0, pohozaev_scale);
}

InvariantReport monitor(const Trajectory& traj, int samples_per_step) {
  const auto& sp = traj.params;
  const double tol = InvariantReport::kTolerance;
  const double inf = std::numeric_limits<double>::infinity();

  InvariantReport rep;
  rep.f_margin = {inf, inf};
  rep.lambda_margin = {inf, inf};
  rep.gradient_margin = {inf, inf};

  auto visit = [&](const FowlerState& s) {
    ++rep.samples;
    const double e = psi(sp, s);
    rep.psi_drift = std::max(rep.psi_drift, std::abs(e - traj.psi0));
    const auto f = f_pair(sp, s);
    for (int i = 0; i < 2; ++i) {
      rep.f_margin[i] = std::min(rep.f_margin[i], f[i]);
      rep.lambda_margin[i] = std::min(rep.lambda_margin[i], sp.lambda[i] - s.w(i));
      rep.gradient_margin[i] =
          std::min(rep.gradient_margin[i], sp.delta * s.w(i) - std::abs(s.dw(i)));
    }
    const double K = pohozaev_system(sp, to_radial(sp, s));
    const double target = sp.sphere_area * e;
    rep.pohozaev_match = std::max(rep.pohozaev_match, std::abs(K - target));
    rep.pohozaev_scale = std::max(rep.pohozaev_scale, std::abs(target));
  };

  for (const auto& node : traj.nodes) visit(node);

  constexpr double kFdStep = 1e-6;
  for (const auto& seg : traj.segments) {
    const double len = seg.t_hi - seg.t_lo;
    if (!(len > 0.0)) continue;
    const double spacing = len / samples_per_step;
    const double h = std::min(kFdStep, 0.25 * spacing);
    for (int j = 0; j < samples_per_step; ++j) {
      const double t = seg.t_lo + (j + 0.5) * spacing;
      const auto s = FowlerState::from_phase(t, seg.eval(t));
      visit(s);

      // f_i' must carry the sign of w_i'; checked by central differences on
      // the step's own interpolant wherever the sign is decidable.
      const auto fp = f_pair(sp, FowlerState::from_phase(t + h, seg.eval(t + h)));
      const auto fm = f_pair(sp, FowlerState::from_phase(t - h, seg.eval(t - h)));
      const auto analytic = f_pair_derivative(sp, s);
      for (int i = 0; i < 2; ++i) {
        if (std::abs(s.dw(i)) <= tol || std::abs(analytic[i]) <= tol) continue;
        const double fd = (fp[i] - fm[i]) / (2.0 * h);
        ++rep.coupling_checks;
        if ((fd > 0.0) != (s.dw(i) > 0.0)) ++rep.coupling_violations;
      }
    }
  }

  for (int i = 0; i < 2; ++i) {
    rep.f_positive[i] = rep.f_margin[i] > -tol;
    rep.lambda_bound[i] = rep.lambda_margin[i] > -tol;
    rep.gradient_bound[i] = rep.gradient_margin[i] > -tol;
  }
  rep.f_w_monotone_coupling = rep.coupling_violations == 0;
  return rep;
}

}  // namespace fowler
