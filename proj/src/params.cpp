#include "fowler/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "fowler/errors.hpp"

namespace fowler {

double unit_sphere_area(int N) {
  const double half = 0.5 * N;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

SystemParams make_params(int N, double mu1, double mu2, double beta) {
  if (N < 3) {
    std::ostringstream msg;
    msg << "dimension N must be >= 3 (got " << N << ")";
    throw DomainError(msg.str());
  }
  for (auto [name, value] : {std::pair{"mu1", mu1}, std::pair{"mu2", mu2},
                             std::pair{"beta", beta}}) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      std::ostringstream msg;
      msg << name << " must be a positive finite real (got " << value << ")";
      throw DomainError(msg.str());
    }
  }

  SystemParams sp;
  sp.N = N;
  sp.mu1 = mu1;
  sp.mu2 = mu2;
  sp.beta = beta;
  sp.delta = 0.5 * (N - 2);
  sp.p = static_cast<double>(N) / (N - 2);
  sp.two_star = 2.0 * N / (N - 2);
  sp.sphere_area = unit_sphere_area(N);
  const double inv = 1.0 / (2.0 * sp.p - 2.0);
  const double d2 = sp.delta * sp.delta;
  for (int i = 0; i < 2; ++i) {
    sp.lambda[i] = std::pow(sp.p * d2 / sp.mu(i), inv);
    sp.lambda_star[i] = std::pow(d2 / sp.mu(i), inv);
  }
  return sp;
}

double coupling_ratio_residual(const SystemParams& sp, double s) {
  const double p = sp.p;
  return sp.mu2 * std::pow(s, 2 * p - 2) + sp.beta * std::pow(s, p - 2) -
         sp.beta * std::pow(s, p) - sp.mu1;
}

namespace {

double ratio_residual_derivative(const SystemParams& sp, double s) {
  const double p = sp.p;
  return sp.mu2 * (2 * p - 2) * std::pow(s, 2 * p - 3) +
         sp.beta * (p - 2) * std::pow(s, p - 3) -
         sp.beta * p * std::pow(s, p - 1);
}

// Root of g(s) on the log grid; the bracket closest to s = 1 wins when g has
// several positive roots.
std::optional<double> find_ratio(const SystemParams& sp,
                                 const CouplingOptions& opts) {
  if (sp.mu1 == sp.mu2) return 1.0;

  const double x_lo = std::log(opts.s_min);
  const double x_hi = std::log(opts.s_max);
  constexpr int kGrid = 1600;
  const auto g = [&](double x) { return coupling_ratio_residual(sp, std::exp(x)); };

  // Grid values whose magnitude is below the rounding noise of the four
  // terms carry no sign information and are skipped when looking for a
  // sign change; otherwise cancellation near s = 0 or s = inf fakes roots.
  const auto noise = [&](double x) {
    const double s = std::exp(x), p = sp.p;
    return 16 * std::numeric_limits<double>::epsilon() *
           (sp.mu2 * std::pow(s, 2 * p - 2) + sp.beta * std::pow(s, p - 2) +
            sp.beta * std::pow(s, p) + sp.mu1);
  };

  std::optional<std::pair<double, double>> best;
  double best_dist = std::numeric_limits<double>::infinity();
  std::optional<std::pair<double, double>> trusted;  // (x, g) with a reliable sign
  for (int j = 0; j <= kGrid; ++j) {
    const double x = x_lo + (x_hi - x_lo) * j / kGrid;
    const double gx = g(x);
    if (std::abs(gx) <= noise(x)) continue;
    if (trusted && (trusted->second < 0.0) != (gx < 0.0)) {
      const double dist = std::min(std::abs(trusted->first), std::abs(x));
      if (dist < best_dist) {
        best_dist = dist;
        best = std::pair{trusted->first, x};
      }
    }
    trusted = std::pair{x, gx};
  }
  if (!best) return std::nullopt;

  auto [a, b] = *best;
  double ga = g(a);
  if (ga == 0.0) return std::exp(a);
  for (int i = 0; i < opts.bisection_steps; ++i) {
    const double m = 0.5 * (a + b);
    const double gm = g(m);
    if (gm == 0.0) return std::exp(m);
    if ((gm < 0.0) == (ga < 0.0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }

  // Newton polish in s, guarded by the final bracket.
  const double s_lo = std::exp(std::min(a, b));
  const double s_hi = std::exp(std::max(a, b));
  double s = std::exp(0.5 * (a + b));
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double gs = coupling_ratio_residual(sp, s);
    const double dg = ratio_residual_derivative(sp, s);
    if (gs == 0.0 || dg == 0.0) break;
    const double next = s - gs / dg;
    if (!(next > 0.5 * s_lo && next < 2.0 * s_hi)) break;
    const double step = std::abs(next - s);
    s = next;
    if (step <= 4 * std::numeric_limits<double>::epsilon() * s) break;
  }
  return s;
}

}  // namespace

CouplingSolution solve_scaled_coupling(const SystemParams& sp, double rhs,
                                       const CouplingOptions& opts) {
  if (!(rhs > 0.0)) throw DomainError("coupling right-hand side must be positive");
  const auto s = find_ratio(sp, opts);
  if (!s) {
    std::ostringstream msg;
    msg << "no positive solution of the coupling system for N=" << sp.N
        << ", mu1=" << sp.mu1 << ", mu2=" << sp.mu2 << ", beta=" << sp.beta
        << " (ratio equation has no sign change on [" << opts.s_min << ", "
        << opts.s_max << "])";
    throw NoPositiveSolution(msg.str());
  }

  const double p = sp.p;
  CouplingSolution sol;
  sol.k = std::pow(rhs / (sp.mu1 + sp.beta * std::pow(*s, p)), 1.0 / (2 * p - 2));
  sol.l = *s * sol.k;
  const double k = sol.k;
  const double l = sol.l;
  sol.residuals[0] = sp.mu1 * std::pow(k, 2 * p - 2) +
                     sp.beta * std::pow(k, p - 2) * std::pow(l, p) - rhs;
  sol.residuals[1] = sp.mu2 * std::pow(l, 2 * p - 2) +
                     sp.beta * std::pow(l, p - 2) * std::pow(k, p) - rhs;

  const double worst = std::max(std::abs(sol.residuals[0]), std::abs(sol.residuals[1]));
  if (!(worst < opts.residual_tol * std::max(1.0, rhs))) {
    std::ostringstream msg;
    msg << "coupling solver residual " << worst << " above tolerance "
        << opts.residual_tol;
    throw ConvergenceFailure(msg.str());
  }
  return sol;
}

CouplingSolution solve_coupling(const SystemParams& sp, const CouplingOptions& opts) {
  return solve_scaled_coupling(sp, 1.0, opts);
}

double standard_bubble(int N, double eps, double r) {
  if (!(eps > 0.0)) throw DomainError("bubble scale eps must be positive");
  if (!(r >= 0.0)) throw DomainError("bubble radius must be nonnegative");
  const double d = 0.5 * (N - 2);
  return std::pow(static_cast<double>(N) * (N - 2), 0.5 * d) *
         std::pow(eps / (eps * eps + r * r), d);
}

double standard_bubble_apex(int N) {
  const double d = 0.5 * (N - 2);
  return std::pow(0.25 * N * (N - 2), 0.5 * d);
}

std::pair<double, double> bubble_radial(const SystemParams& sp, double eps, double r) {
  const auto kl = solve_coupling(sp);
  const double U = standard_bubble(sp.N, eps, r);
  return {kl.k * U, kl.l * U};
}

FowlerState bubble_fowler(const SystemParams& sp, double eps, double t) {
  if (!(eps > 0.0)) throw DomainError("bubble scale eps must be positive");
  const auto kl = solve_coupling(sp);
  // r^delta U(r) with r = e^{-t} equals [N(N-2)]^{delta/2} (2 cosh(t + ln eps))^{-delta}.
  const double shift = t + std::log(eps);
  const double amp = std::pow(static_cast<double>(sp.N) * (sp.N - 2), 0.5 * sp.delta);
  const double W = amp * std::pow(2.0 * std::cosh(shift), -sp.delta);
  const double dW = -sp.delta * std::tanh(shift) * W;
  return {t, kl.k * W, kl.l * W, kl.k * dW, kl.l * dW};
}

CylinderSolution cylinder_state(const SystemParams& sp) {
  const double d2 = sp.delta * sp.delta;
  const auto c = solve_scaled_coupling(sp, d2);
  CylinderSolution cyl;
  cyl.state = {0.0, c.k, c.l, 0.0, 0.0};
  cyl.K = -(d2 / sp.N) * (c.k * c.k + c.l * c.l);
  return cyl;
}

}  // namespace fowler
