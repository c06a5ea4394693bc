#pragma once

#include <array>

#include "fowler/dynamics.hpp"
#include "fowler/params.hpp"
#include "fowler/state.hpp"

namespace fowler {

// Fowler energy
//   1/2 (|w1'|^2 + |w2'|^2 - delta^2 w1^2 - delta^2 w2^2)
//   + 1/(2p) (mu1 |w1|^{2p} + 2 beta |w1|^p |w2|^p + mu2 |w2|^{2p}).
double psi(const SystemParams& params, const FowlerState& s);

// Largest absolute term of psi, used to scale tolerances.
double psi_scale(const SystemParams& params, const FowlerState& s);

// f_i = -1/2 |w_i'|^2 + delta^2/2 w_i^2 - mu_i/(2p) |w_i|^{2p}
std::array<double, 2> f_pair(const SystemParams& params, const FowlerState& s);

// Analytic derivative beta |w_i|^{p-1} |w_j|^p w_i' of f_i along solutions.
std::array<double, 2> f_pair_derivative(const SystemParams& params,
                                        const FowlerState& s);

// Radial Pohozaev functional K(r; u, v) on the sphere of radius r.
double pohozaev_system(const SystemParams& params, double r, double u, double v,
                       double du, double dv);
double pohozaev_system(const SystemParams& params, const RadialPoint& pt);

// P(r; u) for -Delta u = coefficient u^{2*-1} in dimension N.
double pohozaev_scalar(int N, double coefficient, double r, double u, double du);

struct InvariantReport {
  static constexpr double kTolerance = 1e-9;

  double psi_drift = 0.0;
  std::array<bool, 2> f_positive{};
  std::array<double, 2> f_margin{};  // min f_i
  std::array<bool, 2> lambda_bound{};
  std::array<double, 2> lambda_margin{};  // lambda_i - max w_i
  std::array<bool, 2> gradient_bound{};
  std::array<double, 2> gradient_margin{};  // min (delta w_i - |w_i'|)
  bool f_w_monotone_coupling = true;
  std::size_t coupling_checks = 0;
  std::size_t coupling_violations = 0;
  double pohozaev_match = 0.0;  // max |K(r) - sigma psi|
  double pohozaev_scale = 0.0;  // max sigma |psi| over the same grid
  std::size_t samples = 0;

  bool all_pass() const;
};

// Every monitor at all nodes plus interior dense samples of every step.
InvariantReport monitor(const Trajectory& traj, int samples_per_step = 10);

}  // namespace fowler
