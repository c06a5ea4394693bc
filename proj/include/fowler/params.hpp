#pragma once

#include <array>
#include <utility>

#include "fowler/state.hpp"

namespace fowler {

// Dimension and coefficients of the coupled critical system together with
// the exponents and amplitude bounds derived from them. Build through
// make_params(); the derived fields are only consistent when produced there.
struct SystemParams {
  int N = 3;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double beta = 1.0;

  double delta = 0.5;       // (N-2)/2
  double p = 3.0;           // N/(N-2), half the critical exponent
  double two_star = 6.0;    // 2N/(N-2)
  double sphere_area = 0.0; // area of the unit sphere in R^N
  std::array<double, 2> lambda{};       // (p delta^2 / mu_i)^{1/(2p-2)}
  std::array<double, 2> lambda_star{};  // (delta^2 / mu_i)^{1/(2p-2)}

  double mu(int i) const { return i == 0 ? mu1 : mu2; }
};

SystemParams make_params(int N, double mu1, double mu2, double beta);

// 2 pi^{N/2} / Gamma(N/2)
double unit_sphere_area(int N);

struct CouplingSolution {
  double k = 0.0;
  double l = 0.0;
  std::array<double, 2> residuals{};
};

struct CouplingOptions {
  double residual_tol = 1e-12;
  int max_iterations = 200;
  double s_min = 1e-8;
  double s_max = 1e8;
  int bisection_steps = 60;
};

// Positive (k, l) with
//   mu1 k^{2p-2} + beta k^{p-2} l^p = 1,  mu2 l^{2p-2} + beta l^{p-2} k^p = 1.
// Throws NoPositiveSolution or ConvergenceFailure.
CouplingSolution solve_coupling(const SystemParams& params,
                                const CouplingOptions& opts = {});

// Same algebraic system with right-hand side `rhs` in place of 1.
CouplingSolution solve_scaled_coupling(const SystemParams& params, double rhs,
                                       const CouplingOptions& opts = {});

// The reduced ratio equation g(s) = mu2 s^{2p-2} + beta s^{p-2} - beta s^p - mu1.
double coupling_ratio_residual(const SystemParams& params, double s);

// Standard bubble U(r) = [N(N-2)]^{(N-2)/4} (eps / (eps^2 + r^2))^{(N-2)/2}.
double standard_bubble(int N, double eps, double r);

// Fowler image amplitude of U with eps = 1 at t = 0, i.e. (N(N-2)/4)^{delta/2}.
double standard_bubble_apex(int N);

// (k U(r), l U(r)) centred at the origin.
std::pair<double, double> bubble_radial(const SystemParams& params, double eps,
                                        double r);

// Phase point of the bubble family's Fowler image at time t, for the
// scaling parameter eps. Exact closed form: w_i = c_i (eps e^{-t}/(eps^2+e^{-2t}))^delta.
FowlerState bubble_fowler(const SystemParams& params, double eps, double t);

struct CylinderSolution {
  FowlerState state;
  double K = 0.0;  // Fowler energy of the constant orbit, -(delta^2/N)(C1^2+C2^2)
};

CylinderSolution cylinder_state(const SystemParams& params);

}  // namespace fowler
