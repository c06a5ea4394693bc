#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fowler/classify.hpp"
#include "fowler/dynamics.hpp"
#include "fowler/parallel.hpp"
#include "fowler/params.hpp"

namespace fowler {

// Initial values w(0) = a, w'(0) = b at t = 0 and their Fowler energy.
struct InitialData {
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double psi0 = 0.0;

  FowlerState state(double t = 0.0) const { return {t, a1, a2, b1, b2}; }
  double wronskian() const { return a1 * b2 - a2 * b1; }
};

InitialData make_initial_data(const SystemParams& params, double a1, double a2, double b1,
                              double b2);

enum class SamplerKind {
  UniformBox,                // uniform on [-box, box]^4, keep psi0 > psi_min
  PsiZeroSurface,            // uniform draw, b rescaled onto psi = 0
  NearCylinder,              // Gaussian around the cylinder, positive, psi0 < 0
  NearCylinderProportional,  // perturbation inside the invariant ray w2/w1 = C2/C1
  Explicit,                  // caller-supplied list
};

const char* to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::UniformBox;
  std::uint64_t seed = 0;
  double box = 1.0;
  double psi_min = 1e-3;
  double wronskian_min = 1e-3;
  double sigma_scale = 0.05;
  int max_attempts = 10000;
  std::vector<InitialData> draws;  // Explicit only
};

struct Draw {
  std::optional<InitialData> data;
  std::map<std::string, std::size_t> rejections;  // reason -> count
};

// Rejection sampling for draw `index`; attempt j uses the stream (seed, index, j).
Draw draw_initial(const SystemParams& params, const SamplerSpec& spec, std::size_t index);

struct RunRecord {
  std::size_t index = 0;
  std::size_t params_index = 0;
  std::size_t initial_index = 0;
  InitialData data;
  Verdict verdict = Verdict::Inconclusive;
  double K_value = 0.0;
  std::optional<double> event_t;
  std::optional<EstimateReport> estimate;
  std::optional<double> inf_w1;
  std::optional<double> proportionality;
  bool failure = false;
  bool certified = false;
  std::string note;
  std::string error;
  std::string trajectory_path;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t n_runs = 0;
  std::map<std::string, std::size_t> counts;  // verdict name -> runs
  std::vector<RunRecord> runs;
  std::vector<RunRecord> failures;
  std::map<std::string, double> summary;
  std::map<std::string, std::size_t> rejected_draws;
  std::vector<SystemParams> params;
  std::string regime;
};

struct ExperimentOptions {
  unsigned threads = 1;
  bool keep_trajectories = false;
};

struct SignChangeOptions {
  double horizon = 50.0;
  double psi_tol = 1e-12;  // |psi0| below this counts as the psi = 0 branch
};

// Hypothesis check: psi0 > tol, or |psi0| <= tol with a1 b2 - a2 b1 != 0.
bool satisfies_sign_change_hypothesis(const InitialData& data, const SignChangeOptions& opts);

// Signed integration over [-horizon, horizon], stopping at the first zero
// crossing in each direction.
RunRecord sign_change_run(const SystemParams& params, const InitialData& data,
                          const IntegratorSettings& base, const SignChangeOptions& opts = {});

ExperimentReport sign_change_experiment(const SystemParams& params, const SamplerSpec& sampler,
                                        std::size_t n_runs, const IntegratorSettings& settings,
                                        const SignChangeOptions& opts = {},
                                        const ExperimentOptions& exec = {});

struct ShootOptions {
  int iterations = 80;
  int bracket_expansions = 60;
};

struct ShootResult {
  InitialData apex;
  Trajectory trajectory;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int iterations = 0;
  double ratio = 0.0;  // w2/w1 along the shooting ray, l/k
};

// Bisection on the apex amplitude along w' = 0, w2/w1 = l/k: orbits above
// the homoclinic lose positivity, orbits below turn back.
ShootResult shoot_entire(const SystemParams& params, const IntegratorSettings& settings = {},
                         const ShootOptions& opts = {});

ExperimentReport semi_singular_search(const SystemParams& params, const SamplerSpec& sampler,
                                      std::size_t n_runs, const IntegratorSettings& settings,
                                      const ExperimentOptions& exec = {});

struct InitialSpec {
  enum class Kind { Data, Bubble, Cylinder };
  Kind kind = Kind::Data;
  InitialData data;
  double eps = 1.0;
};

struct SweepResult {
  ExperimentReport report;
  std::vector<std::optional<Trajectory>> trajectories;  // when keep_trajectories
};

SweepResult sweep(const std::vector<SystemParams>& params_grid,
                  const std::vector<InitialSpec>& initial_grid,
                  const IntegratorSettings& settings, const ExperimentOptions& exec = {});

// True when the report carries a theorem-level expectation failure.
bool has_theorem_failure(const ExperimentReport& report);

}  // namespace fowler

