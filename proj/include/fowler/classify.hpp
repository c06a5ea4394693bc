#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fowler/dynamics.hpp"
#include "fowler/invariants.hpp"

namespace fowler {

enum class Verdict {
  EntireCandidate,
  BothSingularCandidate,
  SemiSingularCandidate,
  SignChanging,
  BlowUp,
  Inconclusive,
};

inline constexpr std::array<Verdict, 6> kAllVerdicts = {
    Verdict::EntireCandidate, Verdict::BothSingularCandidate, Verdict::SemiSingularCandidate,
    Verdict::SignChanging,    Verdict::BlowUp,                Verdict::Inconclusive};

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& name);

// +inf side is t -> +inf (r -> 0), the side that carries the singularity.
enum class Side { Plus, Minus };

struct DecayFit {
  double rate = 0.0;       // fitted exponential decay rate (>0 means decaying)
  double amplitude = 0.0;  // w ~ amplitude * exp(-rate |t|)
  double t_from = 0.0;
  double t_to = 0.0;
};

// Least-squares fit of log w_i over the outer third of the requested side.
// Throws InsufficientWindow when the side covers less than 10 units of t or
// ends in a terminal event.
DecayFit decay_fit(const Trajectory& traj, int component, Side side);
double decay_rate(const Trajectory& traj, int component, Side side);

struct ClassifyOptions {
  double k_tol_factor = 1e-8;
  double decay_tolerance = 0.05;       // relative to delta
  double positivity_evidence = 1e-6;   // inf w_i required for both-singular
  double min_side_window = 10.0;
};

struct ClassificationEvidence {
  double K_tol = 0.0;
  double psi0 = 0.0;
  double window_plus = 0.0;   // covered length on the + side
  double window_minus = 0.0;
  std::array<std::optional<DecayFit>, 2> decay_plus;
  std::array<std::optional<DecayFit>, 2> decay_minus;
  std::array<double, 2> inf_w{};
  std::array<double, 2> sup_w{};
  std::vector<Event> terminal_events;
  InvariantReport margins;
  ClassifyOptions thresholds;
  bool anomaly = false;             // semi-singular with N >= 4
  bool theorem_violation = false;   // certified positive orbit with K > K_tol
  std::string regime;
  std::string reason;
};

struct Classification {
  Verdict verdict = Verdict::Inconclusive;
  double K_value = 0.0;  // sphere_area * psi(initial)
  ClassificationEvidence evidence;
};

// Where the system sits relative to the sharp-estimate hypotheses.
std::string estimate_regime(const SystemParams& params);

Classification classify(const Trajectory& traj, const InvariantReport& report,
                        const ClassifyOptions& opts = {});
Classification classify(const Trajectory& traj, const ClassifyOptions& opts = {});

struct EstimateReport {
  double C1 = 0.0;
  double C2 = 0.0;
  double ratio = 0.0;
  double t_from = 0.0;
  double t_to = 0.0;
  std::string regime;
};

// Best constants in C1 r^{-delta} <= u, v <= C2 r^{-delta} over the window.
// Throws WrongVerdict unless the orbit classifies as both-singular.
EstimateReport sharp_constants(const Trajectory& traj);
EstimateReport sharp_constants(const Trajectory& traj, const Classification& verdict);

// max |w1/w2 - m| / m over dense samples, m the median ratio.
double proportionality_probe(const Trajectory& traj);

// Nodes plus `per_step` interior points of every dense segment, sorted by t.
std::vector<FowlerState> dense_samples(const Trajectory& traj, int per_step = 10);

}  // namespace fowler
