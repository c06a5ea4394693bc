#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fowler/params.hpp"
#include "fowler/state.hpp"

namespace fowler {

// (w1', w2', w1'', w2'')
using PhaseDerivative = std::array<double, 4>;

// Vector field of the Fowler system. Powers use the odd extension
// |w|^{q-1} w, which is 0 at w = 0 and agrees with w^q on the positive
// quadrant, so the same field serves both integration modes.
PhaseDerivative rhs(const SystemParams& params, const FowlerState& s);

FowlerState to_fowler(const SystemParams& params, double r, double u, double v,
                      double du, double dv);

struct RadialPoint {
  double r = 0.0;
  double u = 0.0;
  double v = 0.0;
  double du = 0.0;
  double dv = 0.0;
};

RadialPoint to_radial(const SystemParams& params, const FowlerState& s);

enum class IntegrationMode {
  Positive,  // terminate with PositivityLoss when a component reaches the floor
  Signed,    // continue through zero crossings using the odd extension
};

struct IntegratorSettings {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double t_min = -30.0;
  double t_max = 30.0;
  double max_step = 1.0;
  double blowup_threshold = 1e3;
  double positivity_floor = 1e-14;
  double event_refinement_tol = 1e-12;
  IntegrationMode mode = IntegrationMode::Positive;
  bool stop_on_sign_change = false;
  std::size_t max_steps = 2'000'000;

  void validate() const;
};

enum class EventKind {
  SignChange,
  BlowUp,
  PositivityLoss,
  LocalMin,
  LocalMax,
  DegenerateCritical,
};

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

struct Event {
  EventKind kind = EventKind::SignChange;
  int component = -1;  // 0 or 1; -1 when the event concerns the whole state
  double t = 0.0;
  FowlerState state;
};

// Continuous extension of one accepted Dormand-Prince step, valid on [t_lo, t_hi].
struct DenseSegment {
  double t0 = 0.0;  // step origin (theta = 0)
  double h = 0.0;   // signed step size
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::array<std::array<double, 4>, 5> coeff{};

  std::array<double, 4> eval(double t) const;
};

enum class RunStatus {
  Completed,
  TerminalEvent,
  StepSizeUnderflow,
  StepLimit,
};

const char* to_string(RunStatus status);
RunStatus run_status_from_string(const std::string& name);

struct Trajectory {
  SystemParams params;
  IntegratorSettings settings;
  FowlerState initial;
  std::vector<FowlerState> nodes;  // strictly increasing in t
  std::vector<double> psi;         // Fowler energy at each node
  std::vector<DenseSegment> segments;  // sorted by t_lo, contiguous
  std::vector<Event> events;           // sorted by t
  std::size_t initial_index = 0;
  RunStatus forward_status = RunStatus::Completed;
  RunStatus backward_status = RunStatus::Completed;
  double psi0 = 0.0;
  double drift = 0.0;
  double error_estimate = 0.0;  // sum of accepted local error estimates
  bool certified = false;

  double t_begin() const { return nodes.front().t; }
  double t_end() const { return nodes.back().t; }
  FowlerState state_at(double t) const;
  bool has_terminal_event() const;
};

// Drift budget for certification: 1e-8 max(1, |psi0|).
double drift_bound(double psi0);

Trajectory integrate(const SystemParams& params, const FowlerState& initial,
                     const IntegratorSettings& settings = {});

// LocalMin / LocalMax (or DegenerateCritical) events from zero crossings of
// w_i' on the dense output.
std::vector<Event> detect_extrema(const Trajectory& traj);

}  // namespace fowler
