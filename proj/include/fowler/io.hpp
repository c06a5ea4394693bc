#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "fowler/classify.hpp"
#include "fowler/dynamics.hpp"
#include "fowler/experiments.hpp"
#include "fowler/invariants.hpp"
#include "fowler/params.hpp"

namespace fowler::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Doubles go out as shortest round-trip decimals; non-finite values as the
// strings "inf", "-inf", "nan".
json number(double x);
double number_from(const json& j);

json to_json(const SystemParams& sp);
SystemParams params_from_json(const json& j);

json to_json(const IntegratorSettings& s);
IntegratorSettings settings_from_json(const json& j, IntegratorSettings base = {});

json to_json(const FowlerState& s);
FowlerState state_from_json(const json& j);

json to_json(const InitialData& d);
InitialData initial_data_from_json(const SystemParams& sp, const json& j);

json to_json(const Event& e);
json to_json(const CouplingSolution& kl);
json to_json(const InvariantReport& r);
json to_json(const DecayFit& f);
json to_json(const Classification& c);
json to_json(const EstimateReport& e);
json to_json(const RunRecord& r);
json to_json(const ExperimentReport& r);

struct TrajectoryReports {
  std::optional<InvariantReport> invariants;
  std::optional<Classification> classification;
  std::optional<EstimateReport> estimate;
};

json to_json(const Trajectory& traj, const TrajectoryReports& reports = {});
// Throws SchemaMismatch on a wrong version or a malformed document.
Trajectory trajectory_from_json(const json& j);

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                     const TrajectoryReports& reports = {});
Trajectory load_trajectory(const std::filesystem::path& path);

json read_json(const std::filesystem::path& path);
void write_json(const json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

// Node table with header t,w1,w2,dw1,dw2,psi.
void write_csv(const Trajectory& traj, std::ostream& os);
void save_csv(const Trajectory& traj, const std::filesystem::path& path);

// Plot table with header t,w1,w2,psi,f1,f2,r,u,v over nodes plus
// `per_step` interior samples of each step.
void write_plot_data(const Trajectory& traj, std::ostream& os, int per_step = 4);

}  // namespace fowler::io
