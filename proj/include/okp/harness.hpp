#pragma once

#include "okp/agents.hpp"
#include "okp/io.hpp"
#include "okp/joint_control.hpp"
#include "okp/kinematics.hpp"
#include "okp/pick_place.hpp"
#include "okp/sim_world.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace okp {

// ---- scenario -------------------------------------------------------------

enum class TaskKind { insert, wipe };

std::string to_string(TaskKind t);

struct AgentSpec {
  std::string type;  // insertion | wiping | open_loop_insert | open_loop_wipe
  bool retarget = true;
  InsertionAgentConfig insertion;
  WipingAgentConfig wiping;  // path filled in from the task
  double speed = 0.01;        // open_loop_insert descent, m/s
  double depth = 0.012;       // open_loop_insert travel past the perceived hole top
  double press_depth = 1e-3;  // open_loop_wipe, below the perceived surface
  double hold_time = 0.25;    // open_loop_wipe

  std::string name() const;
  bool closed_loop() const { return type == "insertion" || type == "wiping"; }
};

struct InsertTask {
  PegHoleScene scene;
  Posed start = Posed(Rotationd::from_rpy(0.05, -0.04, 0.3), Vector3d(0.03, -0.02, 0.08));  // peg_end in hole_top
};

struct WipeTask {
  WipeScene scene;
  WipePath path;  // of the front keypoint, board frame
  Posed start = Posed(Rotationd::from_rpy(M_PI, 0.0, 0.2), Vector3d(0.05, 0.04, 0.06));  // center in board
  double eraser_height = 0.03;
  WipeJudgeConfig judge;
};

struct Acceptance {
  std::optional<double> max_failure_rate;           // agent must not fail more often
  std::optional<double> baseline_min_failure_rate;  // baseline must fail at least this often
};

struct Scenario {
  explicit Scenario(KinematicChain c) : chain(std::move(c)) {}

  std::string name;
  std::filesystem::path chain_file;
  KinematicChain chain;
  Eigen::VectorXd home;
  TaskKind task = TaskKind::insert;
  InsertTask insert;
  WipeTask wipe;
  CategorySampler sampler;
  PerceptionModel perception;
  AgentSpec agent;
  std::optional<AgentSpec> baseline;
  int trials = 1;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  double max_time = 60.0;  // s of agent time
  double hover = 0.02;     // staging stand-off above the task keypoint
  double tcp = 0.1;        // gripper origin to the grasp point
  WorldConfig world;
  VelocityResolutionConfig control;
  StagingOptions staging;
  Acceptance acceptance;
  std::string output_dir = "out";
  bool log_traces = false;
  Json raw;  // as loaded, for sweeps
  std::filesystem::path base_dir;

  void validate() const;
};

/// Relative paths inside the document resolve against `base_dir`.
Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

// ---- episodes -------------------------------------------------------------

inline const std::string kGraspStage = "grasp_stage";
inline const std::string kPerceptionExceedsCorrection = "perception_exceeds_correction";
inline const std::string kTimeout = "timeout";
inline const std::string kSimulationError = "simulation_error";

struct TrialRecord {
  int trial = 0;
  std::string agent;
  std::uint64_t seed = 0;
  Json instance;
  bool pass = false;
  std::string failure_mode;  // empty on success
  std::string detail;
  double duration = 0.0;  // simulated s, staging included
  int steps = 0;
  Json metrics;
};

Json to_json(const TrialRecord& r);

struct StepRecord {
  double time;        // world time
  bool staging;
  Eigen::VectorXd q;
  Posed tracked;      // true pose of the agent's control keypoint
  Posed perceived;    // the same keypoint as the controller sees it
  Wrenchd wrench;     // agent input, zero while staging
  Vector6d action;    // commanded twist or wrench, zero while staging
  double normal_force;
  double depth;
};

Json to_json(const StepRecord& s);

struct EpisodeResult {
  TrialRecord record;
  std::vector<StepRecord> trace;
};

struct EpisodeOptions {
  bool keep_trace = false;
};

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial);

/// Sample, grasp, perceive, stage, run the agent, judge.
EpisodeResult run_episode(const Scenario& scenario, const AgentSpec& agent, int trial, std::uint64_t seed,
                          const EpisodeOptions& options = {});

// ---- batches --------------------------------------------------------------

struct Interval {
  double lo;
  double hi;
};

/// Wilson score interval for k successes out of n.
Interval wilson_interval(int k, int n, double z = 1.959963984540054);

struct AgentSummary {
  std::string agent;
  bool baseline = false;
  int trials = 0;
  int failures = 0;
  double failure_rate = 0.0;
  Interval failure_ci{0.0, 0.0};
  std::map<std::string, int> modes;
};

struct AcceptanceCheck {
  std::string name;
  bool pass;
  std::string detail;
};

struct RunSummary {
  std::string scenario;
  std::string task;
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<AgentSummary> agents;
  std::vector<AcceptanceCheck> checks;
  bool passed = true;
};

Json to_json(const RunSummary& s);
std::string render_table(const RunSummary& s);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::filesystem::path> out_dir;  // nullopt: do not write files
  int parallel = 1;
};

struct RunResult {
  RunSummary summary;
  std::vector<TrialRecord> records;  // trial-major, agent before baseline
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// --out beats OKP_OUTPUT_DIR beats the scenario's output.dir.
std::filesystem::path resolve_output_dir(const Scenario& scenario, const std::optional<std::string>& cli_out);

inline const char* kOutputDirEnv = "OKP_OUTPUT_DIR";

struct SweepPoint {
  Json value;
  RunSummary summary;
};

/// Runs the scenario once per value of the dotted parameter `param`.
std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& param, const std::vector<Json>& values,
                                  const RunOptions& options = {});

/// "0, 0.001, true, name" -> JSON scalars.
std::vector<Json> parse_value_list(const std::string& text);

}  // namespace okp
