#pragma once

#include "okp/se3.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace okp {

struct AgentInput {
  std::vector<OrientedKeypointd> keypoints;  // world frame
  Wrenchd keypoint_wrench;                   // at the agent's keypoint origin, world axes
  double time = 0.0;

  /// Throws UnknownKeypoint.
  const OrientedKeypointd& keypoint(const std::string& label) const;
  bool has(const std::string& label) const;
};

enum class CommandMode { twist, wrench };

struct AgentAction {
  std::string target_label;
  std::variant<Twistd, Wrenchd> command;

  CommandMode mode() const { return std::holds_alternative<Twistd>(command) ? CommandMode::twist : CommandMode::wrench; }
  const Twistd& twist() const { return std::get<Twistd>(command); }
  const Wrenchd& wrench() const { return std::get<Wrenchd>(command); }
  Vector6d vector() const;
  /// Throws std::invalid_argument on non-finite entries.
  void validate() const;

  static AgentAction hold(const std::string& label) { return {label, Twistd::zero(at_keypoint(label))}; }
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> required_labels() const = 0;
  /// The keypoint whose wrench the agent reads and whose motion it commands.
  virtual std::string control_label() const = 0;
  virtual void reset() = 0;
  virtual AgentAction step(const AgentInput& input) = 0;
  virtual bool done() const = 0;
  /// True when the agent stopped without reaching its goal.
  virtual bool gave_up() const { return false; }
};

// ---- insertion ------------------------------------------------------------

struct InsertionAgentConfig {
  double approach_speed = 0.01;    // m/s
  double alignment_gain = 2.0;     // 1/s, orientation servo onto hole_top
  double lateral_gain = 5.0;       // 1/s, x-y servo onto hole_top and the search path
  Vector6d compliance = (Vector6d() << 0, 0, 0, 2e-3, 2e-3, 2e-3).finished();  // twist per wrench
  double push_force = 5.0;         // N, contact force held during search and insertion
  double perturbation_amplitude = 1e-3;  // m, spiral pitch
  double perturbation_period = 0.5;      // s, one turn at radius = amplitude
  double max_search_radius = 0.01;       // m
  double switching_period = 1.0;         // s
  double closed_loop_fraction = 0.5;     // duty cycle of the closed-loop half
  double feedforward_speed = 2e-3;       // m/s extra downward push in feedforward halves
  double depth_target = 0.012;           // m below the contact height
  double contact_threshold = 1.0;        // N
  double drop_threshold = 5e-4;          // m below the contact height that starts insertion
  double stall_time = 1.5;               // s without stall_progress returns to the search
  double stall_progress = 5e-4;          // m
  double free_depth_margin = 0.01;       // contact-free descent past hole_top treated as inserted

  void validate() const;
};

enum class InsertionPhase { approach, contact, insert, done, gave_up };

std::string to_string(InsertionPhase p);

struct InsertionState {
  InsertionPhase phase = InsertionPhase::approach;
  double last_time = 0.0;
  bool started = false;
  double contact_time = 0.0;
  double contact_height = 0.0;  // peg_end z in the hole frame at first contact
  double spiral_angle = 0.0;
  double stall_depth = 0.0;
  double stall_since = 0.0;
};

/// One control step. Needs peg_end and hole_top; the wrench is at peg_end.
std::pair<AgentAction, InsertionState> insertion_agent_step(const AgentInput& input, const InsertionAgentConfig& cfg,
                                                            InsertionState state);

/// Offset of the search path from the hole axis after turning through `angle`.
Eigen::Vector2d spiral_offset(double angle, double pitch);

class InsertionAgent : public Agent {
 public:
  explicit InsertionAgent(InsertionAgentConfig cfg);
  std::string name() const override { return "insertion"; }
  std::vector<std::string> required_labels() const override { return {"peg_end", "hole_top"}; }
  std::string control_label() const override { return "peg_end"; }
  void reset() override { state_ = {}; }
  AgentAction step(const AgentInput& input) override;
  bool done() const override { return state_.phase == InsertionPhase::done || gave_up(); }
  bool gave_up() const override { return state_.phase == InsertionPhase::gave_up; }
  const InsertionState& state() const { return state_; }
  const InsertionAgentConfig& config() const { return cfg_; }

 private:
  InsertionAgentConfig cfg_;
  InsertionState state_;
};

// ---- wiping ---------------------------------------------------------------

/// Piecewise-linear path traversed at constant speed from `start_time`.
struct WipePath {
  std::vector<Eigen::Vector2d> waypoints;
  double speed = 0.05;
  double start_time = 1.5;

  void validate() const;
  std::vector<double> waypoint_times() const;
  double end_time() const;
  Eigen::Vector2d position(double t) const;
  Eigen::Vector2d velocity(double t) const;
};

struct WipingAgentConfig {
  double nominal_normal_force = 10.0;  // N
  double force_gain = 2e-3;            // m/s per N
  WipePath path;                       // of p_front, x-y
  double position_gain = 10.0;         // 1/s
  double orientation_gain = 5.0;       // 1/s
  double hold_time = 0.25;             // s after the path ends

  void validate() const;
};

/// Twist at center: z follows the force error, x-y servo front onto the path,
/// angular keeps center's z axis pointing down.
AgentAction wiping_agent_step(const AgentInput& input, const WipingAgentConfig& cfg);

class WipingAgent : public Agent {
 public:
  explicit WipingAgent(WipingAgentConfig cfg);
  std::string name() const override { return "wiping"; }
  std::vector<std::string> required_labels() const override { return {"front", "center"}; }
  std::string control_label() const override { return "center"; }
  void reset() override { time_ = 0.0; }
  AgentAction step(const AgentInput& input) override;
  bool done() const override { return time_ >= cfg_.path.end_time() + cfg_.hold_time; }
  const WipingAgentConfig& config() const { return cfg_; }

 private:
  WipingAgentConfig cfg_;
  double time_ = 0.0;
};

// ---- open-loop baselines --------------------------------------------------

/// Always the same downward twist along the hole axis latched at construction.
class OpenLoopInsert : public Agent {
 public:
  OpenLoopInsert(Vector3d down, double speed, double duration);
  std::string name() const override { return "open_loop_insert"; }
  std::vector<std::string> required_labels() const override { return {"peg_end"}; }
  std::string control_label() const override { return "peg_end"; }
  void reset() override { time_ = 0.0; }
  AgentAction step(const AgentInput& input) override;
  bool done() const override { return time_ >= duration_; }

 private:
  Vector3d velocity_;
  double duration_;
  double time_ = 0.0;
};

AgentAction open_loop_insert(const Vector3d& down, double speed);

/// Replays a planned front trajectory: descend to `press_height` by the
/// path start, then follow the path. Feedback is ignored.
struct OpenLoopWipePlan {
  Vector3d start;         // front position at t = 0, world
  double press_height;    // planned z of the front during the wipe, world
  WipePath path;          // x-y in world
  double hold_time = 0.25;
};

AgentAction open_loop_wipe(const OpenLoopWipePlan& plan, double time);

class OpenLoopWipe : public Agent {
 public:
  explicit OpenLoopWipe(OpenLoopWipePlan plan);
  std::string name() const override { return "open_loop_wipe"; }
  std::vector<std::string> required_labels() const override { return {"center"}; }
  std::string control_label() const override { return "center"; }
  void reset() override { time_ = 0.0; }
  AgentAction step(const AgentInput& input) override;
  bool done() const override { return time_ >= plan_.path.end_time() + plan_.hold_time; }

 private:
  OpenLoopWipePlan plan_;
  double time_ = 0.0;
};

// ---- retargeting ----------------------------------------------------------

/// Runs `inner` in the frame where the anchor keypoint's first observed pose
/// is the identity, and maps its commands back to world axes.
class RetargetAgent : public Agent {
 public:
  RetargetAgent(std::unique_ptr<Agent> inner, std::string anchor_label);
  std::string name() const override { return "retarget(" + inner_->name() + ")"; }
  std::vector<std::string> required_labels() const override;
  std::string control_label() const override { return inner_->control_label(); }
  void reset() override;
  AgentAction step(const AgentInput& input) override;
  bool done() const override { return inner_->done(); }
  bool gave_up() const override { return inner_->gave_up(); }
  const Agent& inner() const { return *inner_; }
  const std::optional<Posed>& anchor() const { return anchor_; }

 private:
  std::unique_ptr<Agent> inner_;
  std::string anchor_label_;
  std::optional<Posed> anchor_;
};

std::unique_ptr<Agent> retarget(std::unique_ptr<Agent> agent, const std::string& nominal_anchor_label);

}  // namespace okp
