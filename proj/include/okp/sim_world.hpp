#pragma once

#include "okp/kinematics.hpp"
#include "okp/se3.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace okp {

using Rng = std::mt19937_64;

// ---- scenes ---------------------------------------------------------------

enum class PegShape { square, circle };

/// Peg geometry in the peg_end frame: origin at the tip center, z up the body.
struct PegGeometry {
  PegShape shape = PegShape::square;
  double half_extent = 0.005;  // half side or radius, m
  double length = 0.05;
  double sample_spacing = 0.002;
  std::vector<double> ring_heights = {0.0, 0.001, 0.003, 0.006, 0.01};

  void validate() const;
  /// Boundary sample points: one perimeter ring per height.
  std::vector<Vector3d> samples() const;
};

/// Hole frame (hole_top): origin at the center of the top opening, z out of
/// the hole. The bore runs through the block.
struct PegHoleScene {
  PegGeometry peg;
  Posed hole;
  double clearance = 2e-4;
  double chamfer_depth = 1.5e-3;
  double chamfer_angle = M_PI / 4;  // from the bore axis
  double stiffness = 1e4;            // N/m per boundary sample
  double friction = 0.3;
  double edge_radius = 2.5e-4;       // rounding of the hole edges
  double slip_velocity = 1e-4;       // Coulomb regularization, m/s
  double depth_target = 0.01;        // success depth for judge_insert

  void validate() const;
  double hole_half_extent() const { return peg.half_extent + clearance; }
  double chamfer_width() const { return chamfer_depth * std::tan(chamfer_angle); }
  OrientedKeypointd hole_top() const { return {"hole_top", hole, kWorldFrame}; }
};

/// Board frame: origin on the reference surface, z along the outward normal.
struct WipeScene {
  Posed board;
  double height_offset = 0.0;  // surface height along the board normal
  Eigen::Vector2d board_half_extents{0.3, 0.2};
  Eigen::Vector2d eraser_half_extents{0.03, 0.015};  // along the center keypoint x, y
  int samples_x = 5;
  int samples_y = 3;
  double stiffness = 1e4;  // whole contact patch, N/m
  double friction = 0.3;
  double slip_velocity = 1e-4;

  /// Surface moves along its normal by `shift` from `shift_time` on.
  double shift = 0.0;
  double shift_time = 0.0;

  void validate() const;
  double surface_height(double time) const { return height_offset + (time >= shift_time ? shift : 0.0); }
  OrientedKeypointd board_keypoint() const { return {"board", board, kWorldFrame}; }
};

// ---- contact --------------------------------------------------------------

struct PegContact {
  Wrenchd wrench;  // exerted on the peg, at the peg_end origin in world axes
  double depth = 0.0;
  double normal_force = 0.0;  // sum of sample normal magnitudes
  double max_penetration = 0.0;
  int active_samples = 0;
};

/// Penalty contact between the peg boundary samples and the hole block.
/// `peg_twist` (angular, linear at peg_end, world axes) feeds friction.
PegContact contact_wrench_peg(const PegHoleScene& scene, const OrientedKeypointd& peg_end,
                              const std::optional<Twistd>& peg_twist = std::nullopt);

/// Penetration and outward normal of one point, in hole-frame coordinates.
struct PointContact {
  double penetration = 0.0;
  Vector3d normal = Vector3d::Zero();
};
PointContact hole_point_contact(const PegHoleScene& scene, const Vector3d& point_in_hole);

struct WipeContact {
  Wrenchd wrench;  // on the eraser, at the center origin in world axes
  double normal_force = 0.0;
  int active_samples = 0;
};

WipeContact contact_wrench_wipe(const WipeScene& scene, const OrientedKeypointd& center, double time = 0.0,
                                const std::optional<Twistd>& center_twist = std::nullopt);

// ---- perception -----------------------------------------------------------

struct PerceptionModel {
  double position_sigma = 5e-3;  // per axis, world axes
  double orientation_sigma = 0.0;  // per rotation-vector component
  std::map<std::string, Vector3d> bias;  // per label, in the keypoint's own axes

  void validate() const;
};

/// Noisy copy of the keypoints. One draw per keypoint in input order.
std::vector<OrientedKeypointd> perceive(const std::vector<OrientedKeypointd>& truth, const PerceptionModel& model,
                                        Rng& rng);

// ---- category sampling ----------------------------------------------------

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const;
  void validate(const std::string& name, bool positive) const;
};

struct CategorySampler {
  Range peg_half_extent{0.005, 0.005};
  Range peg_length{0.05, 0.05};
  Range handle_offset{0.0, 0.0};  // grasp point below the peg top, m
  Range grasp_yaw{0.0, 0.0};      // about the object axis, rad
  Range grasp_tilt{0.0, 0.0};     // about the gripper x axis, rad
  Range eraser_half_length{0.03, 0.03};
  Range eraser_half_width{0.015, 0.015};

  void validate() const;
};

struct PegInstance {
  double half_extent;
  double length;
  double handle_offset;
  double grasp_yaw;
  double grasp_tilt;
};

struct EraserInstance {
  double half_length;
  double half_width;
  double grasp_yaw;
  double grasp_tilt;
};

PegInstance sample_peg(const CategorySampler& sampler, Rng& rng);
EraserInstance sample_eraser(const CategorySampler& sampler, Rng& rng);

// ---- world ----------------------------------------------------------------

struct JointVelocityCommand {
  Eigen::VectorXd qdot;
};

struct JointTorqueCommand {
  Eigen::VectorXd tau;
};

using JointCommand = std::variant<JointVelocityCommand, JointTorqueCommand>;

using TaskScene = std::variant<PegHoleScene, WipeScene>;

struct WorldConfig {
  double dt = 1e-3;
  double joint_admittance = 0.05;  // rad/s per N m, torque mode
  double force_limit = 30.0;       // N, contact force that aborts the episode
  Vector3d gravity{0, 0, -9.81};
};

enum class WorldFlag { none, joint_limit, force_limit, non_finite };

std::string to_string(WorldFlag f);

struct ContactState {
  Wrenchd wrench;  // at the contact keypoint origin, world axes
  double normal_force = 0.0;
  double depth = 0.0;
};

/// Quasi-static world: the arm holds an object whose true keypoints are in
/// `object`; the scene supplies the environment. State is (q, t).
class World {
 public:
  World(KinematicChain chain, AttachedObject object, TaskScene scene, std::string contact_label, WorldConfig cfg,
        Eigen::VectorXd q);

  const KinematicChain& chain() const { return chain_; }
  const AttachedObject& object() const { return object_; }
  const TaskScene& scene() const { return scene_; }
  const WorldConfig& config() const { return cfg_; }
  const Eigen::VectorXd& q() const { return q_; }
  double time() const { return time_; }
  const ContactState& contact() const { return contact_; }
  WorldFlag flag() const { return flag_; }

  OrientedKeypointd keypoint(const std::string& label) const { return keypoint_world(chain_, q_, object_, label); }

  /// Wrist force/torque reading: the contact wrench at the gripper origin in gripper axes.
  Wrenchd wrist_measurement() const;

  /// Joint torques the contact applies to the arm, gravity excluded.
  Eigen::VectorXd external_torque() const;

  /// Velocity mode: q' = q + qdot dt. Torque mode: qdot = k_a (tau - tau_contact - g).
  /// Returns the flag raised by this step (the state is advanced regardless).
  WorldFlag step(const JointCommand& command);

  /// Recompute the contact at the current state with the given keypoint twist.
  void update_contact(const std::optional<Twistd>& twist);

 private:
  KinematicChain chain_;
  AttachedObject object_;
  TaskScene scene_;
  std::string contact_label_;
  WorldConfig cfg_;
  Eigen::VectorXd q_;
  double time_ = 0.0;
  ContactState contact_;
  WorldFlag flag_ = WorldFlag::none;
};

// ---- judges ---------------------------------------------------------------

struct WipeSample {
  double time;
  Eigen::Vector2d front;  // board-frame xy of the true front keypoint
  double normal_force;
};

struct WipeTrace {
  std::vector<WipeSample> samples;
  std::vector<Eigen::Vector2d> waypoints;  // board frame
  std::vector<double> waypoint_times;
  double wipe_start = 0.0;
  double wipe_end = 0.0;
};

struct WipeJudgeConfig {
  double max_edge_error = 0.02;
  double min_force = 5.0;
  double max_low_force_duration = 0.05;  // s; longer runs below min_force fail
};

struct WipeVerdict {
  bool pass = false;
  double max_edge_error = 0.0;
  double longest_low_force = 0.0;
};

WipeVerdict judge_wipe(const WipeTrace& trace, const WipeJudgeConfig& cfg = {});

struct InsertVerdict {
  bool pass = false;
  double final_depth = 0.0;
};

struct InsertSample {
  double time;
  double depth;
};

struct InsertTrace {
  std::vector<InsertSample> samples;
  double depth_target = 0.01;
};

InsertVerdict judge_insert(const InsertTrace& trace);

}  // namespace okp
