#pragma once

#include "okp/joint_control.hpp"
#include "okp/kinematics.hpp"
#include "okp/se3.hpp"

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace okp {

/// T_action moves keypoint `label` onto `target`.
struct PointTarget {
  std::string label;
  Vector3d target;
  double tolerance = 1e-6;  // m
};

/// T_action turns an object axis onto `target`. The axis runs from keypoint
/// `from` to keypoint `to`, or is axis `keypoint_axis` of keypoint `from`
/// when `to` is empty.
struct AxisTarget {
  std::string from;
  std::string to;
  int keypoint_axis = 2;
  Vector3d target = Vector3d::UnitZ();
  double tolerance = 1e-6;  // rad
};

/// T_action places the whole keypoint frame.
struct FrameTarget {
  std::string label;
  Posed target;
  double position_tolerance = 1e-6;
  double rotation_tolerance = 1e-6;
};

using PlacementConstraint = std::variant<PointTarget, AxisTarget, FrameTarget>;

struct PlacementGoal {
  std::vector<PlacementConstraint> constraints;
  void validate() const;
};

class DegenerateAxis : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConstraintResidual {
  std::string name;
  double value;
  double tolerance;
};

struct PlacementSolution {
  Posed action;
  std::vector<ConstraintResidual> residuals;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
};

struct KpamOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-12;
  double initial_damping = 1e-4;
};

/// Per-constraint residuals of `action` applied to the keypoints.
std::vector<ConstraintResidual> kpam_residuals(const std::vector<OrientedKeypointd>& keypoints,
                                               const PlacementGoal& goal, const Posed& action);

/// Levenberg-Marquardt over SE(3): R <- exp(w) R, t <- t + v.
PlacementSolution solve_kpam(const std::vector<OrientedKeypointd>& keypoints, const PlacementGoal& goal,
                             const Posed& seed = Posed::identity(), const KpamOptions& options = {});

/// Closed form for a full-frame goal on one oriented keypoint.
Posed solve_oriented(const OrientedKeypointd& current, const OrientedKeypointd& target);

class StagingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StagingOptions {
  double dt = 1e-3;
  double linear_speed = 0.1;   // m/s
  double angular_speed = 1.0;  // rad/s
  VelocityResolutionConfig velocity;
};

struct StagingPlan {
  Posed action;
  std::string label;                     // keypoint moved along the straight task-space path
  std::vector<Eigen::VectorXd> joints;   // one entry per control step, excluding the start
  std::vector<Posed> keypoint_path;      // nominal keypoint pose per entry
  PlacementSolution solution;
};

/// Plans T_action for the attached object, then a joint trajectory that moves
/// the object along a straight task-space path to the goal.
StagingPlan stage_pick_place(const KinematicChain& chain, const Eigen::VectorXd& q0, const AttachedObject& object,
                             const PlacementGoal& goal, const StagingOptions& options = {});

}  // namespace okp
