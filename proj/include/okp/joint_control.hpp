#pragma once

#include "okp/kinematics.hpp"
#include "okp/se3.hpp"

#include <Eigen/Core>

#include <limits>

namespace okp {

struct VelocityResolutionConfig {
  double regularization = 1e-6;  // Tikhonov weight on |qdot|^2
  double joint_velocity_limit = std::numeric_limits<double>::infinity();
  Vector6d task_weights = Vector6d::Ones();  // (angular, linear)

  void validate() const;
};

/// Damped least squares: argmin |J qdot - v|^2_W + lambda |qdot|^2, then
/// uniformly scaled down if any joint would exceed the velocity limit.
Eigen::VectorXd resolve_velocity(const Matrix6Xd& jacobian, const Vector6d& twist, const VelocityResolutionConfig& cfg);

/// Frame-checked form: the twist must be expressed where the Jacobian is.
Eigen::VectorXd resolve_velocity(const KeypointJacobian& jacobian, const Twistd& twist,
                                 const VelocityResolutionConfig& cfg);

/// tau = J^T F + g.
Eigen::VectorXd resolve_force(const Matrix6Xd& jacobian, const Vector6d& wrench, const Eigen::VectorXd& gravity);

Eigen::VectorXd resolve_force(const KeypointJacobian& jacobian, const Wrenchd& wrench, const Eigen::VectorXd& gravity);

/// Minimum-norm least-squares f for J^T f = tau_external.
Wrenchd estimate_keypoint_wrench(const Matrix6Xd& jacobian, const Eigen::VectorXd& tau_external, FrameId frame);

Wrenchd estimate_keypoint_wrench(const KeypointJacobian& jacobian, const Eigen::VectorXd& tau_external);

/// Re-express a wrist force/torque reading at a keypoint. `wrist_to_keypoint`
/// is the wrist frame's pose seen from the keypoint frame.
Wrenchd virtual_sensor(const Wrenchd& wrist_measurement, const Posed& wrist_to_keypoint, FrameId keypoint_frame);

struct PoseTrackingResult {
  Eigen::VectorXd q;
  double position_error = 0.0;
  double rotation_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton iterations built on resolve_velocity that place the tool frame at
/// `target`. Used to realize a commanded keypoint displacement exactly over
/// one control step. Stops unconverged rather than leave the joint limits.
PoseTrackingResult track_pose(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset,
                              const Posed& target, const VelocityResolutionConfig& cfg, double tolerance = 1e-12,
                              int max_iterations = 30);

}  // namespace okp
