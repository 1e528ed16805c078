#include "okp/joint_control.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>

#include <stdexcept>

namespace okp {

void VelocityResolutionConfig::validate() const {
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) {
    throw std::invalid_argument("VelocityResolutionConfig: regularization must be finite and >= 0");
  }
  if (!(joint_velocity_limit > 0.0)) throw std::invalid_argument("VelocityResolutionConfig: velocity limit must be > 0");
  if (!task_weights.allFinite() || (task_weights.array() < 0.0).any()) {
    throw std::invalid_argument("VelocityResolutionConfig: task weights must be finite and >= 0");
  }
}

Eigen::VectorXd resolve_velocity(const Matrix6Xd& jacobian, const Vector6d& twist, const VelocityResolutionConfig& cfg) {
  cfg.validate();
  if (!jacobian.allFinite() || !twist.allFinite()) throw std::invalid_argument("resolve_velocity: non-finite input");
  const Eigen::Index n = jacobian.cols();
  const Vector6d sqrt_w = cfg.task_weights.cwiseSqrt();

  Eigen::VectorXd qdot;
  if (cfg.regularization == 0.0) {
    const Matrix6Xd wj = sqrt_w.asDiagonal() * jacobian;
    qdot = wj.completeOrthogonalDecomposition().solve(sqrt_w.cwiseProduct(twist));
  } else {
    // stacked form of the damped normal equations, better conditioned than J^T W J + lambda I
    Eigen::MatrixXd a(6 + n, n);
    a.topRows<6>() = sqrt_w.asDiagonal() * jacobian;
    a.bottomRows(n) = std::sqrt(cfg.regularization) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(6 + n);
    b.head<6>() = sqrt_w.cwiseProduct(twist);
    qdot = a.householderQr().solve(b);
  }

  const double peak = qdot.size() > 0 ? qdot.cwiseAbs().maxCoeff() : 0.0;
  if (peak > cfg.joint_velocity_limit) qdot *= cfg.joint_velocity_limit / peak;
  return qdot;
}

Eigen::VectorXd resolve_velocity(const KeypointJacobian& jacobian, const Twistd& twist,
                                 const VelocityResolutionConfig& cfg) {
  if (twist.expressed_in != jacobian.frame) throw FrameMismatch(jacobian.frame, twist.expressed_in);
  return resolve_velocity(jacobian.matrix, twist.vector(), cfg);
}

Eigen::VectorXd resolve_force(const Matrix6Xd& jacobian, const Vector6d& wrench, const Eigen::VectorXd& gravity) {
  if (gravity.size() != jacobian.cols()) {
    throw std::invalid_argument("resolve_force: gravity torque has " + std::to_string(gravity.size()) +
                                " entries, Jacobian has " + std::to_string(jacobian.cols()) + " columns");
  }
  return jacobian.transpose() * wrench + gravity;
}

Eigen::VectorXd resolve_force(const KeypointJacobian& jacobian, const Wrenchd& wrench, const Eigen::VectorXd& gravity) {
  if (wrench.expressed_at != jacobian.frame) throw FrameMismatch(jacobian.frame, wrench.expressed_at);
  return resolve_force(jacobian.matrix, wrench.vector(), gravity);
}

Wrenchd estimate_keypoint_wrench(const Matrix6Xd& jacobian, const Eigen::VectorXd& tau_external, FrameId frame) {
  if (tau_external.size() != jacobian.cols()) throw std::invalid_argument("estimate_keypoint_wrench: dimension mismatch");
  if (!jacobian.allFinite() || !tau_external.allFinite()) {
    throw std::invalid_argument("estimate_keypoint_wrench: non-finite input");
  }
  const Eigen::MatrixXd jt = jacobian.transpose();
  const Vector6d f = jt.completeOrthogonalDecomposition().solve(tau_external);
  return Wrenchd::from_vector(f, std::move(frame));
}

Wrenchd estimate_keypoint_wrench(const KeypointJacobian& jacobian, const Eigen::VectorXd& tau_external) {
  return estimate_keypoint_wrench(jacobian.matrix, tau_external, jacobian.frame);
}

Wrenchd virtual_sensor(const Wrenchd& wrist_measurement, const Posed& wrist_to_keypoint, FrameId keypoint_frame) {
  return transform_wrench(wrist_to_keypoint, wrist_measurement, std::move(keypoint_frame));
}

PoseTrackingResult track_pose(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset,
                              const Posed& target, const VelocityResolutionConfig& cfg, double tolerance,
                              int max_iterations) {
  VelocityResolutionConfig step_cfg = cfg;
  step_cfg.joint_velocity_limit = std::numeric_limits<double>::infinity();

  PoseTrackingResult r;
  r.q = q;
  for (;;) {
    const Posed current = tool_pose(chain, r.q, tool_offset);
    Vector6d err;
    err << rotation_error(current.rotation(), target.rotation()), target.translation() - current.translation();
    r.rotation_error = err.head<3>().norm();
    r.position_error = err.tail<3>().norm();
    if (r.rotation_error <= tolerance && r.position_error <= tolerance) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= max_iterations) return r;
    const Eigen::VectorXd next = r.q + resolve_velocity(tool_jacobian(chain, r.q, tool_offset), err, step_cfg);
    if (!chain.within_limits(next)) return r;
    r.q = next;
    ++r.iterations;
  }
}

}  // namespace okp
