#pragma once

#include "okp/se3.hpp"

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace okp {

using Matrix6Xd = Eigen::Matrix<double, 6, Eigen::Dynamic>;

inline const FrameId kObjectFrame = "object";
inline const FrameId kGripperFrame = "gripper";

class JointLimitError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class UnknownKeypoint : public std::invalid_argument {
 public:
  explicit UnknownKeypoint(const std::string& label) : std::invalid_argument("unknown keypoint '" + label + "'") {}
};

enum class JointKind { revolute, prismatic };

struct JointModel {
  std::string name;
  JointKind kind = JointKind::revolute;
  Vector3d axis = Vector3d::UnitZ();
  Posed origin;  // parent link frame -> joint frame at q = 0
  double lower = -M_PI;
  double upper = M_PI;
  // inertial data of the link moved by this joint, in the joint frame
  double mass = 0.0;
  Vector3d com = Vector3d::Zero();
};

class KinematicChain {
 public:
  KinematicChain(std::vector<JointModel> joints, Posed base = Posed::identity(),
                 Posed end_effector_offset = Posed::identity(), std::string name = "chain");

  std::size_t dof() const { return joints_.size(); }
  const std::vector<JointModel>& joints() const { return joints_; }
  const JointModel& joint(std::size_t i) const { return joints_.at(i); }
  const Posed& base() const { return base_; }
  const Posed& end_effector_offset() const { return ee_offset_; }
  const std::string& name() const { return name_; }

  /// Same chain with its base re-placed by `world_from_base`.
  KinematicChain with_base(const Posed& world_from_base) const;

  /// Throws JointLimitError when q has the wrong size or leaves the limits.
  void check_limits(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q) const;

 private:
  std::vector<JointModel> joints_;
  Posed base_;
  Posed ee_offset_;
  std::string name_;
};

struct JointState {
  Eigen::VectorXd q;
  std::optional<Eigen::VectorXd> qdot;
};

struct ForwardKinematics {
  std::vector<Posed> links;  // world pose of each joint frame after its motion
  Posed gripper;
};

ForwardKinematics forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

Posed gripper_pose(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Frame rigidly attached to the gripper at `tool_offset` (gripper -> tool).
Posed tool_pose(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset);

/// 6 x n Jacobian (angular rows on top) of the tool frame origin, world axes.
Matrix6Xd tool_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset);

/// Geometric Jacobian of the gripper frame origin in world axes.
Matrix6Xd gripper_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

struct AttachedObject {
  Posed grasp;  // gripper frame -> object frame
  std::vector<OrientedKeypointd> keypoints;  // parent = object

  const OrientedKeypointd& keypoint(const std::string& label) const;
  bool has(const std::string& label) const;
  /// gripper -> keypoint frame.
  Posed gripper_to_keypoint(const std::string& label) const { return grasp * keypoint(label).frame; }
};

/// Express world keypoints in the object frame of a fresh grasp so that
/// world == gripper_pose * grasp * keypoint.
AttachedObject attach_object(const std::vector<OrientedKeypointd>& world_keypoints, const Posed& gripper_pose,
                             const Posed& grasp);

OrientedKeypointd keypoint_world(const KinematicChain& chain, const Eigen::VectorXd& q,
                                 const AttachedObject& attachment, const std::string& label);

struct KeypointJacobian {
  Matrix6Xd matrix;
  FrameId frame;  // at_keypoint(label): keypoint origin, world axes
};

KeypointJacobian keypoint_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q,
                                   const AttachedObject& attachment, const std::string& label);

/// Joint torques that hold the chain static against `gravity` (m/s^2),
/// i.e. the gradient of the potential energy with respect to q.
Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q, const Vector3d& gravity);

double potential_energy(const KinematicChain& chain, const Eigen::VectorXd& q, const Vector3d& gravity);

}  // namespace okp
