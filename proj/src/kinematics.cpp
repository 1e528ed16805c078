#include "okp/kinematics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace okp {

namespace {

constexpr double kLimitSlack = 1e-12;

Posed joint_motion(const JointModel& j, double q) {
  if (j.kind == JointKind::revolute) return Posed(Rotationd::from_axis_angle(j.axis, q));
  return Posed::translation(j.axis * q);
}

struct JointAxes {
  std::vector<Vector3d> axis;   // world
  std::vector<Vector3d> point;  // world point on the axis
  Posed tip;                    // gripper
};

JointAxes joint_axes(const KinematicChain& chain, const Eigen::VectorXd& q) {
  chain.check_limits(q);
  JointAxes out;
  out.axis.reserve(chain.dof());
  out.point.reserve(chain.dof());
  Posed t = chain.base();
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const JointModel& j = chain.joint(i);
    const Posed pre = t * j.origin;
    out.axis.push_back(pre.rotation() * j.axis);
    out.point.push_back(pre.translation());
    t = pre * joint_motion(j, q[static_cast<Eigen::Index>(i)]);
  }
  out.tip = t * chain.end_effector_offset();
  return out;
}

Matrix6Xd point_jacobian(const KinematicChain& chain, const JointAxes& axes, const Vector3d& p) {
  Matrix6Xd jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    if (chain.joint(i).kind == JointKind::revolute) {
      jac.col(c) << axes.axis[i], axes.axis[i].cross(p - axes.point[i]);
    } else {
      jac.col(c) << Vector3d::Zero(), axes.axis[i];
    }
  }
  return jac;
}

}  // namespace

KinematicChain::KinematicChain(std::vector<JointModel> joints, Posed base, Posed end_effector_offset, std::string name)
    : joints_(std::move(joints)), base_(base), ee_offset_(end_effector_offset), name_(std::move(name)) {
  if (joints_.empty()) throw std::invalid_argument("KinematicChain: at least one joint required");
  for (auto& j : joints_) {
    const double n = j.axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("KinematicChain: joint '" + j.name + "' has a zero axis");
    j.axis /= n;
    if (!(j.lower < j.upper)) throw std::invalid_argument("KinematicChain: joint '" + j.name + "' needs lower < upper");
    if (j.mass < 0.0) throw std::invalid_argument("KinematicChain: joint '" + j.name + "' has negative mass");
  }
}

KinematicChain KinematicChain::with_base(const Posed& world_from_base) const {
  KinematicChain c = *this;
  c.base_ = world_from_base;
  return c;
}

bool KinematicChain::within_limits(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != joints_.size()) return false;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const double v = q[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v) || v < joints_[i].lower - kLimitSlack || v > joints_[i].upper + kLimitSlack) return false;
  }
  return true;
}

void KinematicChain::check_limits(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != joints_.size()) {
    throw JointLimitError("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
                          std::to_string(joints_.size()));
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const double v = q[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v) || v < joints_[i].lower - kLimitSlack || v > joints_[i].upper + kLimitSlack) {
      std::ostringstream os;
      os << "joint '" << joints_[i].name << "' = " << v << " outside [" << joints_[i].lower << ", "
         << joints_[i].upper << "]";
      throw JointLimitError(os.str());
    }
  }
}

ForwardKinematics forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  chain.check_limits(q);
  ForwardKinematics fk;
  fk.links.reserve(chain.dof());
  Posed t = chain.base();
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const JointModel& j = chain.joint(i);
    t = t * j.origin * joint_motion(j, q[static_cast<Eigen::Index>(i)]);
    fk.links.push_back(t);
  }
  fk.gripper = t * chain.end_effector_offset();
  return fk;
}

Posed gripper_pose(const KinematicChain& chain, const Eigen::VectorXd& q) { return forward_kinematics(chain, q).gripper; }

Posed tool_pose(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset) {
  return gripper_pose(chain, q) * tool_offset;
}

Matrix6Xd tool_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q, const Posed& tool_offset) {
  const JointAxes axes = joint_axes(chain, q);
  return point_jacobian(chain, axes, (axes.tip * tool_offset).translation());
}

Matrix6Xd gripper_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  return tool_jacobian(chain, q, Posed::identity());
}

const OrientedKeypointd& AttachedObject::keypoint(const std::string& label) const {
  const auto it = std::find_if(keypoints.begin(), keypoints.end(), [&](const auto& k) { return k.label == label; });
  if (it == keypoints.end()) throw UnknownKeypoint(label);
  return *it;
}

bool AttachedObject::has(const std::string& label) const {
  return std::any_of(keypoints.begin(), keypoints.end(), [&](const auto& k) { return k.label == label; });
}

AttachedObject attach_object(const std::vector<OrientedKeypointd>& world_keypoints, const Posed& gripper_pose,
                             const Posed& grasp) {
  AttachedObject obj;
  obj.grasp = grasp;
  const Posed object_from_world = (gripper_pose * grasp).inverse();
  std::set<std::string> seen;
  for (const auto& k : world_keypoints) {
    if (k.parent != kWorldFrame) throw FrameMismatch(kWorldFrame, k.parent);
    if (!seen.insert(k.label).second) throw std::invalid_argument("attach_object: duplicate keypoint '" + k.label + "'");
    obj.keypoints.push_back(OrientedKeypointd{k.label, object_from_world * k.frame, kObjectFrame});
  }
  return obj;
}

OrientedKeypointd keypoint_world(const KinematicChain& chain, const Eigen::VectorXd& q,
                                 const AttachedObject& attachment, const std::string& label) {
  const Posed offset = attachment.gripper_to_keypoint(label);
  return OrientedKeypointd{label, gripper_pose(chain, q) * offset, kWorldFrame};
}

KeypointJacobian keypoint_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q,
                                   const AttachedObject& attachment, const std::string& label) {
  return KeypointJacobian{tool_jacobian(chain, q, attachment.gripper_to_keypoint(label)), at_keypoint(label)};
}

double potential_energy(const KinematicChain& chain, const Eigen::VectorXd& q, const Vector3d& gravity) {
  const ForwardKinematics fk = forward_kinematics(chain, q);
  double v = 0.0;
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    v -= chain.joint(i).mass * gravity.dot(fk.links[i] * chain.joint(i).com);
  }
  return v;
}

Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q, const Vector3d& gravity) {
  const ForwardKinematics fk = forward_kinematics(chain, q);
  const JointAxes axes = joint_axes(chain, q);
  const auto n = chain.dof();
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double m = chain.joint(i).mass;
    if (m == 0.0) continue;
    const Vector3d c = fk.links[i] * chain.joint(i).com;
    const Vector3d weight = m * gravity;
    // dV/dq_j = -m g . dc/dq_j for every joint j upstream of link i
    for (std::size_t j = 0; j <= i; ++j) {
      const Vector3d dc = chain.joint(j).kind == JointKind::revolute ? Vector3d(axes.axis[j].cross(c - axes.point[j]))
                                                                      : axes.axis[j];
      tau[static_cast<Eigen::Index>(j)] -= weight.dot(dc);
    }
  }
  return tau;
}

}  // namespace okp
