#include "okp/pick_place.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace okp {

namespace {

const OrientedKeypointd& find(const std::vector<OrientedKeypointd>& kps, const std::string& label) {
  for (const auto& k : kps) {
    if (k.label == label) return k;
  }
  throw UnknownKeypoint(label);
}

Vector3d object_axis(const std::vector<OrientedKeypointd>& kps, const AxisTarget& a) {
  if (a.to.empty()) return find(kps, a.from).axis(a.keypoint_axis);
  const Vector3d d = find(kps, a.to).position() - find(kps, a.from).position();
  if (d.norm() < 1e-9) throw DegenerateAxis("axis " + a.from + " -> " + a.to + ": keypoints coincide");
  return d.normalized();
}

Eigen::Matrix3d left_jacobian_inverse(const Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  if (theta < 1e-8) return Eigen::Matrix3d::Identity() - 0.5 * k + k * k / 12.0;
  const double c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * k + c * k * k;
}

struct Linearization {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;  // d r / d (w, v)
};

Linearization linearize(const std::vector<OrientedKeypointd>& kps, const PlacementGoal& goal, const Posed& t) {
  std::vector<Eigen::Matrix<double, 3, 1>> rs;
  std::vector<Eigen::Matrix<double, 3, 6>> js;
  const Rotationd& r = t.rotation();
  for (const auto& c : goal.constraints) {
    Eigen::Matrix<double, 3, 6> jac = Eigen::Matrix<double, 3, 6>::Zero();
    if (const auto* p = std::get_if<PointTarget>(&c)) {
      const Vector3d rp = r * find(kps, p->label).position();
      rs.push_back(rp + t.translation() - p->target);
      jac.leftCols<3>() = -skew(rp);
      jac.rightCols<3>().setIdentity();
      js.push_back(jac);
    } else if (const auto* a = std::get_if<AxisTarget>(&c)) {
      const Vector3d ra = r * object_axis(kps, *a);
      rs.push_back(ra - a->target);
      jac.leftCols<3>() = -skew(ra);
      js.push_back(jac);
    } else {
      const auto& f = std::get<FrameTarget>(c);
      const OrientedKeypointd& k = find(kps, f.label);
      const Vector3d rp = r * k.position();
      rs.push_back(rp + t.translation() - f.target.translation());
      jac.leftCols<3>() = -skew(rp);
      jac.rightCols<3>().setIdentity();
      js.push_back(jac);
      const Vector3d phi = (r * k.frame.rotation() * f.target.rotation().inverse()).log();
      rs.push_back(phi);
      jac.setZero();
      jac.leftCols<3>() = left_jacobian_inverse(phi);
      js.push_back(jac);
    }
  }
  Linearization out;
  out.r.resize(3 * static_cast<Eigen::Index>(rs.size()));
  out.j.resize(out.r.size(), 6);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    out.r.segment<3>(3 * static_cast<Eigen::Index>(i)) = rs[i];
    out.j.middleRows<3>(3 * static_cast<Eigen::Index>(i)) = js[i];
  }
  return out;
}

Posed retract(const Posed& t, const Vector6d& delta) {
  return Posed(Rotationd::from_rotation_vector(delta.head<3>()) * t.rotation(), t.translation() + delta.tail<3>());
}

bool satisfied(const std::vector<ConstraintResidual>& rs) {
  for (const auto& r : rs) {
    if (!(r.value <= r.tolerance)) return false;
  }
  return true;
}

}  // namespace

void PlacementGoal::validate() const {
  if (constraints.empty()) throw std::invalid_argument("placement goal has no constraints");
  for (const auto& c : constraints) {
    if (const auto* p = std::get_if<PointTarget>(&c)) {
      if (!(p->tolerance > 0.0) || !p->target.allFinite()) throw std::invalid_argument("point target " + p->label + " is invalid");
    } else if (const auto* a = std::get_if<AxisTarget>(&c)) {
      if (!(a->tolerance > 0.0)) throw std::invalid_argument("axis target tolerance must be > 0");
      if (std::abs(a->target.norm() - 1.0) > 1e-9) throw std::invalid_argument("axis target must be a unit vector");
      if (a->to.empty() && (a->keypoint_axis < 0 || a->keypoint_axis > 2)) {
        throw std::invalid_argument("keypoint axis index must be 0, 1 or 2");
      }
    } else {
      const auto& f = std::get<FrameTarget>(c);
      if (!(f.position_tolerance > 0.0) || !(f.rotation_tolerance > 0.0)) {
        throw std::invalid_argument("frame target tolerances must be > 0");
      }
    }
  }
}

std::vector<ConstraintResidual> kpam_residuals(const std::vector<OrientedKeypointd>& kps, const PlacementGoal& goal,
                                               const Posed& t) {
  std::vector<ConstraintResidual> out;
  for (const auto& c : goal.constraints) {
    if (const auto* p = std::get_if<PointTarget>(&c)) {
      out.push_back({"point:" + p->label, (t * find(kps, p->label).position() - p->target).norm(), p->tolerance});
    } else if (const auto* a = std::get_if<AxisTarget>(&c)) {
      const Vector3d ra = t.rotation() * object_axis(kps, *a);
      const double angle = std::atan2(ra.cross(a->target).norm(), ra.dot(a->target));
      out.push_back({"axis:" + a->from + (a->to.empty() ? "" : "->" + a->to), angle, a->tolerance});
    } else {
      const auto& f = std::get<FrameTarget>(c);
      const Posed placed = t * find(kps, f.label).frame;
      out.push_back({"frame_position:" + f.label, (placed.translation() - f.target.translation()).norm(),
                     f.position_tolerance});
      out.push_back({"frame_rotation:" + f.label, (placed.rotation() * f.target.rotation().inverse()).angle(),
                     f.rotation_tolerance});
    }
  }
  return out;
}

PlacementSolution solve_kpam(const std::vector<OrientedKeypointd>& kps, const PlacementGoal& goal, const Posed& seed,
                             const KpamOptions& options) {
  goal.validate();
  PlacementSolution sol;
  sol.action = seed;
  Linearization lin = linearize(kps, goal, sol.action);
  double cost = 0.5 * lin.r.squaredNorm();
  double mu = options.initial_damping;

  while (sol.iterations < options.max_iterations && cost > 0.0) {
    ++sol.iterations;
    const Eigen::Matrix<double, 6, 6> h = lin.j.transpose() * lin.j;
    const Vector6d g = lin.j.transpose() * lin.r;
    const Vector6d delta = (h + mu * Eigen::Matrix<double, 6, 6>::Identity()).ldlt().solve(-g);
    const Posed candidate = retract(sol.action, delta);
    Linearization next = linearize(kps, goal, candidate);
    const double next_cost = 0.5 * next.r.squaredNorm();
    if (next_cost < cost) {
      sol.action = candidate;
      lin = std::move(next);
      cost = next_cost;
      mu = std::max(mu / 4.0, 1e-15);
      if (delta.norm() < options.step_tolerance) break;
    } else {
      mu *= 8.0;
      if (mu > 1e12 || delta.norm() < options.step_tolerance) break;
    }
  }
  sol.cost = cost;
  sol.residuals = kpam_residuals(kps, goal, sol.action);
  sol.converged = satisfied(sol.residuals);
  return sol;
}

Posed solve_oriented(const OrientedKeypointd& current, const OrientedKeypointd& target) {
  return pose_between(current, target);
}

StagingPlan stage_pick_place(const KinematicChain& chain, const Eigen::VectorXd& q0, const AttachedObject& object,
                             const PlacementGoal& goal, const StagingOptions& options) {
  goal.validate();
  if (!(options.dt > 0.0) || !(options.linear_speed > 0.0) || !(options.angular_speed > 0.0)) {
    throw std::invalid_argument("staging needs dt and speeds > 0");
  }
  std::vector<OrientedKeypointd> world;
  world.reserve(object.keypoints.size());
  for (const auto& k : object.keypoints) world.push_back(keypoint_world(chain, q0, object, k.label));

  StagingPlan plan;
  const auto* frame_goal = goal.constraints.size() == 1 ? std::get_if<FrameTarget>(&goal.constraints[0]) : nullptr;
  if (frame_goal) {
    const OrientedKeypointd& current = find(world, frame_goal->label);
    plan.action = solve_oriented(current, {frame_goal->label, frame_goal->target, current.parent});
    plan.label = frame_goal->label;
    plan.solution.action = plan.action;
    plan.solution.residuals = kpam_residuals(world, goal, plan.action);
    plan.solution.converged = satisfied(plan.solution.residuals);
  } else {
    plan.solution = solve_kpam(world, goal, Posed::identity());
    if (!plan.solution.converged) throw StagingError("pick-and-place goal not reached by the solver");
    plan.action = plan.solution.action;
    const auto& first = goal.constraints.front();
    if (const auto* p = std::get_if<PointTarget>(&first)) {
      plan.label = p->label;
    } else if (const auto* a = std::get_if<AxisTarget>(&first)) {
      plan.label = a->from;
    } else {
      plan.label = std::get<FrameTarget>(first).label;
    }
  }

  const Posed start = find(world, plan.label).frame;
  const Posed goal_pose = plan.action * start;
  const double distance = (goal_pose.translation() - start.translation()).norm();
  const double angle = plan.action.rotation().angle();
  const double duration = std::max(distance / options.linear_speed, angle / options.angular_speed);
  const int steps = static_cast<int>(std::ceil(duration / options.dt - 1e-9));
  if (steps <= 0) return plan;

  const Posed tool = object.gripper_to_keypoint(plan.label);
  Eigen::VectorXd q = q0;
  for (int i = 1; i <= steps; ++i) {
    const Posed target = i == steps ? goal_pose : interpolate(start, goal_pose, static_cast<double>(i) / steps);
    const PoseTrackingResult r = track_pose(chain, q, tool, target, options.velocity);
    if (!r.converged) throw StagingError("staging target unreachable at step " + std::to_string(i));
    if (!chain.within_limits(r.q)) throw StagingError("staging path leaves the joint limits at step " + std::to_string(i));
    q = r.q;
    plan.joints.push_back(q);
    plan.keypoint_path.push_back(target);
  }
  return plan;
}

}  // namespace okp
