#include "okp/sim_world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace okp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Half-plane n.q <= b in the (u, z) section plane, n unit.
struct HalfPlane {
  Eigen::Vector2d n;
  double b;
};

struct Section {
  std::array<HalfPlane, 3> planes;
  int count = 0;
};

Section hole_section(const PegHoleScene& s) {
  Section sec;
  sec.planes[sec.count++] = {Eigen::Vector2d(0, 1), 0.0};   // top face
  sec.planes[sec.count++] = {Eigen::Vector2d(-1, 0), 0.0};  // bore wall
  const double h = s.chamfer_depth, w = s.chamfer_width();
  if (h > 0.0 && w > 0.0) {
    const Eigen::Vector2d raw(-h / w, 1.0);
    const double norm = raw.norm();
    sec.planes[sec.count++] = {raw / norm, -h / norm};
  }
  return sec;
}

bool feasible(const Section& sec, const Eigen::Vector2d& q, double rho) {
  for (int i = 0; i < sec.count; ++i) {
    if (sec.planes[i].n.dot(q) > sec.planes[i].b - rho + 1e-15) return false;
  }
  return true;
}

// Nearest point of the eroded section {n.q <= b - rho} to q (q outside it).
Eigen::Vector2d project_eroded(const Section& sec, const Eigen::Vector2d& q, double rho) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d out = q;
  auto consider = [&](const Eigen::Vector2d& c) {
    const double d = (c - q).squaredNorm();
    if (d < best && feasible(sec, c, rho)) {
      best = d;
      out = c;
    }
  };
  for (int i = 0; i < sec.count; ++i) {
    const auto& p = sec.planes[i];
    consider(q - (p.n.dot(q) - (p.b - rho)) * p.n);
  }
  for (int i = 0; i < sec.count; ++i) {
    for (int j = i + 1; j < sec.count; ++j) {
      Eigen::Matrix2d a;
      a.row(0) = sec.planes[i].n.transpose();
      a.row(1) = sec.planes[j].n.transpose();
      if (std::abs(a.determinant()) < 1e-12) continue;
      consider(a.inverse() * Eigen::Vector2d(sec.planes[i].b - rho, sec.planes[j].b - rho));
    }
  }
  return out;
}

Vector3d friction_force(const Vector3d& v, const Vector3d& n, double normal, double mu, double v_slip) {
  const Vector3d vt = v - v.dot(n) * n;
  const double speed = vt.norm();
  if (speed == 0.0 || normal <= 0.0 || mu <= 0.0) return Vector3d::Zero();
  return -mu * normal * vt / std::max(speed, v_slip);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

// ---- scenes ---------------------------------------------------------------

void PegGeometry::validate() const {
  require(half_extent > 0.0, "peg half extent must be > 0");
  require(length > 0.0, "peg length must be > 0");
  require(sample_spacing > 0.0, "peg sample spacing must be > 0");
  require(!ring_heights.empty(), "peg needs at least one sample ring");
  for (double h : ring_heights) require(h >= 0.0 && h <= length, "peg ring heights must lie on the peg");
}

std::vector<Vector3d> PegGeometry::samples() const {
  std::vector<Vector3d> pts;
  for (double z : ring_heights) {
    if (shape == PegShape::circle) {
      const int n = std::max(8, static_cast<int>(std::ceil(2 * M_PI * half_extent / sample_spacing)));
      for (int i = 0; i < n; ++i) {
        const double a = 2 * M_PI * i / n;
        pts.emplace_back(half_extent * std::cos(a), half_extent * std::sin(a), z);
      }
    } else {
      const int per_side = std::max(1, static_cast<int>(std::ceil(2 * half_extent / sample_spacing)));
      const double a = half_extent;
      for (int i = 0; i < per_side; ++i) {
        const double s = -a + 2 * a * i / per_side;
        pts.emplace_back(s, -a, z);
        pts.emplace_back(a, s, z);
        pts.emplace_back(-s, a, z);
        pts.emplace_back(-a, -s, z);
      }
    }
  }
  return pts;
}

void PegHoleScene::validate() const {
  peg.validate();
  require(clearance >= 0.0, "clearance must be >= 0");
  require(chamfer_depth >= 0.0, "chamfer depth must be >= 0");
  require(chamfer_angle >= 0.0 && chamfer_angle < M_PI / 2, "chamfer angle must be in [0, pi/2)");
  require(stiffness > 0.0, "contact stiffness must be > 0");
  require(friction >= 0.0, "friction coefficient must be >= 0");
  require(edge_radius >= 0.0, "edge radius must be >= 0");
  require(chamfer_depth == 0.0 || edge_radius < 0.5 * std::min(chamfer_depth, chamfer_width()),
          "edge radius must be smaller than the chamfer");
  require(slip_velocity > 0.0, "slip velocity must be > 0");
  require(depth_target > 0.0 && depth_target < peg.length, "depth target must be inside the peg length");
}

void WipeScene::validate() const {
  require((board_half_extents.array() > 0.0).all(), "board extents must be > 0");
  require((eraser_half_extents.array() > 0.0).all(), "eraser extents must be > 0");
  require(samples_x >= 1 && samples_y >= 1, "eraser needs at least one contact sample");
  require(stiffness > 0.0, "contact stiffness must be > 0");
  require(friction >= 0.0, "friction coefficient must be >= 0");
  require(slip_velocity > 0.0, "slip velocity must be > 0");
}

// ---- contact --------------------------------------------------------------

PointContact hole_point_contact(const PegHoleScene& scene, const Vector3d& p) {
  const double a = scene.hole_half_extent();
  double u;
  Eigen::Vector2d dir = Eigen::Vector2d::Zero();
  if (scene.peg.shape == PegShape::circle) {
    const double r = std::hypot(p.x(), p.y());
    u = std::max(r - a, 0.0);
    if (u > 0.0) dir = Eigen::Vector2d(p.x(), p.y()) / r;
  } else {
    const double dx = std::max(std::abs(p.x()) - a, 0.0);
    const double dy = std::max(std::abs(p.y()) - a, 0.0);
    u = std::hypot(dx, dy);
    if (u > 0.0) dir = Eigen::Vector2d(std::copysign(dx, p.x()), std::copysign(dy, p.y())) / u;
  }

  const Section sec = hole_section(scene);
  const Eigen::Vector2d q(u, p.z());
  const double rho = scene.edge_radius;

  double worst = -std::numeric_limits<double>::infinity();
  int nearest = 0;
  for (int i = 0; i < sec.count; ++i) {
    const double s = sec.planes[i].n.dot(q) - sec.planes[i].b;
    if (s > worst) {
      worst = s;
      nearest = i;
    }
  }

  PointContact c;
  Eigen::Vector2d n2;
  if (worst <= -rho) {
    c.penetration = -worst;
    n2 = sec.planes[nearest].n;
  } else {
    const Eigen::Vector2d proj = project_eroded(sec, q, rho);
    const double d = (q - proj).norm();
    if (d >= rho) return c;
    c.penetration = rho - d;
    n2 = d > 0.0 ? Eigen::Vector2d((q - proj) / d) : sec.planes[nearest].n;
  }
  if (c.penetration <= 0.0) return PointContact{};
  c.normal = Vector3d(n2.x() * dir.x(), n2.x() * dir.y(), n2.y());
  const double len = c.normal.norm();
  if (len == 0.0) return PointContact{};
  c.normal /= len;
  return c;
}

PegContact contact_wrench_peg(const PegHoleScene& scene, const OrientedKeypointd& peg_end,
                              const std::optional<Twistd>& peg_twist) {
  const Posed rel = scene.hole.inverse() * peg_end.frame;  // peg_end in hole frame
  const Rotationd& hole_r = scene.hole.rotation();
  const Rotationd to_hole = hole_r.inverse();

  PegContact out;
  Vector3d force = Vector3d::Zero(), torque = Vector3d::Zero();  // hole axes, about peg_end
  for (const Vector3d& s : scene.peg.samples()) {
    const Vector3d arm = rel.rotation() * s;
    const PointContact pc = hole_point_contact(scene, rel.translation() + arm);
    if (pc.penetration <= 0.0) continue;
    const double fn = scene.stiffness * pc.penetration;
    Vector3d f = fn * pc.normal;
    if (peg_twist) {
      const Vector3d w = to_hole * peg_twist->angular;
      const Vector3d v = to_hole * peg_twist->linear + w.cross(arm);
      f += friction_force(v, pc.normal, fn, scene.friction, scene.slip_velocity);
    }
    force += f;
    torque += arm.cross(f);
    out.normal_force += fn;
    out.max_penetration = std::max(out.max_penetration, pc.penetration);
    ++out.active_samples;
  }
  out.wrench = Wrenchd{hole_r * torque, hole_r * force, at_keypoint(peg_end.label)};

  const Vector3d tip = rel.translation();
  const double a = scene.hole_half_extent();
  const bool inside = scene.peg.shape == PegShape::circle ? std::hypot(tip.x(), tip.y()) <= a
                                                          : std::abs(tip.x()) <= a && std::abs(tip.y()) <= a;
  out.depth = inside ? std::max(0.0, -tip.z()) : 0.0;
  return out;
}

WipeContact contact_wrench_wipe(const WipeScene& scene, const OrientedKeypointd& center, double time,
                                const std::optional<Twistd>& center_twist) {
  const Posed rel = scene.board.inverse() * center.frame;
  const Rotationd& board_r = scene.board.rotation();
  const Rotationd to_board = board_r.inverse();
  const double height = scene.surface_height(time);
  const double k = scene.stiffness / (scene.samples_x * scene.samples_y);
  const Vector3d normal = Vector3d::UnitZ();

  WipeContact out;
  Vector3d force = Vector3d::Zero(), torque = Vector3d::Zero();
  for (int i = 0; i < scene.samples_x; ++i) {
    for (int j = 0; j < scene.samples_y; ++j) {
      const double sx = scene.samples_x == 1 ? 0.0 : -1.0 + 2.0 * i / (scene.samples_x - 1);
      const double sy = scene.samples_y == 1 ? 0.0 : -1.0 + 2.0 * j / (scene.samples_y - 1);
      const Vector3d arm =
          rel.rotation() * Vector3d(sx * scene.eraser_half_extents.x(), sy * scene.eraser_half_extents.y(), 0.0);
      const Vector3d p = rel.translation() + arm;
      if (std::abs(p.x()) > scene.board_half_extents.x() || std::abs(p.y()) > scene.board_half_extents.y()) continue;
      const double pen = height - p.z();
      if (pen <= 0.0) continue;
      const double fn = k * pen;
      Vector3d f = fn * normal;
      if (center_twist) {
        const Vector3d w = to_board * center_twist->angular;
        const Vector3d v = to_board * center_twist->linear + w.cross(arm);
        f += friction_force(v, normal, fn, scene.friction, scene.slip_velocity);
      }
      force += f;
      torque += arm.cross(f);
      out.normal_force += fn;
      ++out.active_samples;
    }
  }
  out.wrench = Wrenchd{board_r * torque, board_r * force, at_keypoint(center.label)};
  return out;
}

// ---- perception -----------------------------------------------------------

void PerceptionModel::validate() const {
  require(position_sigma >= 0.0 && std::isfinite(position_sigma), "position sigma must be finite and >= 0");
  require(orientation_sigma >= 0.0 && std::isfinite(orientation_sigma), "orientation sigma must be finite and >= 0");
  for (const auto& [label, b] : bias) require(b.allFinite(), "perception bias for " + label + " is not finite");
}

std::vector<OrientedKeypointd> perceive(const std::vector<OrientedKeypointd>& truth, const PerceptionModel& model,
                                        Rng& rng) {
  std::vector<OrientedKeypointd> out;
  out.reserve(truth.size());
  for (const auto& k : truth) {
    Vector3d dp, dr;
    for (int i = 0; i < 3; ++i) dp[i] = model.position_sigma * standard_normal(rng);
    for (int i = 0; i < 3; ++i) dr[i] = model.orientation_sigma * standard_normal(rng);
    Vector3d p = k.frame.translation() + dp;
    if (auto it = model.bias.find(k.label); it != model.bias.end()) p += k.frame.rotation() * it->second;
    const Rotationd r = model.orientation_sigma > 0.0 ? Rotationd::from_rotation_vector(dr) * k.frame.rotation()
                                                      : k.frame.rotation();
    out.push_back({k.label, Posed(r, p), k.parent});
  }
  return out;
}

// ---- sampling -------------------------------------------------------------

double Range::sample(Rng& rng) const {
  const double u = uniform01(rng);
  return lo + u * (hi - lo);
}

void Range::validate(const std::string& name, bool positive) const {
  require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, name + ": range needs lo <= hi");
  if (positive) require(lo > 0.0, name + ": range must be positive");
}

void CategorySampler::validate() const {
  peg_half_extent.validate("peg_half_extent", true);
  peg_length.validate("peg_length", true);
  handle_offset.validate("handle_offset", false);
  grasp_yaw.validate("grasp_yaw", false);
  grasp_tilt.validate("grasp_tilt", false);
  eraser_half_length.validate("eraser_half_length", true);
  eraser_half_width.validate("eraser_half_width", true);
  require(handle_offset.lo >= 0.0, "handle_offset must be >= 0");
}

PegInstance sample_peg(const CategorySampler& s, Rng& rng) {
  PegInstance p{};
  p.half_extent = s.peg_half_extent.sample(rng);
  p.length = s.peg_length.sample(rng);
  p.handle_offset = s.handle_offset.sample(rng);
  p.grasp_yaw = s.grasp_yaw.sample(rng);
  p.grasp_tilt = s.grasp_tilt.sample(rng);
  return p;
}

EraserInstance sample_eraser(const CategorySampler& s, Rng& rng) {
  EraserInstance e{};
  e.half_length = s.eraser_half_length.sample(rng);
  e.half_width = s.eraser_half_width.sample(rng);
  e.grasp_yaw = s.grasp_yaw.sample(rng);
  e.grasp_tilt = s.grasp_tilt.sample(rng);
  return e;
}

// ---- world ----------------------------------------------------------------

std::string to_string(WorldFlag f) {
  switch (f) {
    case WorldFlag::none: return "none";
    case WorldFlag::joint_limit: return "joint_limit";
    case WorldFlag::force_limit: return "force_limit";
    case WorldFlag::non_finite: return "non_finite";
  }
  return "unknown";
}

World::World(KinematicChain chain, AttachedObject object, TaskScene scene, std::string contact_label, WorldConfig cfg,
             Eigen::VectorXd q)
    : chain_(std::move(chain)),
      object_(std::move(object)),
      scene_(std::move(scene)),
      contact_label_(std::move(contact_label)),
      cfg_(cfg),
      q_(std::move(q)) {
  require(cfg_.dt > 0.0, "world dt must be > 0");
  require(cfg_.joint_admittance > 0.0, "joint admittance must be > 0");
  require(cfg_.force_limit > 0.0, "force limit must be > 0");
  if (!object_.has(contact_label_)) throw UnknownKeypoint(contact_label_);
  chain_.check_limits(q_);
  std::visit([](const auto& s) { s.validate(); }, scene_);
  update_contact(std::nullopt);
}

void World::update_contact(const std::optional<Twistd>& twist) {
  const OrientedKeypointd kp = keypoint(contact_label_);
  if (const auto* peg = std::get_if<PegHoleScene>(&scene_)) {
    const PegContact c = contact_wrench_peg(*peg, kp, twist);
    contact_ = {c.wrench, c.normal_force, c.depth};
  } else {
    const WipeContact c = contact_wrench_wipe(std::get<WipeScene>(scene_), kp, time_, twist);
    contact_ = {c.wrench, c.normal_force, 0.0};
  }
}

Wrenchd World::wrist_measurement() const {
  const Posed gripper = gripper_pose(chain_, q_);
  const Posed contact_frame = Posed::translation(keypoint(contact_label_).position());
  return transform_wrench(gripper.inverse() * contact_frame, contact_.wrench, kGripperFrame);
}

Eigen::VectorXd World::external_torque() const {
  return keypoint_jacobian(chain_, q_, object_, contact_label_).matrix.transpose() * contact_.wrench.vector();
}

WorldFlag World::step(const JointCommand& command) {
  Eigen::VectorXd qdot;
  if (const auto* v = std::get_if<JointVelocityCommand>(&command)) {
    qdot = v->qdot;
  } else {
    const auto& tau = std::get<JointTorqueCommand>(command).tau;
    if (tau.size() != q_.size()) throw std::invalid_argument("World::step: torque command has the wrong size");
    const Eigen::VectorXd tau_contact = -external_torque();
    qdot = cfg_.joint_admittance * (tau - tau_contact - gravity_torque(chain_, q_, cfg_.gravity));
  }
  if (qdot.size() != q_.size()) throw std::invalid_argument("World::step: command has the wrong size");

  WorldFlag raised = WorldFlag::none;
  if (!qdot.allFinite()) {
    raised = WorldFlag::non_finite;
  } else {
    q_ += qdot * cfg_.dt;
    time_ += cfg_.dt;
    if (!chain_.within_limits(q_)) {
      raised = WorldFlag::joint_limit;
      for (std::size_t i = 0; i < chain_.dof(); ++i) {
        const auto& jt = chain_.joint(i);
        q_[static_cast<Eigen::Index>(i)] = std::clamp(q_[static_cast<Eigen::Index>(i)], jt.lower, jt.upper);
      }
    }
    const Matrix6Xd j = keypoint_jacobian(chain_, q_, object_, contact_label_).matrix;
    update_contact(Twistd::from_vector(j * qdot, at_keypoint(contact_label_)));
    if (raised == WorldFlag::none && contact_.wrench.force.norm() > cfg_.force_limit) raised = WorldFlag::force_limit;
  }
  if (raised != WorldFlag::none && flag_ == WorldFlag::none) flag_ = raised;
  return raised;
}

// ---- judges ---------------------------------------------------------------

WipeVerdict judge_wipe(const WipeTrace& trace, const WipeJudgeConfig& cfg) {
  WipeVerdict v;
  if (trace.samples.empty() || trace.waypoints.size() != trace.waypoint_times.size()) return v;
  for (std::size_t i = 0; i < trace.waypoints.size(); ++i) {
    const double t = trace.waypoint_times[i];
    const auto it = std::min_element(trace.samples.begin(), trace.samples.end(), [t](const auto& a, const auto& b) {
      return std::abs(a.time - t) < std::abs(b.time - t);
    });
    v.max_edge_error = std::max(v.max_edge_error, (it->front - trace.waypoints[i]).norm());
  }
  double run_start = -1.0;
  for (const auto& s : trace.samples) {
    if (s.time < trace.wipe_start || s.time > trace.wipe_end) continue;
    if (s.normal_force < cfg.min_force) {
      if (run_start < 0.0) run_start = s.time;
      v.longest_low_force = std::max(v.longest_low_force, s.time - run_start);
    } else {
      run_start = -1.0;
    }
  }
  v.pass = v.max_edge_error <= cfg.max_edge_error && v.longest_low_force <= cfg.max_low_force_duration;
  return v;
}

InsertVerdict judge_insert(const InsertTrace& trace) {
  InsertVerdict v;
  if (trace.samples.empty()) return v;
  v.final_depth = trace.samples.back().depth;
  v.pass = v.final_depth >= trace.depth_target;
  return v;
}

}  // namespace okp
