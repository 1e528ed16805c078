#include "okp/agents.hpp"

#include "okp/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace okp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Twistd world_twist(const Rotationd& axes, const Vector3d& angular, const Vector3d& linear, const std::string& label) {
  return Twistd{axes * angular, axes * linear, at_keypoint(label)};
}

}  // namespace

const OrientedKeypointd& AgentInput::keypoint(const std::string& label) const {
  for (const auto& k : keypoints) {
    if (k.label == label) return k;
  }
  throw UnknownKeypoint(label);
}

bool AgentInput::has(const std::string& label) const {
  return std::any_of(keypoints.begin(), keypoints.end(), [&](const auto& k) { return k.label == label; });
}

Vector6d AgentAction::vector() const {
  return mode() == CommandMode::twist ? twist().vector() : wrench().vector();
}

void AgentAction::validate() const {
  if (!vector().allFinite()) throw std::invalid_argument("agent action for " + target_label + " is not finite");
}

// ---- insertion ------------------------------------------------------------

void InsertionAgentConfig::validate() const {
  require(approach_speed >= 0.0 && alignment_gain >= 0.0 && lateral_gain >= 0.0, "insertion gains must be >= 0");
  require((compliance.array() >= 0.0).all(), "compliance gains must be >= 0");
  require(push_force >= 0.0 && feedforward_speed >= 0.0, "push force and feedforward speed must be >= 0");
  require(perturbation_amplitude > 0.0 && perturbation_period > 0.0, "perturbation amplitude and period must be > 0");
  require(switching_period > 0.0, "switching period must be > 0");
  require(closed_loop_fraction > 0.0 && closed_loop_fraction <= 1.0, "closed-loop fraction must be in (0, 1]");
  require(max_search_radius > 0.0 && depth_target > 0.0, "search radius and depth target must be > 0");
  require(contact_threshold > 0.0 && drop_threshold > 0.0, "contact and drop thresholds must be > 0");
  require(stall_time > 0.0 && stall_progress > 0.0 && free_depth_margin >= 0.0, "stall settings must be > 0");
}

std::string to_string(InsertionPhase p) {
  switch (p) {
    case InsertionPhase::approach: return "approach";
    case InsertionPhase::contact: return "contact";
    case InsertionPhase::insert: return "insert";
    case InsertionPhase::done: return "done";
    case InsertionPhase::gave_up: return "gave_up";
  }
  return "unknown";
}

Eigen::Vector2d spiral_offset(double angle, double pitch) {
  const double r = pitch * angle / (2 * M_PI);
  return Eigen::Vector2d(r * std::cos(angle), r * std::sin(angle));
}

std::pair<AgentAction, InsertionState> insertion_agent_step(const AgentInput& input, const InsertionAgentConfig& cfg,
                                                            InsertionState s) {
  const OrientedKeypointd& peg = input.keypoint("peg_end");
  const OrientedKeypointd& hole = input.keypoint("hole_top");
  if (!input.keypoint_wrench.vector().allFinite()) throw std::invalid_argument("insertion agent: non-finite wrench");
  if (input.keypoint_wrench.expressed_at != at_keypoint("peg_end")) {
    throw FrameMismatch(at_keypoint("peg_end"), input.keypoint_wrench.expressed_at);
  }

  const double dt = s.started ? std::max(0.0, input.time - s.last_time) : 0.0;
  s.started = true;
  s.last_time = input.time;

  // everything below is in hole_top axes, positions relative to hole_top
  const Rotationd& hr = hole.frame.rotation();
  const Posed rel = hole.frame.inverse() * peg.frame;
  const Vector3d p = rel.translation();
  const Vector3d f = hr.inverse() * input.keypoint_wrench.force;
  const Vector3d tau = hr.inverse() * input.keypoint_wrench.torque;
  const Vector3d align = rotation_error(rel.rotation(), Rotationd::identity());
  const Vector3d c_ang = cfg.compliance.head<3>(), c_lin = cfg.compliance.tail<3>();

  Vector3d w = Vector3d::Zero(), v = Vector3d::Zero();
  auto finish = [&]() {
    return std::make_pair(AgentAction{"peg_end", world_twist(hr, w, v, "peg_end")}, s);
  };

  if (s.phase == InsertionPhase::done || s.phase == InsertionPhase::gave_up) return finish();

  if (s.phase == InsertionPhase::approach) {
    if (f.norm() > cfg.contact_threshold) {
      s.phase = InsertionPhase::contact;
      s.contact_time = input.time;
      s.contact_height = p.z();
    } else if (-p.z() >= cfg.depth_target + cfg.free_depth_margin) {
      s.phase = InsertionPhase::done;
      return finish();
    } else {
      w = cfg.alignment_gain * align;
      v.head<2>() = -cfg.lateral_gain * p.head<2>();
      v.z() = -cfg.approach_speed;
      return finish();
    }
  }

  const double depth = s.contact_height - p.z();
  if (depth >= cfg.depth_target) {
    s.phase = InsertionPhase::done;
    return finish();
  }

  const double cycle = std::fmod(input.time - s.contact_time, cfg.switching_period);
  const bool closed_loop = cycle < cfg.closed_loop_fraction * cfg.switching_period;
  const Vector3d f_err = f - Vector3d(0, 0, cfg.push_force);
  w = cfg.alignment_gain * align + c_ang.cwiseProduct(tau);

  if (s.phase == InsertionPhase::contact && depth >= cfg.drop_threshold) {
    s.phase = InsertionPhase::insert;
    s.stall_depth = depth;
    s.stall_since = input.time;
  }

  if (s.phase == InsertionPhase::insert) {
    if (depth >= s.stall_depth + cfg.stall_progress) {
      s.stall_depth = depth;
      s.stall_since = input.time;
    } else if (input.time - s.stall_since > cfg.stall_time) {
      s.phase = InsertionPhase::contact;
    }
  }

  if (s.phase == InsertionPhase::insert) {
    v = c_lin.cwiseProduct(f_err);
    v.z() -= cfg.feedforward_speed;
    return finish();
  }

  // contact: spiral search on closed-loop halves, feedforward push otherwise
  const double pitch = cfg.perturbation_amplitude;
  const double speed = 2 * M_PI * pitch / cfg.perturbation_period;
  Eigen::Vector2d ref_velocity = Eigen::Vector2d::Zero();
  if (closed_loop && dt > 0.0) {
    const double r = pitch * s.spiral_angle / (2 * M_PI);
    const double rate = speed / std::hypot(r, pitch / (2 * M_PI));
    const Eigen::Vector2d before = spiral_offset(s.spiral_angle, pitch);
    s.spiral_angle += rate * dt;
    ref_velocity = (spiral_offset(s.spiral_angle, pitch) - before) / dt;
  }
  const Eigen::Vector2d ref = spiral_offset(s.spiral_angle, pitch);
  if (ref.norm() > cfg.max_search_radius) {
    s.phase = InsertionPhase::gave_up;
    w.setZero();
    return finish();
  }
  v = c_lin.cwiseProduct(f_err);
  v.head<2>() += ref_velocity + cfg.lateral_gain * (ref - p.head<2>());
  if (!closed_loop) v.z() -= cfg.feedforward_speed;
  return finish();
}

InsertionAgent::InsertionAgent(InsertionAgentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

AgentAction InsertionAgent::step(const AgentInput& input) {
  auto [action, next] = insertion_agent_step(input, cfg_, state_);
  state_ = next;
  return action;
}

// ---- wiping ---------------------------------------------------------------

void WipePath::validate() const {
  require(!waypoints.empty(), "wipe path needs at least one waypoint");
  require(speed > 0.0 && start_time >= 0.0, "wipe path speed must be > 0 and start time >= 0");
  for (const auto& w : waypoints) require(w.allFinite(), "wipe waypoints must be finite");
}

std::vector<double> WipePath::waypoint_times() const {
  std::vector<double> t{start_time};
  for (std::size_t i = 1; i < waypoints.size(); ++i) t.push_back(t.back() + (waypoints[i] - waypoints[i - 1]).norm() / speed);
  return t;
}

double WipePath::end_time() const { return waypoint_times().back(); }

Eigen::Vector2d WipePath::position(double t) const {
  const std::vector<double> times = waypoint_times();
  if (t <= times.front()) return waypoints.front();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (t < times[i]) {
      const double s = (t - times[i - 1]) / (times[i] - times[i - 1]);
      return waypoints[i - 1] + s * (waypoints[i] - waypoints[i - 1]);
    }
  }
  return waypoints.back();
}

Eigen::Vector2d WipePath::velocity(double t) const {
  const std::vector<double> times = waypoint_times();
  if (t < times.front()) return Eigen::Vector2d::Zero();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (t < times[i]) return (waypoints[i] - waypoints[i - 1]) / (times[i] - times[i - 1]);
  }
  return Eigen::Vector2d::Zero();
}

void WipingAgentConfig::validate() const {
  require(nominal_normal_force >= 0.0, "nominal normal force must be >= 0");
  require(force_gain >= 0.0 && position_gain >= 0.0 && orientation_gain >= 0.0, "wiping gains must be >= 0");
  require(hold_time >= 0.0, "hold time must be >= 0");
  path.validate();
}

AgentAction wiping_agent_step(const AgentInput& input, const WipingAgentConfig& cfg) {
  const OrientedKeypointd& front = input.keypoint("front");
  const OrientedKeypointd& center = input.keypoint("center");
  if (!input.keypoint_wrench.vector().allFinite()) throw std::invalid_argument("wiping agent: non-finite wrench");
  if (input.keypoint_wrench.expressed_at != at_keypoint("center")) {
    throw FrameMismatch(at_keypoint("center"), input.keypoint_wrench.expressed_at);
  }

  const Vector3d down(0, 0, -1);
  const Vector3d w = cfg.orientation_gain * center.axis(2).cross(down);
  Vector3d v_front = Vector3d::Zero();
  v_front.head<2>() = cfg.position_gain * (cfg.path.position(input.time) - front.position().head<2>());
  Vector3d v = v_front - w.cross(front.position() - center.position());
  v.z() = cfg.force_gain * (input.keypoint_wrench.force.z() - cfg.nominal_normal_force);
  return AgentAction{"center", Twistd{w, v, at_keypoint("center")}};
}

WipingAgent::WipingAgent(WipingAgentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

AgentAction WipingAgent::step(const AgentInput& input) {
  time_ = input.time;
  return wiping_agent_step(input, cfg_);
}

// ---- open loop ------------------------------------------------------------

AgentAction open_loop_insert(const Vector3d& down, double speed) {
  return AgentAction{"peg_end", Twistd{Vector3d::Zero(), speed * down.normalized(), at_keypoint("peg_end")}};
}

OpenLoopInsert::OpenLoopInsert(Vector3d down, double speed, double duration)
    : velocity_(speed * down.normalized()), duration_(duration) {
  require(down.norm() > 0.0 && speed >= 0.0 && duration >= 0.0, "open-loop insert needs a direction, speed and duration");
}

AgentAction OpenLoopInsert::step(const AgentInput& input) {
  time_ = input.time;
  return AgentAction{"peg_end", Twistd{Vector3d::Zero(), velocity_, at_keypoint("peg_end")}};
}

AgentAction open_loop_wipe(const OpenLoopWipePlan& plan, double time) {
  Vector3d v = Vector3d::Zero();
  const double t0 = plan.path.start_time;
  if (time < t0) {
    // straight line from the start to the first pressed waypoint
    const Vector3d target(plan.path.waypoints.front().x(), plan.path.waypoints.front().y(), plan.press_height);
    if (t0 > 0.0) v = (target - plan.start) / t0;
  } else {
    v.head<2>() = plan.path.velocity(time);
  }
  return AgentAction{"center", Twistd{Vector3d::Zero(), v, at_keypoint("center")}};
}

OpenLoopWipe::OpenLoopWipe(OpenLoopWipePlan plan) : plan_(std::move(plan)) { plan_.path.validate(); }

AgentAction OpenLoopWipe::step(const AgentInput& input) {
  time_ = input.time;
  return open_loop_wipe(plan_, input.time);
}

// ---- retargeting ----------------------------------------------------------

RetargetAgent::RetargetAgent(std::unique_ptr<Agent> inner, std::string anchor_label)
    : inner_(std::move(inner)), anchor_label_(std::move(anchor_label)) {
  require(inner_ != nullptr, "retarget needs an agent");
}

std::vector<std::string> RetargetAgent::required_labels() const {
  std::vector<std::string> labels = inner_->required_labels();
  if (std::find(labels.begin(), labels.end(), anchor_label_) == labels.end()) labels.push_back(anchor_label_);
  return labels;
}

void RetargetAgent::reset() {
  anchor_.reset();
  inner_->reset();
}

AgentAction RetargetAgent::step(const AgentInput& input) {
  if (!anchor_) anchor_ = input.keypoint(anchor_label_).frame;
  const Posed to_nominal = anchor_->inverse();

  AgentInput nominal;
  nominal.time = input.time;
  nominal.keypoints.reserve(input.keypoints.size());
  for (const auto& k : input.keypoints) nominal.keypoints.push_back({k.label, to_nominal * k.frame, k.parent});
  nominal.keypoint_wrench = rotate(to_nominal.rotation(), input.keypoint_wrench);

  AgentAction a = inner_->step(nominal);
  if (a.mode() == CommandMode::twist) {
    a.command = rotate(anchor_->rotation(), a.twist());
  } else {
    a.command = rotate(anchor_->rotation(), a.wrench());
  }
  return a;
}

std::unique_ptr<Agent> retarget(std::unique_ptr<Agent> agent, const std::string& nominal_anchor_label) {
  return std::make_unique<RetargetAgent>(std::move(agent), nominal_anchor_label);
}

}  // namespace okp
