#include "okp/harness.hpp"

#include <cmath>

namespace okp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Everything the episode needs that depends on the task.
struct TaskSetup {
  TaskScene scene;
  std::vector<OrientedKeypointd> object_keypoints;  // object frame
  Posed object_start;                               // world
  Posed grasp;                                      // gripper -> object
  std::vector<OrientedKeypointd> scene_keypoints;   // world, true
  std::string contact_label;
  Json instance;
};

TaskSetup setup_insert(const Scenario& sc, Rng& rng) {
  const PegInstance inst = sample_peg(sc.sampler, rng);
  PegHoleScene scene = sc.insert.scene;
  scene.peg.half_extent = inst.half_extent;
  scene.peg.length = inst.length;
  scene.validate();

  // object frame at the peg top center, z along the body away from the tip
  TaskSetup t;
  t.object_keypoints = {{"peg_end", Posed::translation(0, 0, -inst.length), kObjectFrame}};
  t.object_start = scene.hole * sc.insert.start * Posed::translation(0, 0, inst.length);
  t.grasp = Posed::translation(0, 0, sc.tcp) * Posed(Rotationd::about_z(inst.grasp_yaw)) *
            Posed(Rotationd::about_x(inst.grasp_tilt)) * Posed(Rotationd::about_x(M_PI)) *
            Posed::translation(0, 0, inst.handle_offset);
  t.scene_keypoints = {scene.hole_top()};
  t.contact_label = "peg_end";
  t.instance = {{"half_extent", inst.half_extent}, {"length", inst.length},   {"handle_offset", inst.handle_offset},
                {"grasp_yaw", inst.grasp_yaw},     {"grasp_tilt", inst.grasp_tilt}, {"clearance", scene.clearance}};
  t.scene = scene;
  return t;
}

TaskSetup setup_wipe(const Scenario& sc, Rng& rng) {
  const EraserInstance inst = sample_eraser(sc.sampler, rng);
  WipeScene scene = sc.wipe.scene;
  scene.eraser_half_extents = {inst.half_length, inst.half_width};
  scene.validate();

  // object frame at the center of the wiping face, z out of the face
  TaskSetup t;
  t.object_keypoints = {{"center", Posed::identity(), kObjectFrame},
                        {"front", Posed::translation(inst.half_length, 0, 0), kObjectFrame}};
  t.object_start = scene.board * sc.wipe.start;
  t.grasp = Posed::translation(0, 0, sc.tcp) * Posed(Rotationd::about_z(inst.grasp_yaw)) *
            Posed(Rotationd::about_x(inst.grasp_tilt)) * Posed::translation(0, 0, sc.wipe.eraser_height);
  t.scene_keypoints = {scene.board_keypoint()};
  t.contact_label = "center";
  t.instance = {{"half_length", inst.half_length},
                {"half_width", inst.half_width},
                {"grasp_yaw", inst.grasp_yaw},
                {"grasp_tilt", inst.grasp_tilt},
                {"height_offset", scene.height_offset}};
  t.scene = scene;
  return t;
}

const OrientedKeypointd& find(const std::vector<OrientedKeypointd>& kps, const std::string& label) {
  for (const auto& k : kps) {
    if (k.label == label) return k;
  }
  throw UnknownKeypoint(label);
}

std::unique_ptr<Agent> make_agent(const Scenario& sc, const AgentSpec& spec,
                                  const std::vector<OrientedKeypointd>& scene_perceived,
                                  const std::vector<OrientedKeypointd>& object_now) {
  std::unique_ptr<Agent> agent;
  if (spec.type == "insertion") {
    agent = std::make_unique<InsertionAgent>(spec.insertion);
    if (spec.retarget) agent = retarget(std::move(agent), "hole_top");
  } else if (spec.type == "wiping") {
    WipingAgentConfig cfg = spec.wiping;
    cfg.path = sc.wipe.path;
    agent = std::make_unique<WipingAgent>(cfg);
    if (spec.retarget) agent = retarget(std::move(agent), "board");
  } else if (spec.type == "open_loop_insert") {
    const Vector3d down = -find(scene_perceived, "hole_top").axis(2);
    agent = std::make_unique<OpenLoopInsert>(down, spec.speed, (sc.hover + spec.depth) / spec.speed);
  } else if (spec.type == "open_loop_wipe") {
    const Posed& board = find(scene_perceived, "board").frame;
    OpenLoopWipePlan plan;
    plan.start = find(object_now, "front").position();
    plan.path = sc.wipe.path;
    for (auto& w : plan.path.waypoints) w = (board * Vector3d(w.x(), w.y(), 0.0)).head<2>();
    plan.press_height = board.translation().z() - spec.press_depth;
    plan.hold_time = spec.hold_time;
    agent = std::make_unique<OpenLoopWipe>(plan);
  } else {
    throw ConfigError("unknown agent type '" + spec.type + "'");
  }
  return agent;
}

std::string flag_mode(WorldFlag f, bool staging) {
  if (f == WorldFlag::non_finite) return kSimulationError;
  return staging ? kGraspStage : kPerceptionExceedsCorrection;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(splitmix64(master) ^ (trial + 0x632be59bd9b4e019ULL));
}

Json to_json(const TrialRecord& r) {
  Json j{{"trial", r.trial},     {"agent", r.agent}, {"seed", r.seed},         {"instance", r.instance},
         {"pass", r.pass},       {"failure_mode", r.failure_mode.empty() ? Json(nullptr) : Json(r.failure_mode)},
         {"duration", r.duration}, {"steps", r.steps}, {"metrics", r.metrics}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const StepRecord& s) {
  return Json{{"time", s.time},
              {"staging", s.staging},
              {"q", std::vector<double>(s.q.data(), s.q.data() + s.q.size())},
              {"tracked", to_json(s.tracked)},
              {"perceived", to_json(s.perceived)},
              {"wrench", std::vector<double>(s.wrench.vector().data(), s.wrench.vector().data() + 6)},
              {"action", std::vector<double>(s.action.data(), s.action.data() + 6)},
              {"normal_force", s.normal_force},
              {"depth", s.depth}};
}

EpisodeResult run_episode(const Scenario& sc, const AgentSpec& spec, int trial, std::uint64_t seed,
                          const EpisodeOptions& options) {
  EpisodeResult res;
  TrialRecord& rec = res.record;
  rec.trial = trial;
  rec.agent = spec.name();
  rec.seed = seed;
  rec.metrics = Json::object();

  auto fail = [&](const std::string& mode, const std::string& detail) {
    rec.pass = false;
    rec.failure_mode = mode;
    rec.detail = detail;
  };

  try {
    Rng rng(seed);
    TaskSetup task = sc.task == TaskKind::insert ? setup_insert(sc, rng) : setup_wipe(sc, rng);
    rec.instance = task.instance;
    const KinematicChain& chain = sc.chain;

    // grasp: the arm picks the object up where it lies
    const Posed gripper_target = task.object_start * task.grasp.inverse();
    const PoseTrackingResult ik = track_pose(chain, sc.home, Posed::identity(), gripper_target, sc.control, 1e-12, 200);
    if (!ik.converged || !chain.within_limits(ik.q)) {
      fail(kGraspStage, "grasp pose unreachable");
      return res;
    }
    const Eigen::VectorXd q0 = ik.q;
    const AttachedObject truth{task.grasp, task.object_keypoints};

    // perceive once, at grasp time
    std::vector<OrientedKeypointd> world_truth;
    for (const auto& k : task.object_keypoints) world_truth.push_back(keypoint_world(chain, q0, truth, k.label));
    for (const auto& k : task.scene_keypoints) world_truth.push_back(k);
    const std::vector<OrientedKeypointd> seen = perceive(world_truth, sc.perception, rng);
    const std::size_t n_obj = task.object_keypoints.size();
    const std::vector<OrientedKeypointd> object_seen(seen.begin(), seen.begin() + static_cast<long>(n_obj));
    const std::vector<OrientedKeypointd> scene_seen(seen.begin() + static_cast<long>(n_obj), seen.end());
    const AttachedObject perceived = attach_object(object_seen, gripper_pose(chain, q0), task.grasp);

    WorldConfig wcfg = sc.world;
    wcfg.dt = sc.dt;
    World world(chain, truth, task.scene, task.contact_label, wcfg, q0);

    // staging: straight task-space move to the hover pose over the task keypoint
    PlacementGoal goal;
    std::string stage_label;
    if (sc.task == TaskKind::insert) {
      stage_label = "peg_end";
      goal.constraints.push_back(FrameTarget{stage_label, find(scene_seen, "hole_top").frame * Posed::translation(0, 0, sc.hover)});
    } else {
      stage_label = "front";
      const Eigen::Vector2d w0 = sc.wipe.path.waypoints.front();
      goal.constraints.push_back(FrameTarget{
          stage_label, find(scene_seen, "board").frame * Posed::translation(w0.x(), w0.y(), sc.hover) *
                           Posed(Rotationd::about_x(M_PI))});
    }
    StagingOptions sopt = sc.staging;
    sopt.dt = sc.dt;
    sopt.velocity = sc.control;
    StagingPlan plan;
    try {
      plan = stage_pick_place(chain, q0, perceived, goal, sopt);
    } catch (const StagingError& e) {
      fail(kGraspStage, e.what());
      return res;
    }

    const std::string control = sc.task == TaskKind::insert ? "peg_end" : "center";
    auto record_step = [&](bool staging, const Wrenchd& w, const Vector6d& action) {
      ++rec.steps;
      if (!options.keep_trace && !sc.log_traces) return;
      res.trace.push_back({world.time(), staging, world.q(), world.keypoint(control).frame,
                           keypoint_world(chain, world.q(), perceived, control).frame, w, action,
                           world.contact().normal_force, world.contact().depth});
    };

    const Wrenchd no_wrench = Wrenchd::zero(at_keypoint(control));
    for (const Eigen::VectorXd& q_next : plan.joints) {
      const WorldFlag f = world.step(JointVelocityCommand{(q_next - world.q()) / sc.dt});
      record_step(true, no_wrench, Vector6d::Zero());
      if (f != WorldFlag::none) {
        rec.duration = world.time();
        fail(flag_mode(f, true), "staging: " + to_string(f));
        return res;
      }
    }

    // closed loop (or replay) from the hover pose
    std::vector<OrientedKeypointd> object_now;
    for (const auto& k : perceived.keypoints) object_now.push_back(keypoint_world(chain, world.q(), perceived, k.label));
    std::unique_ptr<Agent> agent = make_agent(sc, spec, scene_seen, object_now);
    if (agent->control_label() != control) throw std::logic_error("agent controls an unexpected keypoint");
    agent->reset();

    const Posed tool = perceived.gripper_to_keypoint(control);
    InsertTrace insert_trace;
    insert_trace.depth_target = sc.task == TaskKind::insert ? std::get<PegHoleScene>(task.scene).depth_target : 0.0;
    WipeTrace wipe_trace;
    bool timed_out = false;
    WorldFlag abort = WorldFlag::none;
    if (sc.task == TaskKind::insert) {
      const Posed rel = std::get<PegHoleScene>(task.scene).hole.inverse() * world.keypoint("peg_end").frame;
      rec.metrics["start_lateral_error"] = rel.translation().head<2>().norm();
    }

    for (long k = 0;; ++k) {
      const double t = static_cast<double>(k) * sc.dt;
      if (agent->done()) break;
      if (t > sc.max_time) {
        timed_out = true;
        break;
      }
      AgentInput in;
      in.time = t;
      for (const auto& kp : perceived.keypoints) in.keypoints.push_back(keypoint_world(chain, world.q(), perceived, kp.label));
      for (const auto& kp : scene_seen) in.keypoints.push_back(kp);
      const Posed ctrl = find(in.keypoints, control).frame;
      const Posed gripper = gripper_pose(chain, world.q());
      in.keypoint_wrench =
          virtual_sensor(world.wrist_measurement(), Posed::translation(ctrl.translation()).inverse() * gripper,
                         at_keypoint(control));

      const AgentAction action = agent->step(in);
      action.validate();
      if (action.target_label != control) throw std::invalid_argument("agent commanded keypoint " + action.target_label);

      WorldFlag f;
      if (action.mode() == CommandMode::twist) {
        const Twistd& tw = action.twist();
        if (tw.expressed_in != at_keypoint(control)) throw FrameMismatch(at_keypoint(control), tw.expressed_in);
        const Posed target = displace(ctrl, tw, sc.dt);
        const PoseTrackingResult r = track_pose(chain, world.q(), tool, target, sc.control);
        Eigen::VectorXd qdot = (r.q - world.q()) / sc.dt;
        const double peak = qdot.cwiseAbs().maxCoeff();
        if (peak > sc.control.joint_velocity_limit) qdot *= sc.control.joint_velocity_limit / peak;
        f = world.step(JointVelocityCommand{qdot});
      } else {
        const KeypointJacobian j = keypoint_jacobian(chain, world.q(), perceived, control);
        const Eigen::VectorXd tau = resolve_force(j, action.wrench(), gravity_torque(chain, world.q(), sc.world.gravity));
        f = world.step(JointTorqueCommand{tau});
      }
      record_step(false, in.keypoint_wrench, action.vector());

      const double ta = t + sc.dt;
      if (sc.task == TaskKind::insert) {
        insert_trace.samples.push_back({ta, world.contact().depth});
      } else {
        const auto& ws = std::get<WipeScene>(task.scene);
        const Vector3d front = ws.board.inverse() * world.keypoint("front").position();
        wipe_trace.samples.push_back({ta, front.head<2>(), world.contact().normal_force});
      }
      if (f != WorldFlag::none) {
        abort = f;
        break;
      }
    }
    rec.duration = world.time();

    bool judged = false;
    if (sc.task == TaskKind::insert) {
      const InsertVerdict v = judge_insert(insert_trace);
      judged = v.pass;
      rec.metrics["final_depth"] = v.final_depth;
    } else {
      wipe_trace.waypoints = sc.wipe.path.waypoints;
      wipe_trace.waypoint_times = sc.wipe.path.waypoint_times();
      wipe_trace.wipe_start = sc.wipe.path.start_time;
      wipe_trace.wipe_end = sc.wipe.path.end_time();
      const WipeVerdict v = judge_wipe(wipe_trace, sc.wipe.judge);
      judged = v.pass;
      rec.metrics["max_edge_error"] = v.max_edge_error;
      rec.metrics["longest_low_force"] = v.longest_low_force;
    }
    rec.metrics["judge_pass"] = judged;

    if (abort != WorldFlag::none) {
      fail(flag_mode(abort, false), to_string(abort));
    } else if (judged) {
      rec.pass = true;
    } else if (timed_out) {
      fail(kTimeout, "agent did not finish within max_time");
    } else {
      fail(kPerceptionExceedsCorrection, agent->gave_up() ? "agent gave up" : "judge rejected the episode");
    }
  } catch (const std::exception& e) {
    fail(kSimulationError, e.what());
  }
  return res;
}

}  // namespace okp
