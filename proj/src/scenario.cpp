#include "okp/harness.hpp"

#include <cmath>
#include <set>

namespace okp {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

Json section(const Json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return Json::object();
  return j.at(key);
}

void read(const Json& j, const std::string& key, double& out, const std::string& where) {
  out = value_or<double>(j, key, out, where);
  if (!std::isfinite(out)) throw ConfigError(where + "." + key + ": must be finite");
}

void read(const Json& j, const std::string& key, bool& out, const std::string& where) {
  out = value_or<bool>(j, key, out, where);
}

Eigen::Vector2d vector2_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + ": expected an array of 2 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Range range_from_json(const Json& j, const Range& fallback, const std::string& where) {
  if (j.is_null()) return fallback;
  if (j.is_number()) return {j.get<double>(), j.get<double>()};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError(where + ": expected a number or [lo, hi]");
}

PegHoleScene peg_scene_from_json(const Json& j, const std::string& where) {
  PegHoleScene s;
  if (j.contains("hole")) s.hole = pose_from_json(j["hole"], where + ".hole");
  const std::string shape = value_or<std::string>(j, "shape", "square", where);
  if (shape == "square") {
    s.peg.shape = PegShape::square;
  } else if (shape == "circle") {
    s.peg.shape = PegShape::circle;
  } else {
    throw ConfigError(where + ".shape: expected square or circle");
  }
  read(j, "sample_spacing", s.peg.sample_spacing, where);
  if (j.contains("ring_heights")) s.peg.ring_heights = required<std::vector<double>>(j, "ring_heights", where);
  read(j, "clearance", s.clearance, where);
  read(j, "chamfer_depth", s.chamfer_depth, where);
  if (j.contains("chamfer_angle_deg")) s.chamfer_angle = required<double>(j, "chamfer_angle_deg", where) * M_PI / 180.0;
  read(j, "stiffness", s.stiffness, where);
  read(j, "friction", s.friction, where);
  read(j, "edge_radius", s.edge_radius, where);
  read(j, "slip_velocity", s.slip_velocity, where);
  read(j, "depth_target", s.depth_target, where);
  return s;
}

WipeScene wipe_scene_from_json(const Json& j, const std::string& where) {
  WipeScene s;
  if (j.contains("board")) s.board = pose_from_json(j["board"], where + ".board");
  read(j, "height_offset", s.height_offset, where);
  if (j.contains("board_half_extents")) s.board_half_extents = vector2_from_json(j["board_half_extents"], where + ".board_half_extents");
  if (j.contains("samples")) {
    const Json& n = j["samples"];
    if (!n.is_array() || n.size() != 2 || !n[0].is_number_integer() || !n[1].is_number_integer()) {
      throw ConfigError(where + ".samples: expected [nx, ny]");
    }
    s.samples_x = n[0].get<int>();
    s.samples_y = n[1].get<int>();
  }
  read(j, "stiffness", s.stiffness, where);
  read(j, "friction", s.friction, where);
  read(j, "slip_velocity", s.slip_velocity, where);
  read(j, "shift", s.shift, where);
  read(j, "shift_time", s.shift_time, where);
  return s;
}

InsertionAgentConfig insertion_from_json(const Json& j, const std::string& where) {
  InsertionAgentConfig c;
  read(j, "approach_speed", c.approach_speed, where);
  read(j, "alignment_gain", c.alignment_gain, where);
  read(j, "lateral_gain", c.lateral_gain, where);
  if (j.contains("compliance")) {
    const auto v = required<std::vector<double>>(j, "compliance", where);
    if (v.size() != 6) throw ConfigError(where + ".compliance: expected 6 numbers (angular, linear)");
    for (int i = 0; i < 6; ++i) c.compliance[i] = v[i];
  }
  read(j, "push_force", c.push_force, where);
  read(j, "perturbation_amplitude", c.perturbation_amplitude, where);
  read(j, "perturbation_period", c.perturbation_period, where);
  read(j, "max_search_radius", c.max_search_radius, where);
  read(j, "switching_period", c.switching_period, where);
  read(j, "closed_loop_fraction", c.closed_loop_fraction, where);
  read(j, "feedforward_speed", c.feedforward_speed, where);
  read(j, "depth_target", c.depth_target, where);
  read(j, "contact_threshold", c.contact_threshold, where);
  read(j, "drop_threshold", c.drop_threshold, where);
  read(j, "stall_time", c.stall_time, where);
  read(j, "stall_progress", c.stall_progress, where);
  read(j, "free_depth_margin", c.free_depth_margin, where);
  return c;
}

AgentSpec agent_from_json(const Json& j, TaskKind task, const std::string& where) {
  AgentSpec a;
  a.type = required<std::string>(j, "type", where);
  if (a.type == "insertion") {
    check_keys(j, {"type", "retarget", "approach_speed", "alignment_gain", "lateral_gain", "compliance", "push_force",
                   "perturbation_amplitude", "perturbation_period", "max_search_radius", "switching_period",
                   "closed_loop_fraction", "feedforward_speed", "depth_target", "contact_threshold",
                   "drop_threshold", "stall_time", "stall_progress", "free_depth_margin"},
               where);
    a.insertion = insertion_from_json(j, where);
  } else if (a.type == "wiping") {
    check_keys(j, {"type", "retarget", "nominal_normal_force", "force_gain", "position_gain", "orientation_gain",
                   "hold_time"},
               where);
    read(j, "nominal_normal_force", a.wiping.nominal_normal_force, where);
    read(j, "force_gain", a.wiping.force_gain, where);
    read(j, "position_gain", a.wiping.position_gain, where);
    read(j, "orientation_gain", a.wiping.orientation_gain, where);
    read(j, "hold_time", a.wiping.hold_time, where);
  } else if (a.type == "open_loop_insert") {
    check_keys(j, {"type", "speed", "depth"}, where);
    read(j, "speed", a.speed, where);
    read(j, "depth", a.depth, where);
    a.retarget = false;
  } else if (a.type == "open_loop_wipe") {
    check_keys(j, {"type", "press_depth", "hold_time"}, where);
    read(j, "press_depth", a.press_depth, where);
    read(j, "hold_time", a.hold_time, where);
    a.retarget = false;
  } else {
    throw ConfigError(where + ".type: unknown agent '" + a.type + "'");
  }
  if (a.closed_loop()) read(j, "retarget", a.retarget, where);
  const bool insert_agent = a.type == "insertion" || a.type == "open_loop_insert";
  if (insert_agent != (task == TaskKind::insert)) {
    throw ConfigError(where + ": agent '" + a.type + "' does not fit task '" + to_string(task) + "'");
  }
  return a;
}

}  // namespace

std::string to_string(TaskKind t) { return t == TaskKind::insert ? "insert" : "wipe"; }

std::string AgentSpec::name() const { return retarget && closed_loop() ? type + "+retarget" : type; }

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (trials < 1) fail("trials must be >= 1");
  if (!(dt > 0.0) || !(max_time > 0.0)) fail("dt and max_time must be > 0");
  if (!(hover >= 0.0) || !(tcp >= 0.0)) fail("staging.hover and grasp.tcp must be >= 0");
  if (home.size() != static_cast<Eigen::Index>(chain.dof())) fail("chain home has the wrong number of joints");
  try {
    chain.check_limits(home);
    sampler.validate();
    perception.validate();
    control.validate();
    if (!(staging.linear_speed > 0.0) || !(staging.angular_speed > 0.0)) fail("staging speeds must be > 0");
    if (!(world.joint_admittance > 0.0) || !(world.force_limit > 0.0)) fail("world admittance and force limit must be > 0");
    for (const AgentSpec* a : {&agent, baseline ? &*baseline : nullptr}) {
      if (!a) continue;
      if (a->type == "insertion") a->insertion.validate();
      if (a->type == "open_loop_insert" && (!(a->speed > 0.0) || !(a->depth > 0.0))) fail("open_loop_insert speed and depth must be > 0");
      if (a->type == "open_loop_wipe" && (!(a->press_depth >= 0.0) || !(a->hold_time >= 0.0))) fail("open_loop_wipe press_depth and hold_time must be >= 0");
      if (a->type == "wiping") {
        WipingAgentConfig c = a->wiping;
        c.path = wipe.path;
        c.validate();
      }
      const bool needs_level_board = a->type == "open_loop_wipe" || (a->type == "wiping" && !a->retarget);
      if (needs_level_board && task == TaskKind::wipe) {
        const Posed& b = wipe.scene.board;
        if ((b.rotation().matrix().col(2) - Vector3d::UnitZ()).norm() > 1e-9) {
          fail("agent '" + a->name() + "' works in world axes and needs a level board");
        }
        if (a->type == "wiping" && (b.rotation().angle() > 1e-9 || b.translation().head<2>().norm() > 1e-9)) {
          fail("wiping without retarget needs the board frame at the world x-y origin");
        }
      }
    }
    if (task == TaskKind::insert) {
      PegHoleScene s = insert.scene;
      s.peg.half_extent = sampler.peg_half_extent.lo;
      s.peg.length = sampler.peg_length.lo;
      s.validate();
      if (sampler.handle_offset.hi >= sampler.peg_length.lo) fail("sampler.handle_offset must stay below the peg length");
    } else {
      WipeScene s = wipe.scene;
      s.eraser_half_extents = {sampler.eraser_half_length.lo, sampler.eraser_half_width.lo};
      s.validate();
      wipe.path.validate();
      if (!(wipe.eraser_height > 0.0)) fail("scene.eraser_height must be > 0");
      if (!(wipe.judge.max_edge_error > 0.0) || !(wipe.judge.max_low_force_duration >= 0.0)) fail("scene.judge values are invalid");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"name", "task", "chain", "trials", "seed", "dt", "max_time", "world", "control", "staging", "grasp",
                 "scene", "sampler", "perception", "agent", "baseline", "acceptance", "output"},
             "scenario");
  const std::filesystem::path chain_ref = required<std::string>(j, "chain", "scenario");
  const std::filesystem::path chain_file = chain_ref.is_absolute() ? chain_ref : base_dir / chain_ref;
  if (!std::filesystem::exists(chain_file)) throw ConfigError("scenario.chain: file not found: " + chain_file.string());
  const Json chain_json = load_json(chain_file);
  KinematicChain chain = [&] {
    try {
      return chain_from_json(chain_json);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(chain_file.string() + ": " + e.what());
    }
  }();

  Scenario s(std::move(chain));
  s.raw = j;
  s.base_dir = base_dir;
  s.chain_file = chain_file;
  s.name = value_or<std::string>(j, "name", "scenario", "scenario");
  const auto home = value_or<std::vector<double>>(chain_json, "home", std::vector<double>(s.chain.dof(), 0.0), "chain");
  s.home = Eigen::Map<const Eigen::VectorXd>(home.data(), static_cast<Eigen::Index>(home.size()));

  const std::string task = required<std::string>(j, "task", "scenario");
  if (task == "insert") {
    s.task = TaskKind::insert;
  } else if (task == "wipe") {
    s.task = TaskKind::wipe;
  } else {
    throw ConfigError("scenario.task: expected insert or wipe");
  }
  s.trials = value_or<int>(j, "trials", s.trials, "scenario");
  s.seed = value_or<std::uint64_t>(j, "seed", s.seed, "scenario");
  read(j, "dt", s.dt, "scenario");
  read(j, "max_time", s.max_time, "scenario");
  s.world.dt = s.dt;
  s.staging.dt = s.dt;

  const Json world = section(j, "world");
  check_keys(world, {"joint_admittance", "force_limit", "gravity"}, "world");
  read(world, "joint_admittance", s.world.joint_admittance, "world");
  read(world, "force_limit", s.world.force_limit, "world");
  if (world.contains("gravity")) s.world.gravity = vector3_from_json(world["gravity"], "world.gravity");

  const Json control = section(j, "control");
  check_keys(control, {"regularization", "joint_velocity_limit"}, "control");
  read(control, "regularization", s.control.regularization, "control");
  if (control.contains("joint_velocity_limit") && !control["joint_velocity_limit"].is_null()) {
    s.control.joint_velocity_limit = required<double>(control, "joint_velocity_limit", "control");
  }
  s.staging.velocity = s.control;

  const Json staging = section(j, "staging");
  check_keys(staging, {"hover", "linear_speed", "angular_speed"}, "staging");
  read(staging, "hover", s.hover, "staging");
  read(staging, "linear_speed", s.staging.linear_speed, "staging");
  read(staging, "angular_speed", s.staging.angular_speed, "staging");

  const Json grasp = section(j, "grasp");
  check_keys(grasp, {"tcp"}, "grasp");
  read(grasp, "tcp", s.tcp, "grasp");

  const Json scene = section(j, "scene");
  if (s.task == TaskKind::insert) {
    check_keys(scene, {"hole", "shape", "sample_spacing", "ring_heights", "clearance", "chamfer_depth",
                       "chamfer_angle_deg", "stiffness", "friction", "edge_radius", "slip_velocity", "depth_target",
                       "start"},
               "scene");
    s.insert.scene = peg_scene_from_json(scene, "scene");
    if (scene.contains("start")) s.insert.start = pose_from_json(scene["start"], "scene.start");
  } else {
    check_keys(scene, {"board", "height_offset", "board_half_extents", "samples", "stiffness", "friction",
                       "slip_velocity", "shift", "shift_time", "path", "start", "eraser_height", "judge"},
               "scene");
    s.wipe.scene = wipe_scene_from_json(scene, "scene");
    if (scene.contains("start")) s.wipe.start = pose_from_json(scene["start"], "scene.start");
    read(scene, "eraser_height", s.wipe.eraser_height, "scene");
    const Json path = section(scene, "path");
    check_keys(path, {"waypoints", "speed", "start_time"}, "scene.path");
    const Json wps = required<Json>(path, "waypoints", "scene.path");
    if (!wps.is_array()) throw ConfigError("scene.path.waypoints: expected an array");
    for (std::size_t i = 0; i < wps.size(); ++i) {
      s.wipe.path.waypoints.push_back(vector2_from_json(wps[i], "scene.path.waypoints[" + std::to_string(i) + "]"));
    }
    read(path, "speed", s.wipe.path.speed, "scene.path");
    read(path, "start_time", s.wipe.path.start_time, "scene.path");
    const Json judge = section(scene, "judge");
    check_keys(judge, {"max_edge_error", "min_force", "max_low_force_duration"}, "scene.judge");
    read(judge, "max_edge_error", s.wipe.judge.max_edge_error, "scene.judge");
    read(judge, "min_force", s.wipe.judge.min_force, "scene.judge");
    read(judge, "max_low_force_duration", s.wipe.judge.max_low_force_duration, "scene.judge");
  }

  const Json sampler = section(j, "sampler");
  check_keys(sampler, {"peg_half_extent", "peg_length", "handle_offset", "grasp_yaw", "grasp_tilt",
                       "eraser_half_length", "eraser_half_width"},
             "sampler");
  auto& c = s.sampler;
  c.peg_half_extent = range_from_json(sampler.value("peg_half_extent", Json()) , c.peg_half_extent, "sampler.peg_half_extent");
  c.peg_length = range_from_json(sampler.value("peg_length", Json()) , c.peg_length, "sampler.peg_length");
  c.handle_offset = range_from_json(sampler.value("handle_offset", Json()) , c.handle_offset, "sampler.handle_offset");
  c.grasp_yaw = range_from_json(sampler.value("grasp_yaw", Json()) , c.grasp_yaw, "sampler.grasp_yaw");
  c.grasp_tilt = range_from_json(sampler.value("grasp_tilt", Json()) , c.grasp_tilt, "sampler.grasp_tilt");
  c.eraser_half_length = range_from_json(sampler.value("eraser_half_length", Json()) , c.eraser_half_length, "sampler.eraser_half_length");
  c.eraser_half_width = range_from_json(sampler.value("eraser_half_width", Json()) , c.eraser_half_width, "sampler.eraser_half_width");

  const Json perception = section(j, "perception");
  check_keys(perception, {"position_sigma", "orientation_sigma", "bias"}, "perception");
  read(perception, "position_sigma", s.perception.position_sigma, "perception");
  read(perception, "orientation_sigma", s.perception.orientation_sigma, "perception");
  if (perception.contains("bias")) {
    const Json& b = perception["bias"];
    if (!b.is_object()) throw ConfigError("perception.bias: expected {label: [x, y, z]}");
    for (const auto& [label, v] : b.items()) s.perception.bias[label] = vector3_from_json(v, "perception.bias." + label);
  }

  s.agent = agent_from_json(required<Json>(j, "agent", "scenario"), s.task, "agent");
  if (j.contains("baseline") && !j["baseline"].is_null()) s.baseline = agent_from_json(j["baseline"], s.task, "baseline");

  const Json acceptance = section(j, "acceptance");
  check_keys(acceptance, {"max_failure_rate", "baseline_min_failure_rate"}, "acceptance");
  if (acceptance.contains("max_failure_rate")) s.acceptance.max_failure_rate = required<double>(acceptance, "max_failure_rate", "acceptance");
  if (acceptance.contains("baseline_min_failure_rate")) {
    if (!s.baseline) throw ConfigError("acceptance.baseline_min_failure_rate needs a baseline agent");
    s.acceptance.baseline_min_failure_rate = required<double>(acceptance, "baseline_min_failure_rate", "acceptance");
  }

  const Json output = section(j, "output");
  check_keys(output, {"dir", "log_traces"}, "output");
  s.output_dir = value_or<std::string>(output, "dir", s.output_dir, "output");
  read(output, "log_traces", s.log_traces, "output");

  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("scenario file not found: " + path.string());
  Json doc = load_json(path);
  if (doc.is_object() && !doc.contains("name")) doc["name"] = path.stem().string();
  return scenario_from_json(doc, path.parent_path());
}

}  // namespace okp
