#include "okp/io.hpp"

#include <fstream>

namespace okp {

Json to_json(const Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vector3d vector3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of 3 numbers");
  Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  if (!v.allFinite()) throw ConfigError(where + ": non-finite value");
  return v;
}

Json to_json(const Posed& p) {
  const auto& q = p.rotation().quaternion();
  const Vector3d& t = p.translation();
  return Json::array({q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()});
}

Posed pose_from_json(const Json& j, const std::string& where) {
  if (j.is_array()) {
    if (j.size() != 7) throw ConfigError(where + ": a flat pose has 7 numbers [qw qx qy qz tx ty tz]");
    double v[7];
    for (int i = 0; i < 7; ++i) {
      if (!j[i].is_number()) throw ConfigError(where + ": pose entries must be numbers");
      v[i] = j[i].get<double>();
    }
    try {
      return Posed(Rotationd(v[0], v[1], v[2], v[3]), Vector3d(v[4], v[5], v[6]));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (!j.is_object()) throw ConfigError(where + ": expected a pose");
  const Vector3d xyz = j.contains("xyz") ? vector3_from_json(j["xyz"], where + ".xyz") : Vector3d::Zero();
  if (j.contains("rpy") && j.contains("quat")) throw ConfigError(where + ": give either rpy or quat, not both");
  if (j.contains("rpy")) {
    const Vector3d rpy = vector3_from_json(j["rpy"], where + ".rpy");
    return Posed(Rotationd::from_rpy(rpy.x(), rpy.y(), rpy.z()), xyz);
  }
  if (j.contains("quat")) {
    const Json& q = j["quat"];
    if (!q.is_array() || q.size() != 4) throw ConfigError(where + ".quat: expected [w, x, y, z]");
    try {
      return Posed(Rotationd(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()), xyz);
    } catch (const std::exception& e) {
      throw ConfigError(where + ".quat: " + e.what());
    }
  }
  return Posed::translation(xyz);
}

Json to_json(const OrientedKeypointd& k) { return Json{{"label", k.label}, {"parent", k.parent}, {"pose", to_json(k.frame)}}; }

OrientedKeypointd keypoint_from_json(const Json& j, const std::string& where) {
  OrientedKeypointd k;
  k.label = required<std::string>(j, "label", where);
  k.parent = value_or<std::string>(j, "parent", kWorldFrame, where);
  k.frame = pose_from_json(required<Json>(j, "pose", where), where + ".pose");
  return k;
}

KinematicChain chain_from_json(const Json& j) {
  const std::string where = "chain";
  const Json joints = required<Json>(j, "joints", where);
  if (!joints.is_array()) throw ConfigError("chain.joints: expected an array");
  std::vector<JointModel> models;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const Json& jj = joints[i];
    const std::string w = "chain.joints[" + std::to_string(i) + "]";
    JointModel m;
    m.name = value_or<std::string>(jj, "name", "joint" + std::to_string(i), w);
    const std::string kind = value_or<std::string>(jj, "type", "revolute", w);
    if (kind == "revolute") {
      m.kind = JointKind::revolute;
    } else if (kind == "prismatic") {
      m.kind = JointKind::prismatic;
    } else {
      throw ConfigError(w + ".type: expected revolute or prismatic, got '" + kind + "'");
    }
    m.axis = vector3_from_json(required<Json>(jj, "axis", w), w + ".axis");
    m.origin = jj.contains("origin") ? pose_from_json(jj["origin"], w + ".origin") : Posed::identity();
    if (jj.contains("limits")) {
      const Json& lim = jj["limits"];
      if (!lim.is_array() || lim.size() != 2) throw ConfigError(w + ".limits: expected [lower, upper]");
      m.lower = lim[0].get<double>();
      m.upper = lim[1].get<double>();
    }
    m.mass = value_or<double>(jj, "mass", 0.0, w);
    m.com = jj.contains("com") ? vector3_from_json(jj["com"], w + ".com") : Vector3d::Zero();
    models.push_back(std::move(m));
  }
  const Posed base = j.contains("base") ? pose_from_json(j["base"], "chain.base") : Posed::identity();
  const Posed ee = j.contains("end_effector") ? pose_from_json(j["end_effector"], "chain.end_effector") : Posed::identity();
  try {
    return KinematicChain(std::move(models), base, ee, value_or<std::string>(j, "name", "chain", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("chain: ") + e.what());
  }
}

Json to_json(const KinematicChain& chain) {
  Json joints = Json::array();
  for (const auto& m : chain.joints()) {
    joints.push_back(Json{{"name", m.name},
                          {"type", m.kind == JointKind::revolute ? "revolute" : "prismatic"},
                          {"axis", to_json(m.axis)},
                          {"origin", to_json(m.origin)},
                          {"limits", Json::array({m.lower, m.upper})},
                          {"mass", m.mass},
                          {"com", to_json(m.com)}});
  }
  return Json{{"name", chain.name()},
              {"base", to_json(chain.base())},
              {"end_effector", to_json(chain.end_effector_offset())},
              {"joints", joints}};
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

KinematicChain load_chain(const std::filesystem::path& path) {
  return chain_from_json(load_json(path));
}

}  // namespace okp
