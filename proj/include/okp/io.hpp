#pragma once

#include "okp/kinematics.hpp"
#include "okp/se3.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace okp {

using Json = nlohmann::json;

/// Malformed configuration: bad JSON, missing field, out-of-range value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Poses are flat records [qw, qx, qy, qz, tx, ty, tz]. Readers also accept
// {"xyz": [..], "rpy": [..]} and {"xyz": [..], "quat": [w, x, y, z]}.
Json to_json(const Posed& p);
Posed pose_from_json(const Json& j, const std::string& where = "pose");

Json to_json(const OrientedKeypointd& k);
OrientedKeypointd keypoint_from_json(const Json& j, const std::string& where = "keypoint");

Vector3d vector3_from_json(const Json& j, const std::string& where);
Json to_json(const Vector3d& v);

KinematicChain chain_from_json(const Json& j);
Json to_json(const KinematicChain& chain);
KinematicChain load_chain(const std::filesystem::path& path);

Json load_json(const std::filesystem::path& path);

/// Optional typed field with a default; throws ConfigError on a type mismatch.
template <typename T>
T value_or(const Json& j, const std::string& key, const T& fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T required(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace okp
