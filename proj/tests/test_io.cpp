#include "doctest.h"
#include "okp/io.hpp"
#include "test_support.hpp"

using namespace okp;
using namespace okp::testing;

TEST_CASE("pose records round-trip") {
  for (int i = 0; i < 50; ++i) {
    const Posed p = random_pose(2.0);
    const Json j = to_json(p);
    REQUIRE(j.size() == 7);
    const Posed back = pose_from_json(Json::parse(j.dump()));
    CHECK(pose_distance(p, back) < 1e-15);
  }
}

TEST_CASE("pose readers accept xyz/rpy and xyz/quat") {
  const Posed a = pose_from_json(Json::parse(R"({"xyz": [1, 2, 3], "rpy": [0.1, -0.2, 0.3]})"));
  CHECK(pose_distance(a, Posed(Rotationd::from_rpy(0.1, -0.2, 0.3), Vector3d(1, 2, 3))) < 1e-15);
  const Posed b = pose_from_json(Json::parse(R"({"quat": [0, 0, 0, 1]})"));
  CHECK(std::abs(b.rotation().angle() - M_PI) < 1e-12);
  CHECK_THROWS_AS(pose_from_json(Json::parse("[1, 0, 0]")), ConfigError);
  CHECK_THROWS_AS(pose_from_json(Json::parse(R"({"xyz": [1, 2]})")), ConfigError);
  CHECK_THROWS_AS(pose_from_json(Json::parse(R"({"rpy": [0, 0, 0], "quat": [1, 0, 0, 0]})")), ConfigError);
}

TEST_CASE("keypoint records carry label and parent") {
  const OrientedKeypointd k{"hole_top", random_pose(), "table"};
  const OrientedKeypointd back = keypoint_from_json(to_json(k));
  CHECK(back.label == "hole_top");
  CHECK(back.parent == "table");
  CHECK(pose_distance(back.frame, k.frame) < 1e-15);
  CHECK_THROWS_AS(keypoint_from_json(Json::parse(R"({"pose": [1, 0, 0, 0, 0, 0, 0]})")), ConfigError);
}

TEST_CASE("chain file reproduces the reference arm") {
  const KinematicChain file = load_chain(std::string(OKP_DATA_DIR) + "/chains/ur_like.json");
  const KinematicChain ref = ur_like_chain();
  REQUIRE(file.dof() == ref.dof());
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = random_configuration(ref);
    CHECK(pose_distance(gripper_pose(file, q), gripper_pose(ref, q)) < 1e-12);
    CHECK((gravity_torque(file, q, Vector3d(0, 0, -9.81)) - gravity_torque(ref, q, Vector3d(0, 0, -9.81))).norm() < 1e-9);
  }
  for (std::size_t i = 0; i < ref.dof(); ++i) {
    CHECK(file.joint(i).lower == doctest::Approx(ref.joint(i).lower));
    CHECK(file.joint(i).upper == doctest::Approx(ref.joint(i).upper));
  }
}

TEST_CASE("chain serialization round-trips") {
  for (const auto& chain : {ur_like_chain(), gantry_chain()}) {
    const KinematicChain back = chain_from_json(Json::parse(to_json(chain).dump()));
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd q = random_configuration(chain);
      CHECK(pose_distance(gripper_pose(back, q), gripper_pose(chain, q)) < 1e-14);
    }
  }
}

TEST_CASE("malformed chains are configuration errors") {
  CHECK_THROWS_AS(chain_from_json(Json::parse("{}")), ConfigError);
  CHECK_THROWS_AS(chain_from_json(Json::parse(R"({"joints": [{"axis": [0, 0, 1], "type": "ball"}]})")), ConfigError);
  CHECK_THROWS_AS(chain_from_json(Json::parse(R"({"joints": [{"axis": [0, 0, 0]}]})")), ConfigError);
  CHECK_THROWS_AS(chain_from_json(Json::parse(R"({"joints": [{"axis": [0, 0, 1], "limits": [1, -1]}]})")), ConfigError);
  CHECK_THROWS_AS(load_json("/nonexistent/chain.json"), ConfigError);
}
