#include "doctest.h"
#include "okp/joint_control.hpp"
#include "okp/sim_world.hpp"
#include "test_support.hpp"

using namespace okp;
using namespace okp::testing;

namespace {

PegHoleScene peg_scene(const Posed& hole = Posed::identity()) {
  PegHoleScene s;
  s.hole = hole;
  return s;
}

OrientedKeypointd peg_at(const PegHoleScene& s, const Posed& rel) { return {"peg_end", s.hole * rel, kWorldFrame}; }

// Arm holding a peg straight down over the hole, with the peg tip at `tip`.
struct PegRig {
  KinematicChain chain = ur_like_chain();
  PegHoleScene scene;
  AttachedObject object;
  Eigen::VectorXd q;

  PegRig(const Vector3d& tip_in_hole, double stiffness = 1e4) {
    scene.hole = Posed(Rotationd::about_z(0.3), Vector3d(0.5, 0.12, 0.15));
    scene.stiffness = stiffness;
    const Posed tip = scene.hole * Posed::translation(tip_in_hole);
    const Posed grasp = Posed::translation(0, 0, 0.1) * Posed(Rotationd::about_x(M_PI));
    object = AttachedObject{grasp, {{"peg_end", Posed::translation(0, 0, -0.05), kObjectFrame}}};
    const Posed gripper = tip * Posed::translation(0, 0, 0.05) * grasp.inverse();
    const auto r = track_pose(chain, ur_home(), Posed::identity(), gripper, {}, 1e-13, 200);
    REQUIRE(r.converged);
    q = r.q;
  }
  World world(WorldConfig cfg = {}) const { return World(chain, object, scene, "peg_end", cfg, q); }
};

}  // namespace

// ---- contact geometry -----------------------------------------------------

TEST_CASE("peg far above the hole feels nothing") {
  const PegHoleScene s = peg_scene(random_pose(0.5));
  const PegContact c = contact_wrench_peg(s, peg_at(s, Posed::translation(0.002, -0.001, 0.05)));
  CHECK(c.wrench.vector().norm() == 0.0);
  CHECK(c.active_samples == 0);
  CHECK(c.depth == 0.0);
}

TEST_CASE("peg centered in the bore has zero wrench and positive depth") {
  const PegHoleScene s = peg_scene(random_pose(0.5));
  const PegContact c = contact_wrench_peg(s, peg_at(s, Posed::translation(0, 0, -0.007)));
  CHECK(c.wrench.vector().norm() == 0.0);
  CHECK(c.depth == doctest::Approx(0.007).epsilon(1e-12));
}

TEST_CASE("flat top: penetration equals depth below the surface") {
  const PegHoleScene s = peg_scene();
  const double far = s.hole_half_extent() + s.chamfer_width() + 0.01;
  for (double d : {5e-5, 2e-4, 1e-3, 3e-3}) {
    const PointContact c = hole_point_contact(s, Vector3d(far, 0.003, -d));
    CHECK(c.penetration == doctest::Approx(d).epsilon(1e-12));
    CHECK((c.normal - Vector3d::UnitZ()).norm() < 1e-12);
  }
  CHECK(hole_point_contact(s, Vector3d(far, 0, 1e-4)).penetration == 0.0);
}

TEST_CASE("peg resting on the top face: force is samples times k delta") {
  const PegHoleScene s = peg_scene(random_pose(0.3));
  const double delta = 4e-4;
  const Posed rel = Posed::translation(0.03, -0.02, -delta);
  const PegContact c = contact_wrench_peg(s, peg_at(s, rel));
  int bottom = 0;
  for (const auto& p : s.peg.samples()) bottom += p.z() == 0.0 ? 1 : 0;
  CHECK(c.active_samples == bottom);
  const Vector3d f_hole = s.hole.rotation().inverse() * c.wrench.force;
  CHECK((f_hole - Vector3d(0, 0, bottom * s.stiffness * delta)).norm() < 1e-9);
  CHECK(c.wrench.torque.norm() < 1e-12);
  CHECK(c.wrench.expressed_at == at_keypoint("peg_end"));
  CHECK(c.depth == 0.0);
}

TEST_CASE("bore wall pushes back along the lateral axis") {
  const PegHoleScene s = peg_scene();
  const double a = s.hole_half_extent();
  const PointContact c = hole_point_contact(s, Vector3d(a + 1e-4, 0.0, -0.006));
  CHECK(c.penetration == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK((c.normal - Vector3d(-1, 0, 0)).norm() < 1e-12);
  CHECK(hole_point_contact(s, Vector3d(a - 1e-4, 0.0, -0.006)).penetration == 0.0);
}

TEST_CASE("chamfer normal points up and toward the hole axis") {
  const PegHoleScene s = peg_scene();
  const double a = s.hole_half_extent(), w = s.chamfer_width(), h = s.chamfer_depth;
  for (double ang : {0.0, M_PI / 2, M_PI, -M_PI / 2}) {
    const Vector3d dir(std::cos(ang), std::sin(ang), 0.0);
    const Vector3d p = (a + 0.5 * w) * dir + Vector3d(0, 0, -0.5 * h - 1e-4);
    const PointContact c = hole_point_contact(s, p);
    REQUIRE(c.penetration > 0.0);
    CHECK(c.normal.dot(dir) < -0.5);
    CHECK(c.normal.z() > 0.5);
    const Vector3d expected = (Vector3d(0, 0, 1) - (h / w) * dir).normalized();
    CHECK((c.normal - expected).norm() < 1e-12);
  }
}

TEST_CASE("penetration is 1-Lipschitz along random segments") {
  const PegHoleScene s = peg_scene();
  for (int trial = 0; trial < 40; ++trial) {
    const Vector3d a = random_vector(0.008), b = random_vector(0.008);
    double prev = hole_point_contact(s, a).penetration;
    const int n = 2000;
    for (int i = 1; i <= n; ++i) {
      const Vector3d p = a + (b - a) * (static_cast<double>(i) / n);
      const double pen = hole_point_contact(s, p).penetration;
      CHECK(std::abs(pen - prev) <= (b - a).norm() / n * (1 + 1e-9) + 1e-15);
      prev = pen;
    }
  }
}

TEST_CASE("normal contact force is conservative around closed loops") {
  PegHoleScene s = peg_scene(random_pose(0.2));
  s.friction = 0.0;
  const double a = s.hole_half_extent();
  for (const Vector3d& c0 : {Vector3d(a + 0.002, 0.0, -0.0002), Vector3d(a - 0.004, 0.001, -0.001),
                             Vector3d(0.02, 0.01, -0.0003)}) {
    const int n = 4000;
    double work = 0.0, gross = 0.0;
    auto at = [&](int i) -> Vector3d {
      const double t = 2 * M_PI * i / n;
      return c0 + Vector3d(0.0015 * std::cos(t), 0.0008 * std::sin(t), 0.0006 * std::sin(t));
    };
    auto force = [&](const Vector3d& p) -> Vector3d {
      return Vector3d(s.hole.rotation().inverse() * contact_wrench_peg(s, peg_at(s, Posed::translation(p))).wrench.force);
    };
    for (int i = 0; i < n; ++i) {
      const Vector3d p0 = at(i), p1 = at(i + 1);
      const double dw = 0.5 * (force(p0) + force(p1)).dot(p1 - p0);
      work += dw;
      gross += std::abs(dw);
    }
    REQUIRE(gross > 0.0);
    CHECK(std::abs(work) < 1e-3 * gross);
  }
}

TEST_CASE("friction only removes energy") {
  const PegHoleScene s = peg_scene(random_pose(0.3));
  for (int i = 0; i < 200; ++i) {
    const Posed rel(Rotationd::from_rotation_vector(random_vector(0.05)),
                    Vector3d(uniform(-0.003, 0.003), uniform(-0.003, 0.003), uniform(-0.002, 0.0005)));
    const OrientedKeypointd kp = peg_at(s, rel);
    const Twistd tw{random_vector(0.2), random_vector(0.01), at_keypoint("peg_end")};
    PegHoleScene frictionless = s;
    frictionless.friction = 0.0;
    const Wrenchd total = contact_wrench_peg(s, kp, tw).wrench;
    const Wrenchd normal = contact_wrench_peg(frictionless, kp, tw).wrench;
    const Vector6d friction = total.vector() - normal.vector();
    CHECK(friction.dot(tw.vector()) <= 1e-12);
  }
}

TEST_CASE("contact is equivariant under moving the whole scene") {
  const PegHoleScene s = peg_scene(random_pose(0.2));
  for (int i = 0; i < 50; ++i) {
    const Posed g = random_pose(0.5);
    PegHoleScene moved = s;
    moved.hole = g * s.hole;
    const Posed rel(Rotationd::from_rotation_vector(random_vector(0.1)),
                    Vector3d(uniform(-0.004, 0.004), uniform(-0.004, 0.004), uniform(-0.003, 0.001)));
    const Twistd tw{random_vector(0.1), random_vector(0.01), at_keypoint("peg_end")};
    const PegContact c0 = contact_wrench_peg(s, peg_at(s, rel), tw);
    const PegContact c1 = contact_wrench_peg(moved, peg_at(moved, rel), rotate(g.rotation(), tw));
    CHECK((rotate(g.rotation(), c0.wrench).vector() - c1.wrench.vector()).norm() < 1e-9 * (1 + c0.wrench.vector().norm()));
    CHECK(c0.depth == doctest::Approx(c1.depth).epsilon(1e-9));
  }
}

TEST_CASE("scene validation rejects bad geometry") {
  PegHoleScene s;
  s.clearance = -1e-4;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = PegHoleScene{};
  s.edge_radius = s.chamfer_depth;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = PegHoleScene{};
  s.depth_target = 1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = PegHoleScene{};
  s.chamfer_depth = 0.0;
  CHECK_NOTHROW(s.validate());
}

// ---- wiping contact -------------------------------------------------------

TEST_CASE("eraser pressed 1 mm into the board feels 10 N") {
  WipeScene s;
  s.board = Posed(Rotationd::about_y(0.2), Vector3d(0.4, 0.0, 0.1));
  const OrientedKeypointd center{"center", s.board * Posed(Rotationd::about_x(M_PI), Vector3d(0.05, 0.02, -1e-3)), kWorldFrame};
  const WipeContact c = contact_wrench_wipe(s, center);
  CHECK(c.normal_force == doctest::Approx(10.0).epsilon(1e-12));
  CHECK((c.wrench.force - s.board.rotation() * Vector3d(0, 0, 10.0)).norm() < 1e-12);
  CHECK(c.wrench.torque.norm() < 1e-12);

  const Twistd slide{Vector3d::Zero(), s.board.rotation() * Vector3d(0.05, 0, 0), at_keypoint("center")};
  const WipeContact f = contact_wrench_wipe(s, center, 0.0, slide);
  const Vector3d fb = s.board.rotation().inverse() * f.wrench.force;
  CHECK(fb.x() == doctest::Approx(-0.3 * 10.0).epsilon(1e-12));
  CHECK(std::abs(fb.y()) < 1e-12);
}

TEST_CASE("board shift moves the surface from shift_time on") {
  WipeScene s;
  s.shift = -0.002;
  s.shift_time = 1.0;
  const OrientedKeypointd center{"center", Posed(Rotationd::about_x(M_PI), Vector3d(0, 0, -1e-3)), kWorldFrame};
  CHECK(contact_wrench_wipe(s, center, 0.5).normal_force == doctest::Approx(10.0));
  CHECK(contact_wrench_wipe(s, center, 1.5).normal_force == 0.0);
  CHECK(s.surface_height(2.0) == doctest::Approx(-0.002));
}

TEST_CASE("eraser off the board edge loses contact") {
  WipeScene s;
  const OrientedKeypointd center{"center", Posed(Rotationd::about_x(M_PI), Vector3d(0.5, 0, -1e-3)), kWorldFrame};
  CHECK(contact_wrench_wipe(s, center).active_samples == 0);
}

// ---- perception and sampling ----------------------------------------------

TEST_CASE("zero-noise perception is exact") {
  Rng rng(3);
  PerceptionModel m;
  m.position_sigma = 0.0;
  const std::vector<OrientedKeypointd> truth{{"a", random_pose(), kWorldFrame}, {"b", random_pose(), kWorldFrame}};
  const auto seen = perceive(truth, m, rng);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    CHECK(seen[i].label == truth[i].label);
    CHECK(pose_distance(seen[i].frame, truth[i].frame) == 0.0);
  }
}

TEST_CASE("perception noise has the configured spread") {
  Rng rng(11);
  PerceptionModel m;
  m.position_sigma = 0.002;
  m.orientation_sigma = 0.01;
  const std::vector<OrientedKeypointd> truth{{"k", Posed::identity(), kWorldFrame}};
  const int n = 10000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero(), rsq = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto s = perceive(truth, m, rng).front();
    sum += s.frame.translation();
    sq += s.frame.translation().cwiseAbs2();
    rsq += s.frame.rotation().log().cwiseAbs2();
  }
  for (int a = 0; a < 3; ++a) {
    const double sd = std::sqrt(sq[a] / n - std::pow(sum[a] / n, 2));
    CHECK(sd == doctest::Approx(0.002).epsilon(0.05));
    CHECK(std::sqrt(rsq[a] / n) == doctest::Approx(0.01).epsilon(0.05));
  }
}

TEST_CASE("perception bias is applied in the keypoint's own axes") {
  Rng rng(1);
  PerceptionModel m;
  m.position_sigma = 0.0;
  m.bias["hole_top"] = Vector3d(0.001, 0, 0);
  const Posed frame(Rotationd::about_z(M_PI / 2), Vector3d(1, 2, 3));
  const auto seen = perceive({{"hole_top", frame, kWorldFrame}, {"other", frame, kWorldFrame}}, m, rng);
  CHECK((seen[0].frame.translation() - Vector3d(1, 2.001, 3)).norm() < 1e-15);
  CHECK(seen[1].frame.translation() == frame.translation());
}

TEST_CASE("perception is a function of the seed") {
  PerceptionModel m;
  const std::vector<OrientedKeypointd> truth{{"a", random_pose(), kWorldFrame}, {"b", random_pose(), kWorldFrame}};
  Rng r1(99), r2(99), r3(100);
  const auto a = perceive(truth, m, r1), b = perceive(truth, m, r2), c = perceive(truth, m, r3);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    CHECK(a[i].frame.translation() == b[i].frame.translation());
    CHECK(a[i].frame.rotation().quaternion().coeffs() == b[i].frame.rotation().quaternion().coeffs());
    CHECK(a[i].frame.translation() != c[i].frame.translation());
  }
}

TEST_CASE("category sampler stays in range and consumes fixed draws") {
  CategorySampler s;
  s.peg_half_extent = {0.004, 0.006};
  s.grasp_yaw = {-1, 1};
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const PegInstance p = sample_peg(s, rng);
    CHECK(p.half_extent >= 0.004);
    CHECK(p.half_extent <= 0.006);
    CHECK(p.length == 0.05);
    CHECK(std::abs(p.grasp_yaw) <= 1.0);
  }
  Rng a(8), b(8);
  sample_peg(CategorySampler{}, a);
  sample_peg(s, b);
  CHECK(a() == b());
  s.peg_length = {0.05, 0.01};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

// ---- world ----------------------------------------------------------------

TEST_CASE("world velocity step integrates q exactly") {
  const PegRig rig(Vector3d(0, 0, 0.03));
  World w = rig.world();
  const Eigen::VectorXd q0 = w.q();
  CHECK(w.step(JointVelocityCommand{Eigen::VectorXd::Zero(6)}) == WorldFlag::none);
  CHECK(w.q() == q0);
  Eigen::VectorXd qdot(6);
  qdot << 0.1, -0.2, 0.05, 0.3, -0.1, 0.2;
  w.step(JointVelocityCommand{qdot});
  CHECK((w.q() - (q0 + qdot * 1e-3)).norm() < 1e-15);
  CHECK(w.time() == doctest::Approx(2e-3));
}

TEST_CASE("free descent of the peg reaches the bore without contact") {
  const PegRig rig(Vector3d(0, 0, 0.02));
  World w = rig.world();
  const Posed tool = rig.object.gripper_to_keypoint("peg_end");
  const Twistd down{Vector3d::Zero(), rig.scene.hole.rotation() * Vector3d(0, 0, -0.01), at_keypoint("peg_end")};
  for (int i = 0; i < 2500; ++i) {
    const Posed target = displace(w.keypoint("peg_end").frame, down, 1e-3);
    const auto r = track_pose(w.chain(), w.q(), tool, target, {});
    REQUIRE(w.step(JointVelocityCommand{(r.q - w.q()) / 1e-3}) == WorldFlag::none);
    CHECK(w.contact().wrench.vector().norm() == 0.0);
  }
  CHECK(w.contact().depth == doctest::Approx(0.005).epsilon(1e-6));
}

TEST_CASE("torque mode holds still when gravity is cancelled") {
  const PegRig rig(Vector3d(0, 0, 0.03));
  World w = rig.world();
  const Eigen::VectorXd q0 = w.q();
  for (int i = 0; i < 100; ++i) w.step(JointTorqueCommand{gravity_torque(w.chain(), w.q(), w.config().gravity)});
  CHECK((w.q() - q0).norm() < 1e-12);
  World sag = rig.world();
  for (int i = 0; i < 100; ++i) sag.step(JointTorqueCommand{Eigen::VectorXd::Zero(6)});
  CHECK((sag.q() - q0).norm() > 1e-4);
}

TEST_CASE("torque mode settles where the contact balances the commanded force") {
  PegRig rig(Vector3d(0.03, 0.0, 0.0005), 20.0);
  rig.scene.peg.ring_heights = {0.0};
  rig.scene.friction = 0.0;
  World w = rig.world();
  const Wrenchd push{Vector3d::Zero(), rig.scene.hole.rotation() * Vector3d(0, 0, -2.0), at_keypoint("peg_end")};
  for (int i = 0; i < 20000; ++i) {
    const KeypointJacobian j = keypoint_jacobian(w.chain(), w.q(), w.object(), "peg_end");
    w.step(JointTorqueCommand{resolve_force(j, push, gravity_torque(w.chain(), w.q(), w.config().gravity))});
  }
  REQUIRE(w.flag() == WorldFlag::none);
  CHECK((w.contact().wrench.force + push.force).norm() < 1e-3);
}

TEST_CASE("wrist reading and joint torques describe the same contact") {
  const PegRig rig(Vector3d(0.0035, 0.001, -0.003));
  const World w = rig.world();
  REQUIRE(w.contact().wrench.force.norm() > 0.1);
  const KeypointJacobian j = keypoint_jacobian(w.chain(), w.q(), w.object(), "peg_end");
  const Wrenchd est = estimate_keypoint_wrench(j, w.external_torque());
  CHECK((est.vector() - w.contact().wrench.vector()).norm() < 1e-9 * w.contact().wrench.vector().norm());
  const Posed kp = Posed::translation(w.keypoint("peg_end").position());
  const Wrenchd back = virtual_sensor(w.wrist_measurement(), kp.inverse() * gripper_pose(w.chain(), w.q()), at_keypoint("peg_end"));
  CHECK((back.vector() - w.contact().wrench.vector()).norm() < 1e-10 * (1 + w.contact().wrench.vector().norm()));
}

TEST_CASE("world flags force limit, joint limit and non-finite commands") {
  {
    const PegRig rig(Vector3d(0.03, 0, 0.001));
    World w = rig.world();
    const Posed tool = rig.object.gripper_to_keypoint("peg_end");
    const Twistd down{Vector3d::Zero(), rig.scene.hole.rotation() * Vector3d(0, 0, -0.05), at_keypoint("peg_end")};
    WorldFlag f = WorldFlag::none;
    for (int i = 0; i < 200 && f == WorldFlag::none; ++i) {
      const auto r = track_pose(w.chain(), w.q(), tool, displace(w.keypoint("peg_end").frame, down, 1e-3), {});
      f = w.step(JointVelocityCommand{(r.q - w.q()) / 1e-3});
    }
    CHECK(f == WorldFlag::force_limit);
    CHECK(w.flag() == WorldFlag::force_limit);
  }
  {
    const PegRig rig(Vector3d(0, 0, 0.05));
    World w = rig.world();
    Eigen::VectorXd qdot = Eigen::VectorXd::Zero(6);
    qdot[2] = 3000.0;
    CHECK(w.step(JointVelocityCommand{qdot}) == WorldFlag::joint_limit);
    CHECK(w.step(JointVelocityCommand{Eigen::VectorXd::Constant(6, NAN)}) == WorldFlag::non_finite);
    CHECK(w.flag() == WorldFlag::joint_limit);
  }
}

// ---- judges ---------------------------------------------------------------

TEST_CASE("wipe judge checks edge error and sustained contact") {
  WipeTrace t;
  t.waypoints = {{0, 0}, {0.1, 0}};
  t.waypoint_times = {1.0, 3.0};
  t.wipe_start = 1.0;
  t.wipe_end = 3.0;
  for (int i = 0; i <= 400; ++i) {
    const double time = i * 0.01;
    const double x = std::clamp((time - 1.0) * 0.05, 0.0, 0.1);
    t.samples.push_back({time, {x + 0.01, 0.0}, 10.0});
  }
  WipeVerdict v = judge_wipe(t);
  CHECK(v.pass);
  CHECK(v.max_edge_error == doctest::Approx(0.01));

  WipeTrace far = t;
  for (auto& s : far.samples) s.front.y() += 0.025;
  CHECK_FALSE(judge_wipe(far).pass);

  WipeTrace lift = t;
  for (auto& s : lift.samples) {
    if (s.time > 2.0 && s.time < 2.1) s.normal_force = 1.0;
  }
  v = judge_wipe(lift);
  CHECK_FALSE(v.pass);
  CHECK(v.longest_low_force == doctest::Approx(0.08).epsilon(0.2));

  WipeTrace blip = t;
  for (auto& s : blip.samples) {
    if (s.time > 2.0 && s.time < 2.02) s.normal_force = 1.0;
  }
  CHECK(judge_wipe(blip).pass);
}

TEST_CASE("insert judge compares the final depth with the target") {
  InsertTrace t;
  t.depth_target = 0.01;
  CHECK_FALSE(judge_insert(t).pass);
  t.samples = {{0.0, 0.0}, {1.0, 0.0105}};
  CHECK(judge_insert(t).pass);
  t.samples.push_back({2.0, 0.0099});
  CHECK_FALSE(judge_insert(t).pass);
  CHECK(judge_insert(t).final_depth == doctest::Approx(0.0099));
}
