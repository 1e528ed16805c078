#include "doctest.h"
#include "okp/joint_control.hpp"
#include "test_support.hpp"

using namespace okp;
using namespace okp::testing;

namespace {

Matrix6Xd random_jacobian(Eigen::Index n) {
  Matrix6Xd j(6, n);
  for (Eigen::Index c = 0; c < n; ++c) j.col(c) = random_vector6();
  return j;
}

VelocityResolutionConfig with_lambda(double lambda) {
  VelocityResolutionConfig cfg;
  cfg.regularization = lambda;
  return cfg;
}

}  // namespace

TEST_CASE("resolve_velocity closed forms") {
  const Matrix6Xd eye = Matrix6Xd::Identity(6, 6);
  const Vector6d v = random_vector6();
  CHECK((resolve_velocity(eye, v, with_lambda(0.0)) - v).norm() < 1e-14);
  CHECK((resolve_velocity(eye, v, with_lambda(1.0)) - v / 2).norm() < 1e-14);
}

TEST_CASE("resolve_velocity on rank-deficient Jacobians matches the SVD pseudo-inverse") {
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = i % 2 ? 6 : 7;
    const Matrix6Xd j = random_rank_deficient(6, n, 4);
    const Vector6d v = random_vector6();
    const Eigen::VectorXd oracle = svd_pinv(j) * v;
    CHECK((resolve_velocity(j, v, with_lambda(0.0)) - oracle).norm() < 1e-8);
  }
}

TEST_CASE("damped solution satisfies the normal equations") {
  for (int i = 0; i < 100; ++i) {
    const Matrix6Xd j = random_jacobian(6 + i % 2);
    const Vector6d v = random_vector6();
    VelocityResolutionConfig cfg = with_lambda(0.05);
    cfg.task_weights << 1, 2, 0.5, 1, 3, 1;
    const Eigen::VectorXd q = resolve_velocity(j, v, cfg);
    const Eigen::VectorXd grad =
        j.transpose() * cfg.task_weights.asDiagonal() * (j * q - v) + cfg.regularization * q;
    CHECK(grad.norm() < 1e-10);
    // positively homogeneous
    CHECK((resolve_velocity(j, 3.5 * v, cfg) - 3.5 * q).norm() < 1e-10);
  }
}

TEST_CASE("velocity limit scales the whole vector") {
  const Matrix6Xd eye = Matrix6Xd::Identity(6, 6);
  Vector6d v;
  v << 0.1, -0.4, 2.0, 0.0, 0.5, -1.0;
  VelocityResolutionConfig cfg = with_lambda(0.0);
  cfg.joint_velocity_limit = 1.0;
  const Eigen::VectorXd q = resolve_velocity(eye, v, cfg);
  CHECK(q.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  CHECK((q - v / 2.0).norm() < 1e-14);
}

TEST_CASE("resolve_velocity rejects bad input") {
  const Matrix6Xd eye = Matrix6Xd::Identity(6, 6);
  Vector6d v = Vector6d::Zero();
  v[2] = std::nan("");
  CHECK_THROWS_AS(resolve_velocity(eye, v, VelocityResolutionConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(resolve_velocity(eye, Vector6d::Zero(), with_lambda(-1.0)), std::invalid_argument);

  const KeypointJacobian kj{eye, at_keypoint("peg_end")};
  CHECK_THROWS_AS(resolve_velocity(kj, Twistd::zero(at_keypoint("hole_top")), VelocityResolutionConfig{}),
                  FrameMismatch);
  CHECK_NOTHROW(resolve_velocity(kj, Twistd::zero(at_keypoint("peg_end")), VelocityResolutionConfig{}));
}

TEST_CASE("resolve_force") {
  const Matrix6Xd j = random_jacobian(6);
  const Eigen::VectorXd g = Eigen::VectorXd::Random(6);
  CHECK((resolve_force(j, Vector6d::Zero(), g) - g).norm() == 0.0);
  const Vector6d f = random_vector6();
  CHECK((resolve_force(Matrix6Xd::Identity(6, 6), f, Eigen::VectorXd::Zero(6)) - f).norm() == 0.0);
  for (int i = 0; i < 100; ++i) {
    const Matrix6Xd ji = random_jacobian(7);
    const Vector6d fi = random_vector6(10);
    const Eigen::VectorXd gi = Eigen::VectorXd::Random(7);
    Eigen::VectorXd oracle(7);
    for (int c = 0; c < 7; ++c) {
      double s = gi[c];
      for (int r = 0; r < 6; ++r) s += ji(r, c) * fi[r];
      oracle[c] = s;
    }
    CHECK((resolve_force(ji, fi, gi) - oracle).norm() < 1e-12);
  }
  CHECK_THROWS_AS(resolve_force(j, f, Eigen::VectorXd::Zero(5)), std::invalid_argument);
  const KeypointJacobian kj{j, at_keypoint("a")};
  CHECK_THROWS_AS(resolve_force(kj, Wrenchd::zero("b"), g), FrameMismatch);
}

TEST_CASE("estimate_keypoint_wrench") {
  for (int i = 0; i < 100; ++i) {
    const Matrix6Xd j = random_jacobian(6 + i % 2);
    const Vector6d f = random_vector6(10);
    const Eigen::VectorXd tau = j.transpose() * f;
    const Wrenchd est = estimate_keypoint_wrench(j, tau, "peg_end");
    CHECK((est.vector() - f).norm() < 1e-8);
    // round trip through resolve_force with g = 0
    CHECK((resolve_force(j, est.vector(), Eigen::VectorXd::Zero(j.cols())) - tau).norm() < 1e-8);
  }
  const Matrix6Xd j = random_jacobian(6);
  CHECK(estimate_keypoint_wrench(j, Eigen::VectorXd::Zero(6), "x").vector().norm() == 0.0);

  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = i % 2 ? 6 : 7;
    const Matrix6Xd jr = random_rank_deficient(6, n, 3 + i % 3);
    Eigen::VectorXd tau(n);
    for (Eigen::Index k = 0; k < n; ++k) tau[k] = uniform(-5, 5);
    const Eigen::VectorXd oracle = svd_pinv(jr.transpose()) * tau;
    CHECK((estimate_keypoint_wrench(jr, tau, "x").vector() - oracle).norm() < 1e-8);
  }

  Eigen::VectorXd bad = Eigen::VectorXd::Zero(6);
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(estimate_keypoint_wrench(j, bad, "x"), std::invalid_argument);
}

TEST_CASE("virtual sensor") {
  const Wrenchd w{random_vector(), random_vector(), "wrist"};
  CHECK(virtual_sensor(w, Posed::identity(), "peg_end").vector() == w.vector());

  // a force acting exactly at the keypoint leaves no torque there, whatever the grasp
  for (int i = 0; i < 20; ++i) {
    const Posed world_wrist = random_pose();
    const Posed world_kp = random_pose();
    const Wrenchd contact_at_kp{Vector3d::Zero(), random_vector(10), "peg_end"};
    const Wrenchd at_wrist = transform_wrench(world_wrist.inverse() * world_kp, contact_at_kp, "wrist");
    const Wrenchd back = virtual_sensor(at_wrist, world_kp.inverse() * world_wrist, "peg_end");
    CHECK(back.torque.norm() < 1e-12);
    CHECK((back.force - contact_at_kp.force).norm() < 1e-12);
  }
}

TEST_CASE("virtual sensor is independent of the grasp for a fixed contact") {
  // one physical contact at the keypoint; two different grippers hold the object
  const Posed world_kp = random_pose();
  const Vector3d contact_point = world_kp * Vector3d(0.004, -0.002, 0.001);
  const Vector3d contact_force = random_vector(10);
  auto observe = [&](const Posed& world_wrist) {
    // wrench seen by a wrist sensor: force at the contact point, moment about the wrist, wrist axes
    const Vector3d r = world_wrist.inverse() * contact_point;
    const Vector3d f = world_wrist.rotation().inverse() * contact_force;
    const Wrenchd wrist{r.cross(f), f, "wrist"};
    return virtual_sensor(wrist, world_kp.inverse() * world_wrist, "peg_end");
  };
  for (int i = 0; i < 50; ++i) {
    const Wrenchd a = observe(world_kp * random_pose(0.3));
    const Wrenchd b = observe(world_kp * random_pose(0.3));
    CHECK((a.vector() - b.vector()).norm() < 1e-10);
  }
}

TEST_CASE("track_pose lands the tool on the target") {
  const KinematicChain chain = ur_like_chain();
  const Eigen::VectorXd q0 = ur_home();
  const Posed offset = Posed(Rotationd::about_x(M_PI), Vector3d(0, 0, 0.1));
  const Posed start = tool_pose(chain, q0, offset);
  const Posed target = Posed(Rotationd::about_y(0.05), Vector3d(0.01, -0.02, -0.05)) * start;
  const PoseTrackingResult r = track_pose(chain, q0, offset, target, VelocityResolutionConfig{});
  CHECK(r.converged);
  CHECK(pose_distance(tool_pose(chain, r.q, offset), target) < 1e-11);

  const PoseTrackingResult none = track_pose(chain, q0, offset, start, VelocityResolutionConfig{});
  CHECK(none.iterations == 0);
  CHECK(none.q == q0);
}
