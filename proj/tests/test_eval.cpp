#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "semslam/errors.hpp"
#include "semslam/eval/trajectory.hpp"
#include "support.hpp"

using namespace semslam;
using testing::Rng;
using testing::uniform;

namespace {

Trajectory random_trajectory(Rng& rng, int n) {
  std::vector<std::pair<int, Pose>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, testing::random_pose(rng, 3.0));
  return Trajectory(e);
}

Trajectory transformed(const Trajectory& t, const Similarity& s) {
  std::vector<std::pair<int, Pose>> e;
  for (const auto& [id, p] : t.entries()) e.emplace_back(id, Pose(s.pose.rotation() * p.rotation(), s * p.translation()));
  return Trajectory(e);
}

Trajectory perturbed(const Trajectory& t, Rng& rng, double sigma) {
  std::vector<std::pair<int, Pose>> e;
  for (const auto& [id, p] : t.entries()) e.emplace_back(id, Pose(p.rotation(), p.translation() + testing::uniform3(rng, -sigma, sigma)));
  return Trajectory(e);
}

}  // namespace

TEST_CASE("trajectory validation") {
  CHECK_THROWS_AS(Trajectory({{1, Pose()}, {1, Pose()}}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory({{2, Pose()}, {1, Pose()}}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory({{0, Pose(2.0 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero())}}),
                  std::invalid_argument);
}

TEST_CASE("horn_align recovers known similarities") {
  Rng rng(1);
  const Trajectory gt = random_trajectory(rng, 10);
  Similarity id = horn_align(gt, gt);
  CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.pose.translation().norm() < 1e-9);

  for (int trial = 0; trial < 20; ++trial) {
    Similarity s;
    s.scale = uniform(rng, 0.2, 5.0);
    s.pose = testing::random_pose(rng, 5.0);
    const Trajectory est = transformed(gt, s);
    const Similarity back = horn_align(est, gt);
    CHECK(std::abs(back.scale - 1.0 / s.scale) < 1e-9);
    const Eigen::Matrix3d r_inv = s.pose.rotation().transpose();
    CHECK((back.pose.rotation() - r_inv).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((back.pose.translation() - (-(r_inv * s.pose.translation()) / s.scale)).norm() < 1e-9);
    CHECK(ate_rmse(est, gt) < 1e-9);
  }
}

TEST_CASE("horn_align beats random similarity candidates") {
  Rng rng(2);
  const Trajectory gt = random_trajectory(rng, 15);
  const Trajectory est = perturbed(gt, rng, 0.3);
  const Similarity best = horn_align(est, gt);
  const double best_rmse = position_rmse(est, gt, best);
  int better = 0;
  for (int i = 0; i < 10000; ++i) {
    Similarity c = best;
    const double step = std::pow(10.0, uniform(rng, -4, 0));
    c.scale *= std::exp(step * uniform(rng, -1, 1));
    Vector6d d;
    for (int k = 0; k < 6; ++k) d(k) = step * uniform(rng, -1, 1);
    c.pose = pose_retract(best.pose, d);
    if (position_rmse(est, gt, c) < best_rmse - 1e-12) ++better;
  }
  CHECK(better == 0);
}

TEST_CASE("ate_rmse examples") {
  Rng rng(3);
  const Trajectory gt = random_trajectory(rng, 8);
  CHECK(ate_rmse(gt, gt) == 0.0);
  Similarity shift;
  shift.pose = Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0));
  CHECK(ate_rmse(transformed(gt, shift), gt) < 1e-12);

  // Residuals 0, 0.3 and 0.4 m under the identity alignment.
  const Trajectory g3({{0, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 0))},
                       {1, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0))},
                       {2, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 1, 0))}});
  const Trajectory e3({{0, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 0))},
                       {1, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0.3))},
                       {2, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 1, 0.4))}});
  CHECK(std::abs(position_rmse(e3, g3, Similarity{}) - std::sqrt(0.25 / 3.0)) < 1e-12);
  CHECK(std::abs(position_rmse(e3, g3, Similarity{}) - 0.2887) < 1e-4);
  CHECK(ate_rmse(e3, g3) <= position_rmse(e3, g3, Similarity{}));
}

TEST_CASE("ate_rmse is similarity invariant") {
  Rng rng(4);
  const Trajectory gt = random_trajectory(rng, 12);
  const Trajectory est = perturbed(gt, rng, 0.2);
  const double base = ate_rmse(est, gt);
  for (int i = 0; i < 20; ++i) {
    Similarity s;
    s.scale = uniform(rng, 0.3, 3.0);
    s.pose = testing::random_pose(rng, 4.0);
    CHECK(ate_rmse(transformed(est, s), gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("alignment errors") {
  const Trajectory two({{0, Pose()}, {1, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0))}});
  CHECK_THROWS_AS(horn_align(two, two), AlignmentDegenerate);
  std::vector<std::pair<int, Pose>> line;
  for (int i = 0; i < 5; ++i) line.emplace_back(i, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(i, 2 * i, 0)));
  CHECK_THROWS_AS(ate_rmse(Trajectory(line), Trajectory(line)), AlignmentDegenerate);
  // Only common ids count.
  Rng rng(5);
  const Trajectory gt = random_trajectory(rng, 3);
  std::vector<std::pair<int, Pose>> other;
  for (const auto& [id, p] : gt.entries()) other.emplace_back(id + 2, p);
  CHECK_THROWS_AS(horn_align(Trajectory(other), gt), AlignmentDegenerate);
}

TEST_CASE("scale_error") {
  Rng rng(6);
  const Trajectory gt = random_trajectory(rng, 10);
  Similarity s;
  s.scale = 1.1;
  CHECK(scale_error(transformed(gt, s), gt) == doctest::Approx(0.1).epsilon(1e-9));
  s.scale = 0.8;
  CHECK(scale_error(transformed(gt, s), gt) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(scale_error(gt, gt) < 1e-12);
}

TEST_CASE("eval record json") {
  const EvalRecord r{"PPO+MS", 1.25, 20, 7};
  const auto j = nlohmann::json::parse(to_json_line(r));
  CHECK(j.at("mode") == "PPO+MS");
  CHECK(j.at("ate_rmse_cm").get<double>() == 1.25);
  CHECK(j.at("n_keyframes") == 20);
  CHECK(j.at("seed") == 7);
  CHECK(to_json_line(r).find('\n') == std::string::npos);
}
