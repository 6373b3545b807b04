#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "semslam/assoc/association.hpp"
#include "semslam/assoc/hungarian.hpp"
#include "semslam/geometry/projection.hpp"
#include "support.hpp"

using namespace semslam;
using testing::Rng;
using testing::uniform;

namespace {

// Minimum over all injective row -> column maps (rows <= cols) or the
// transpose case, by enumeration.
double brute_force_min(const Eigen::MatrixXd& c) {
  const bool transpose = c.rows() > c.cols();
  const Eigen::MatrixXd m = transpose ? Eigen::MatrixXd(c.transpose()) : c;
  std::vector<int> cols(m.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double sum = 0.0;
    for (int i = 0; i < m.rows(); ++i) sum += m(i, cols[i]);
    best = std::min(best, sum);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("hungarian matches exhaustive search") {
  Rng rng(1);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = 1 + trial % 6, cols = 1 + (trial / 6) % 6;
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c(i, j) = trial % 3 ? uniform(rng, 0, 10) : std::floor(uniform(rng, 0, 4));
    const auto a = hungarian(c);
    CHECK(static_cast<int>(a.size()) == rows);
    std::vector<int> used;
    for (int j : a)
      if (j >= 0) used.push_back(j);
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(static_cast<int>(used.size()) == std::min(rows, cols));
    if (std::abs(assignment_cost(c, a) - brute_force_min(c)) > 1e-9) ++mismatches;
  }
  CHECK(mismatches == 0);
  CHECK(hungarian(Eigen::MatrixXd(0, 3)).empty());
  Eigen::MatrixXd bad(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(hungarian(bad), std::invalid_argument);
}

TEST_CASE("match_objects decisions") {
  const AssocConfig cfg;
  // No candidates: everything is new.
  auto d = match_objects(Eigen::MatrixXi(2, 0), {}, cfg);
  CHECK(d.size() == 2);
  for (const auto& m : d) CHECK(m.decision == Decision::New);

  Eigen::MatrixXi p(1, 1);
  p(0, 0) = cfg.th_high;
  d = match_objects(p, {42}, cfg);
  CHECK(d[0] == MatchDecision{Decision::Matched, 42});
  p(0, 0) = cfg.th_low;
  CHECK(match_objects(p, {42}, cfg)[0].decision == Decision::New);
  p(0, 0) = cfg.th_low + 1;
  CHECK(match_objects(p, {42}, cfg)[0].decision == Decision::Ignored);

  // Two detections competing for one candidate: the loser is unassigned.
  Eigen::MatrixXi two(2, 1);
  two << 20, 12;
  d = match_objects(two, {7}, cfg);
  CHECK(d[0] == MatchDecision{Decision::Matched, 7});
  CHECK(d[1].decision == Decision::New);
}

TEST_CASE("match_objects maximizes total overlap") {
  Rng rng(2);
  AssocConfig cfg;
  cfg.th_high = 0;
  cfg.th_low = -1;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXi p(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) p(i, j) = static_cast<int>(uniform(rng, 0, 30));
    const auto d = match_objects(p, {0, 1, 2, 3, 4}, cfg);
    int total = 0;
    for (int i = 0; i < 5; ++i) {
      REQUIRE(d[i].decision == Decision::Matched);
      total += p(i, d[i].landmark);
    }
    const Eigen::MatrixXd cost = (p.maxCoeff() - p.array()).cast<double>().matrix();
    CHECK(5 * p.maxCoeff() - total == doctest::Approx(brute_force_min(cost)));
  }
}

TEST_CASE("overlap counts and score gate") {
  std::vector<BBox> dets{make_bbox(0, 0, 10, 10, 0.9), make_bbox(20, 20, 30, 30, 0.5)};
  ObjectCandidate c;
  c.id = 3;
  for (int i = 0; i < 12; ++i) c.keypoints.emplace_back(1 + 0.5 * i, 5);
  c.keypoints.emplace_back(25, 25);
  const Eigen::MatrixXi p = overlap_counts(dets, {c});
  CHECK(p(0, 0) == 12);
  CHECK(p(1, 0) == 1);
  const auto d = match_objects(dets, {c}, AssocConfig{});
  CHECK(d[0] == MatchDecision{Decision::Matched, 3});
  CHECK(d[1].decision == Decision::Ignored);
}

TEST_CASE("match_planes") {
  const AssocConfig cfg;
  MapPlane floor;
  floor.id = 0;
  floor.plane = Plane(Eigen::Vector4d(0, 0, 1, 0));
  for (int t = 0; t < 20; ++t) floor.tracks.insert(t);
  const Pose cam = testing::looking_at({2, 0, 1.5}, {0, 0, 0});

  PlaneDetection det;
  det.plane = transform_plane(floor.plane, cam.inverse());
  for (int t = 0; t <= cfg.th_H; ++t) det.inlier_tracks.push_back(t);
  CHECK(match_planes(det, {floor}, cam, cfg) == MatchDecision{Decision::Matched, 0});

  // Same geometry but too few shared keypoints: ignored.
  det.inlier_tracks = {0, 1, 2, 100, 101};
  CHECK(match_planes(det, {floor}, cam, cfg).decision == Decision::Ignored);

  // Nothing in common and a different plane: new.
  PlaneDetection wall;
  wall.plane = transform_plane(Plane(Eigen::Vector4d(1, 0, 0, 3)), cam.inverse());
  wall.inlier_tracks = {200, 201, 202};
  CHECK(match_planes(wall, {floor}, cam, cfg).decision == Decision::New);
  CHECK(match_planes(wall, {}, cam, cfg).decision == Decision::New);

  CHECK(planes_close(floor.plane, Plane(Eigen::Vector4d(0, 0, -1, 0.05)), cfg));
  CHECK_FALSE(planes_close(floor.plane, Plane(Eigen::Vector4d(0, 0, 1, 0.5)), cfg));
}

TEST_CASE("init_quadric") {
  const Camera cam;
  const DualQuadric truth = DualQuadric::from_semi_axes(Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 5)),
                                                        Eigen::Vector3d::Ones());
  const Pose v0 = testing::looking_at({0, -0.01, 0}, {0, 0, 5});
  const Pose v1 = testing::looking_at({1.5, 0, 0}, {0, 0, 5});
  std::vector<ObjectView> views{{conic_to_bbox(project_quadric(truth, cam, v0)), v0},
                                {conic_to_bbox(project_quadric(truth, cam, v1)), v1}};
  auto q = init_quadric(views, cam, std::nullopt);
  REQUIRE(q.has_value());
  CHECK((q->center() - truth.center()).norm() < 0.5);
  for (const auto& v : views) CHECK(bbox_iou(conic_to_bbox(project_quadric(*q, cam, v.camera_pose)), v.box) > 0.3);

  std::vector<ObjectView> one{views[0]};
  CHECK_FALSE(init_quadric(one, cam, std::nullopt).has_value());
  q = init_quadric(one, cam, 5.0);
  REQUIRE(q.has_value());
  CHECK((q->center() - truth.center()).norm() < 0.2);
  CHECK_FALSE(init_quadric({}, cam, 5.0).has_value());
}

TEST_CASE("quadric_in_front") {
  const AssocConfig cfg;
  const DualQuadric q = DualQuadric::from_semi_axes(Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 3)),
                                                    Eigen::Vector3d::Constant(0.2));
  CHECK(quadric_in_front(q, Pose::Identity(), cfg));
  CHECK_FALSE(quadric_in_front(q, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 4)), cfg));
}

TEST_CASE("associate_points_to_plane") {
  const Plane p(Eigen::Vector4d(0, 0, 1, 0));
  const std::vector<std::pair<int, Eigen::Vector3d>> pts{{1, {0, 0, 0}}, {2, {1, 1, 0}}, {3, {0, 0, 0.2}}};
  const auto in = associate_points_to_plane(pts, {1, 3}, p, 0.1);
  CHECK(in == std::vector<int>{1});
  CHECK(associate_points_to_plane(pts, {}, p, 0.1).empty());
}

TEST_CASE("config validation") {
  AssocConfig cfg;
  CHECK_NOTHROW(check_config(cfg));
  cfg.th_L = cfg.th_H + 1;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.score_min = 1.5;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
}
