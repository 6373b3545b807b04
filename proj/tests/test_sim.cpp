#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semslam/errors.hpp"
#include "semslam/factors/residuals.hpp"
#include "semslam/geometry/projection.hpp"
#include "semslam/sim/dataset.hpp"
#include "semslam/sim/simulator.hpp"
#include "support.hpp"

using namespace semslam;

namespace {

std::string dump(const Dataset& ds) {
  std::ostringstream out;
  write_dataset_stream(ds, out);
  return out.str();
}

SceneSpec spec_with_seed(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const SceneSpec spec = spec_with_seed(11);
  CHECK(dump(simulate(spec)) == dump(simulate(spec)));
  CHECK(dump(simulate(spec)) != dump(simulate(spec_with_seed(12))));
}

TEST_CASE("scene invariants") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec = spec_with_seed(seed);
    const GroundTruth gt = generate_scene(spec);
    CHECK(gt.points.size() == static_cast<std::size_t>(spec.n_points));
    CHECK(gt.planes.size() == static_cast<std::size_t>(spec.n_planes));
    CHECK(gt.quadrics.size() == static_cast<std::size_t>(spec.n_quadrics));
    CHECK(gt.poses.size() == static_cast<std::size_t>(spec.n_keyframes));
    for (std::size_t i = 0; i < gt.planes.size(); ++i) {
      for (std::size_t j = i + 1; j < gt.planes.size(); ++j) {
        const double c = std::abs(gt.planes[i].normal().dot(gt.planes[j].normal()));
        CHECK(std::min(c, std::abs(1.0 - c)) < 1e-12);
      }
    }
    CHECK(gt.supports.size() == gt.quadrics.size());
    for (const auto& [q, p] : gt.supports) {
      const Matrix4<double> m = gt.quadrics[q].dual_matrix();
      const Eigen::Vector4d& pi = gt.planes[p].coeffs();
      CHECK(std::abs(pi.dot(m * pi) / m.norm()) < 1e-9);
    }
    for (const auto& [a, b] : gt.parallel) CHECK(std::abs(plane_parallel(gt.planes[a], gt.planes[b])) < 1e-12);
    for (const auto& [a, b] : gt.perpendicular) CHECK(std::abs(plane_perpendicular(gt.planes[a], gt.planes[b])) < 1e-12);
    // Roughly 70% of the points on planes.
    int on = 0;
    for (const auto& x : gt.points) {
      for (const auto& p : gt.planes) {
        if (std::abs(p.normal().dot(x) + p.distance()) < 1e-9) {
          ++on;
          break;
        }
      }
    }
    CHECK(std::abs(on - 0.7 * spec.n_points) <= 0.1 * spec.n_points);
  }
}

TEST_CASE("non-manhattan scenes tilt the walls") {
  SceneSpec spec = spec_with_seed(3);
  spec.manhattan = false;
  const GroundTruth gt = generate_scene(spec);
  int off_axis = 0;
  for (const auto& p : gt.planes) {
    if (p.normal().cwiseAbs().maxCoeff() < 1.0 - 1e-6) ++off_axis;
  }
  CHECK(off_axis > 0);
}

TEST_CASE("invalid specs") {
  SceneSpec s;
  s.n_planes = 0;
  CHECK_THROWS_AS(generate_scene(s), InvalidSpec);
  s = {};
  s.detection_dropout = 1.0;
  CHECK_THROWS_AS(check_spec(s), InvalidSpec);
  s = {};
  s.n_points = -1;
  CHECK_THROWS_AS(check_spec(s), InvalidSpec);
  s = {};
  s.noise.pixel_sigma = -1;
  CHECK_THROWS_AS(check_spec(s), InvalidSpec);
  s = {};
  s.track_length = -2;
  CHECK_THROWS_AS(check_spec(s), InvalidSpec);
  s = {};
  s.n_keyframes = 0;
  CHECK_THROWS_AS(check_spec(s), InvalidSpec);
}

TEST_CASE("observations are visible and in bounds") {
  SceneSpec spec = spec_with_seed(5);
  const GroundTruth gt = generate_scene(spec);
  const Dataset ds = generate_observations(gt, spec.camera, spec);
  const Camera& cam = ds.camera;
  for (const auto& o : ds.points) {
    CHECK(cam.in_image(o.pixel));
    const Pose& pose = gt.poses[o.frame];
    CHECK((pose.inverse() * gt.points[o.gt_id]).z() > 0.0);
    CHECK(cam.in_image(project_point(gt.points[o.gt_id], cam, pose)));
  }
  for (const auto& o : ds.objects) {
    CHECK(o.box.is_valid());
    CHECK(o.box.x_min >= 0.0);
    CHECK(o.box.y_min >= 0.0);
    CHECK(o.box.x_max <= cam.width);
    CHECK(o.box.y_max <= cam.height);
    CHECK(o.box.score >= 0.85);
    CHECK(o.box.score <= 1.0);
    CHECK((gt.poses[o.frame].inverse() * gt.quadrics[o.gt_id].center()).z() > 0.0);
  }
  for (const auto& o : ds.planes) CHECK(o.inlier_tracks.size() >= 3);
}

TEST_CASE("noiseless observations reproduce the forward models") {
  SceneSpec spec = spec_with_seed(6);
  spec.noise = SimNoise::zero();
  const GroundTruth gt = generate_scene(spec);
  const Dataset ds = generate_observations(gt, spec.camera, spec);
  for (const auto& o : ds.points) {
    CHECK(point_reprojection(gt.points[o.gt_id], gt.poses[o.frame], ds.camera, o.pixel).norm() < 1e-9);
  }
  for (const auto& o : ds.objects) {
    CHECK(quadric_observation(gt.quadrics[o.gt_id], Pose::Identity(), gt.poses[o.frame], ds.camera, o.box) < 1e-9);
  }
  for (const auto& o : ds.planes) {
    CHECK(plane_observation(gt.planes[o.gt_id], Pose::Identity(), gt.poses[o.frame], o.plane).norm() < 1e-9);
  }
  for (std::size_t k = 1; k < ds.keyframes.size(); ++k) {
    const Pose rel = gt.poses[k - 1].inverse() * gt.poses[k];
    CHECK(pose_log(rel.inverse() * ds.keyframes[k].odom).norm() < 1e-9);
  }
}

TEST_CASE("detection dropout is binomial") {
  SceneSpec full = spec_with_seed(7);
  full.n_keyframes = 60;
  full.n_quadrics = 4;
  SceneSpec half = full;
  half.detection_dropout = 0.5;
  const GroundTruth gt = generate_scene(full);
  const auto n = static_cast<double>(generate_observations(gt, full.camera, full).objects.size());
  const auto k = static_cast<double>(generate_observations(gt, half.camera, half).objects.size());
  REQUIRE(n > 50);
  const double sd = std::sqrt(n * 0.25);
  CHECK(std::abs(k - 0.5 * n) <= 3.0 * sd);
}

TEST_CASE("feature tracks are split by track_length") {
  SceneSpec spec = spec_with_seed(8);
  spec.track_length = 5;
  const Dataset ds = simulate(spec);
  std::map<int, std::set<int>> frames_of_track;
  std::map<int, int> gt_of_track;
  for (const auto& o : ds.points) {
    frames_of_track[o.track].insert(o.frame);
    auto [it, fresh] = gt_of_track.emplace(o.track, o.gt_id);
    CHECK(it->second == o.gt_id);
  }
  for (const auto& [t, frames] : frames_of_track) CHECK(*frames.rbegin() - *frames.begin() < 5);
  std::set<int> gts;
  for (const auto& [t, g] : gt_of_track) gts.insert(g);
  CHECK(frames_of_track.size() > gts.size());
}

TEST_CASE("corridor trajectory") {
  SceneSpec spec = spec_with_seed(9);
  spec.trajectory = TrajectoryKind::Corridor;
  spec.trajectory_size = 4.0;
  const GroundTruth gt = generate_scene(spec);
  const double travelled = (gt.poses.back().translation() - gt.poses.front().translation()).norm();
  CHECK(travelled == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("dataset stream round trip") {
  const Dataset ds = simulate(spec_with_seed(10));
  const std::string text = dump(ds);
  std::istringstream in(text);
  const Dataset back = read_dataset_stream(in);
  CHECK(back.keyframes.size() == ds.keyframes.size());
  CHECK(back.points.size() == ds.points.size());
  CHECK(back.planes.size() == ds.planes.size());
  CHECK(back.objects.size() == ds.objects.size());
  CHECK(back.gt_quadrics.size() == ds.gt_quadrics.size());
  for (std::size_t i = 0; i < ds.keyframes.size(); ++i) {
    CHECK((back.keyframes[i].gt_pose.matrix() - ds.keyframes[i].gt_pose.matrix()).norm() < 1e-12);
    CHECK((back.keyframes[i].odom.matrix() - ds.keyframes[i].odom.matrix()).norm() < 1e-12);
  }
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    CHECK(back.points[i].pixel == ds.points[i].pixel);
    CHECK(back.points[i].track == ds.points[i].track);
  }
  for (std::size_t i = 0; i < ds.objects.size(); ++i) {
    CHECK(back.objects[i].box.x_min == ds.objects[i].box.x_min);
    CHECK(back.objects[i].box.score == ds.objects[i].box.score);
    CHECK(back.objects[i].tracks == ds.objects[i].tracks);
    CHECK(back.objects[i].cloud_file == ds.objects[i].cloud_file);
  }
}

TEST_CASE("dataset directory round trip with clouds") {
  const auto dir = std::filesystem::temp_directory_path() / "semslam_test_sim_dir";
  std::filesystem::remove_all(dir);
  const Dataset ds = simulate(spec_with_seed(13));
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  REQUIRE(back.clouds.size() == ds.clouds.size());
  for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
    CHECK(back.clouds[i].first == ds.clouds[i].first);
    REQUIRE(back.clouds[i].second.size() == ds.clouds[i].second.size());
    CHECK((back.clouds[i].second.front() - ds.clouds[i].second.front()).norm() < 1e-12);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("format errors carry line numbers") {
  const std::string good = dump(simulate(spec_with_seed(14)));
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_dataset_stream(in);
  };
  auto error_line = [&](const std::string& s) -> std::size_t {
    try {
      parse(s);
    } catch (const FormatError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(error_line("") == 1);
  CHECK(error_line("{\"format_version\": 2}\n") == 1);
  // Break the third line.
  std::istringstream lines(good);
  std::string l1, l2, rest;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::ostringstream tail;
  tail << lines.rdbuf();
  CHECK(error_line(l1 + "\n" + l2 + "\nnot json\n" + tail.str()) == 3);
  CHECK(error_line(l1 + "\n" + l2 + "\n{\"type\": \"mystery\"}\n") == 3);
  CHECK(error_line(l1 + "\n" + l2 + "\n{\"type\": \"point_obs\", \"frame\": 0}\n") == 3);
  CHECK_THROWS_AS(read_dataset(std::filesystem::path("/nonexistent/semslam")), FormatError);
}
