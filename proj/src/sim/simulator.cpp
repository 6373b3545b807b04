#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "semslam/errors.hpp"
#include "semslam/geometry/projection.hpp"
#include "semslam/sim/simulator.hpp"

namespace semslam {

void check_spec(const SceneSpec& spec) {
  if (spec.n_points < 0 || spec.n_planes < 0 || spec.n_quadrics < 0) throw InvalidSpec("counts must be >= 0");
  if (spec.n_planes > 4) throw InvalidSpec("at most 4 planes (floor, two walls, table)");
  if (spec.n_quadrics > 0 && spec.n_planes == 0) throw InvalidSpec("supported quadrics need at least one plane");
  if (spec.n_keyframes < 1) throw InvalidSpec("need at least one keyframe");
  if (spec.track_length < 0) throw InvalidSpec("track length must be >= 0");
  if (!(spec.trajectory_size > 0.0)) throw InvalidSpec("trajectory size must be positive");
  const SimNoise& n = spec.noise;
  for (double s : {n.pixel_sigma, n.bbox_sigma, n.plane_angle_sigma, n.plane_dist_sigma, n.odom_rot_sigma,
                   n.odom_trans_sigma, n.scale_drift_sigma}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidSpec("noise sigmas must be finite and >= 0");
  }
  if (!(spec.detection_dropout >= 0.0 && spec.detection_dropout < 1.0)) throw InvalidSpec("dropout must be in [0,1)");
  if (!spec.camera.is_valid()) throw InvalidSpec("invalid camera");
}

namespace {

// Independent stream per (seed, stream) pair.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, 0x5e3a1u};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double gauss(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

Eigen::Vector3d gauss3(std::mt19937_64& rng, double sigma) {
  return Eigen::Vector3d(gauss(rng, sigma), gauss(rng, sigma), gauss(rng, sigma));
}

Eigen::Vector3d unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

// Rectangular patch of a plane: origin + u e1 + v e2.
struct Patch {
  Eigen::Vector3d origin;
  Eigen::Vector3d e1;
  Eigen::Vector3d e2;
  double u_len;
  double v_len;

  Eigen::Vector3d normal() const { return e1.cross(e2).normalized(); }
  Plane plane() const {
    const Eigen::Vector3d n = normal();
    return Plane(Eigen::Vector4d(n.x(), n.y(), n.z(), -n.dot(origin)));
  }
  Eigen::Vector3d at(double u, double v) const { return origin + u * e1 + v * e2; }
};

std::vector<Patch> room_patches(const SceneSpec& spec, std::mt19937_64& rng) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  std::vector<Patch> all = {
      {{-2.5, -2.5, 0.0}, ex, ey, 3.5, 3.5},  // floor
      {{-2.5, -2.5, 0.0}, ey, ez, 3.5, 2.2},  // wall x = -2.5
      {{-2.5, -2.5, 0.0}, ez, ex, 2.2, 3.5},  // wall y = -2.5
      {{-1.2, -1.2, 0.7}, ex, ey, 1.2, 1.2},  // table top
  };
  if (!spec.manhattan) {
    // Tilt the walls off the axes about their base corner.
    for (int w : {1, 2}) {
      const double yaw = (rng() % 2 ? 1.0 : -1.0) * uniform(rng, 0.17, 0.35);
      const double pitch = uniform(rng, -0.1, 0.1);
      const Eigen::Matrix3d r =
          (Eigen::AngleAxisd(yaw, ez) * Eigen::AngleAxisd(pitch, all[w].e1)).toRotationMatrix();
      all[w].e1 = r * all[w].e1;
      all[w].e2 = r * all[w].e2;
    }
  }
  all.resize(spec.n_planes);
  return all;
}

std::vector<Pose> make_trajectory(const SceneSpec& spec) {
  std::vector<Pose> poses;
  const int n = spec.n_keyframes;
  for (int i = 0; i < n; ++i) {
    const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    const double bob = 0.1 * std::sin(2.0 * M_PI * s);
    if (spec.trajectory == TrajectoryKind::Orbit) {
      const double theta = 0.5 * M_PI * s;
      const Eigen::Vector3d eye(-0.5 + spec.trajectory_size * std::cos(theta),
                                -0.5 + spec.trajectory_size * std::sin(theta), 1.2 + bob);
      poses.push_back(look_at(eye, Eigen::Vector3d(-0.6, -0.6, 0.6)));
    } else {
      const Eigen::Vector3d eye(-1.6 + spec.trajectory_size * s, 1.0, 1.2 + bob);
      poses.push_back(look_at(eye, eye + Eigen::Vector3d(-0.4, -1.6, -0.7)));
    }
  }
  return poses;
}

}  // namespace

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitX();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Pose(r, eye);
}

GroundTruth generate_scene(const SceneSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng = make_rng(spec.seed, 0);
  GroundTruth gt;
  gt.poses = make_trajectory(spec);

  const std::vector<Patch> patches = room_patches(spec, rng);
  for (const Patch& p : patches) gt.planes.push_back(p.plane());
  for (int i = 0; i < static_cast<int>(gt.planes.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(gt.planes.size()); ++j) {
      const double c = std::abs(gt.planes[i].normal().dot(gt.planes[j].normal()));
      if (c > 1.0 - 1e-12) gt.parallel.emplace_back(i, j);
      if (c < 1e-12) gt.perpendicular.emplace_back(i, j);
    }
  }

  // Objects rest on the table (even index, when present) or the floor.
  for (int k = 0; k < spec.n_quadrics; ++k) {
    const int support = (patches.size() > 3 && k % 2 == 0) ? 3 : 0;
    const Patch& patch = patches[support];
    const Eigen::Vector3d axes(uniform(rng, 0.1, 0.22), uniform(rng, 0.1, 0.22), uniform(rng, 0.08, 0.2));
    const double yaw = uniform(rng, 0.0, 2.0 * M_PI);
    Eigen::Vector3d foot;
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double margin = 0.3;
      const double u0 = support == 3 ? margin : 1.4;
      const double u1 = support == 3 ? patch.u_len - margin : 2.9;
      foot = patch.at(uniform(rng, u0, u1), uniform(rng, u0, u1));
      bool clear = true;
      for (const auto& q : gt.quadrics) clear = clear && (q.center() - foot).head<2>().norm() > 0.55;
      if (clear) break;
    }
    const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d n = patch.normal();
    const Eigen::Matrix3d shape = r * axes.cwiseAbs2().asDiagonal() * r.transpose();
    const Eigen::Vector3d center = foot + n * std::sqrt(n.dot(shape * n));
    gt.quadrics.push_back(DualQuadric::from_semi_axes(Pose(r, center), axes));
    gt.quadric_class.push_back(static_cast<int>(rng() % 5));
    gt.supports.emplace_back(k, support);
  }

  const int on_planes = patches.empty() ? 0 : static_cast<int>(std::lround(0.7 * spec.n_points));
  const int on_objects = gt.quadrics.empty() ? 0 : static_cast<int>(std::lround(0.2 * spec.n_points));
  for (int i = 0; i < on_planes; ++i) {
    const Patch& p = patches[i % patches.size()];
    gt.points.push_back(p.at(uniform(rng, 0.0, p.u_len), uniform(rng, 0.0, p.v_len)));
  }
  for (int i = 0; i < on_objects; ++i) {
    const DualQuadric& q = gt.quadrics[i % gt.quadrics.size()];
    gt.points.push_back(q.frame() * q.semi_axes().cwiseProduct(unit_vector(rng)));
  }
  while (static_cast<int>(gt.points.size()) < spec.n_points) {
    gt.points.emplace_back(uniform(rng, -2.0, 0.8), uniform(rng, -2.0, 0.8), uniform(rng, 0.1, 1.8));
  }

  if (spec.object_clouds) {
    for (const DualQuadric& q : gt.quadrics) {
      const Eigen::Vector3d axes = q.semi_axes();
      std::vector<Eigen::Vector3d> cloud;
      for (int a = 0; a < 3; ++a) {
        for (double s : {-1.0, 1.0}) cloud.push_back(s * axes(a) * Eigen::Vector3d::Unit(a));
      }
      for (int i = 0; i < 300; ++i) cloud.push_back(axes.cwiseProduct(unit_vector(rng)));
      const Eigen::Matrix3d r = random_rotation(rng);
      for (auto& x : cloud) x = r * x / axes.maxCoeff();
      gt.clouds.push_back(std::move(cloud));
    }
  }
  return gt;
}

Dataset generate_observations(const GroundTruth& gt, const Camera& cam, const SceneSpec& spec) {
  check_spec(spec);
  const SimNoise& noise = spec.noise;
  Dataset ds;
  ds.seed = spec.seed;
  ds.camera = cam;
  ds.gt_points = gt.points;
  ds.gt_planes = gt.planes;
  ds.gt_quadrics = gt.quadrics;
  ds.gt_supports = gt.supports;
  for (std::size_t k = 0; k < gt.clouds.size(); ++k) {
    ds.clouds.emplace_back("cloud_" + std::to_string(k) + ".xyz", gt.clouds[k]);
  }

  // Which plane each point was sampled on.
  std::vector<int> point_plane(gt.points.size(), -1);
  for (std::size_t j = 0; j < gt.points.size(); ++j) {
    for (std::size_t i = 0; i < gt.planes.size(); ++i) {
      const Plane& p = gt.planes[i];
      if (std::abs(p.normal().dot(gt.points[j]) + p.distance()) < 1e-9) point_plane[j] = static_cast<int>(i);
    }
  }

  // Per-point offset of the track boundaries, from a stream of its own.
  std::vector<int> track_phase(gt.points.size(), 0);
  if (spec.track_length > 0) {
    std::mt19937_64 rng = make_rng(spec.seed, 0xffffffffu);
    for (int& p : track_phase) p = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.track_length));
  }
  const int n_points = static_cast<int>(gt.points.size());
  auto track_of = [&](int j, int f) {
    return spec.track_length > 0 ? j + n_points * ((f + track_phase[j]) / spec.track_length) : j;
  };

  double scale = 1.0;
  for (int f = 0; f < static_cast<int>(gt.poses.size()); ++f) {
    std::mt19937_64 rng = make_rng(spec.seed, static_cast<std::uint32_t>(f + 1));
    const Pose& pose = gt.poses[f];
    const Pose world_to_cam = pose.inverse();

    KeyframeRecord kf;
    kf.id = f;
    kf.gt_pose = pose;
    if (f == 0) {
      kf.odom = pose;
    } else {
      const Pose rel = gt.poses[f - 1].inverse() * pose;
      scale *= 1.0 + gauss(rng, noise.scale_drift_sigma);
      const Eigen::Matrix3d r = rel.rotation() * so3_exp<double>(gauss3(rng, noise.odom_rot_sigma));
      kf.odom = normalized(Pose(r, scale * rel.translation() + gauss3(rng, noise.odom_trans_sigma)));
    }
    ds.keyframes.push_back(kf);

    std::vector<PointObservation> visible;
    for (std::size_t j = 0; j < gt.points.size(); ++j) {
      const Eigen::Vector3d y = world_to_cam * gt.points[j];
      if (y.z() <= 0.1) continue;
      const Eigen::Vector2d px(cam.fx * y.x() / y.z() + cam.cx, cam.fy * y.y() / y.z() + cam.cy);
      if (!cam.in_image(px)) continue;
      const Eigen::Vector2d noisy = px + Eigen::Vector2d(gauss(rng, noise.pixel_sigma), gauss(rng, noise.pixel_sigma));
      if (!cam.in_image(noisy)) continue;
      visible.push_back({f, track_of(static_cast<int>(j), f), noisy, static_cast<int>(j)});
    }
    ds.points.insert(ds.points.end(), visible.begin(), visible.end());

    for (std::size_t i = 0; i < gt.planes.size(); ++i) {
      PlaneObservation obs;
      obs.frame = f;
      obs.gt_id = static_cast<int>(i);
      for (const auto& v : visible) {
        if (point_plane[v.gt_id] == static_cast<int>(i)) obs.inlier_tracks.push_back(v.track);
      }
      const bool dropped = uniform(rng, 0.0, 1.0) < spec.detection_dropout;
      const Eigen::Vector3d dn = gauss3(rng, noise.plane_angle_sigma);
      const double dd = gauss(rng, noise.plane_dist_sigma);
      if (obs.inlier_tracks.size() < 3 || dropped) continue;
      const Plane in_cam = transform_plane(gt.planes[i], world_to_cam);
      const Eigen::Vector3d n = so3_exp<double>(dn) * in_cam.normal();
      obs.plane = Plane(Eigen::Vector4d(n.x(), n.y(), n.z(), in_cam.distance() + dd));
      ds.planes.push_back(std::move(obs));
    }

    for (std::size_t k = 0; k < gt.quadrics.size(); ++k) {
      const bool dropped = uniform(rng, 0.0, 1.0) < spec.detection_dropout;
      Eigen::Vector4d corner_noise;
      for (int c = 0; c < 4; ++c) corner_noise(c) = gauss(rng, noise.bbox_sigma);
      const double score = uniform(rng, 0.85, 1.0);
      if (dropped) continue;
      if ((world_to_cam * gt.quadrics[k].center()).z() <= 0.1) continue;
      BBox box;
      try {
        box = conic_to_bbox(project_quadric(gt.quadrics[k], cam, pose));
      } catch (const BehindCamera&) {
        continue;
      } catch (const DegenerateProjection&) {
        continue;
      }
      if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > cam.width || box.y_max > cam.height) continue;
      box.x_min = std::clamp(box.x_min + corner_noise(0), 0.0, static_cast<double>(cam.width));
      box.y_min = std::clamp(box.y_min + corner_noise(1), 0.0, static_cast<double>(cam.height));
      box.x_max = std::clamp(box.x_max + corner_noise(2), 0.0, static_cast<double>(cam.width));
      box.y_max = std::clamp(box.y_max + corner_noise(3), 0.0, static_cast<double>(cam.height));
      box.score = score;
      box.class_id = gt.quadric_class[k];
      if (!box.is_valid()) continue;

      ObjectObservation obs;
      obs.frame = f;
      obs.box = box;
      obs.gt_id = static_cast<int>(k);
      for (const auto& v : visible) {
        if (box.contains(v.pixel.x(), v.pixel.y())) obs.tracks.push_back(v.track);
      }
      if (k < ds.clouds.size()) obs.cloud_file = ds.clouds[k].first;
      ds.objects.push_back(std::move(obs));
    }
  }
  return ds;
}

Dataset simulate(const SceneSpec& spec) { return generate_observations(generate_scene(spec), spec.camera, spec); }

}  // namespace semslam
