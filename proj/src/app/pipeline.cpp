#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <Eigen/SVD>
#include <json.hpp>

#include "semslam/app/pipeline.hpp"
#include "semslam/errors.hpp"
#include "semslam/geometry/cuboid.hpp"
#include "semslam/geometry/ellipsoid.hpp"
#include "semslam/geometry/projection.hpp"

namespace semslam {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::P: return "P";
    case Mode::PP: return "PP";
    case Mode::PPM: return "PP+M";
    case Mode::PO: return "PO";
    case Mode::PPOMS: return "PPO+MS";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::P, Mode::PP, Mode::PPM, Mode::PO, Mode::PPOMS}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown mode '" + name + "' (expected P, PP, PP+M, PO or PPO+MS)");
}

bool uses_planes(Mode m) { return m == Mode::PP || m == Mode::PPM || m == Mode::PPOMS; }
bool uses_manhattan(Mode m) { return m == Mode::PPM || m == Mode::PPOMS; }
bool uses_objects(Mode m) { return m == Mode::PO || m == Mode::PPOMS; }
bool uses_support(Mode m) { return m == Mode::PPOMS; }

void apply_config(const KeyValueConfig& kv, RunConfig& cfg) {
  AssocConfig& a = cfg.assoc;
  a.th_H = kv.get("assoc.th_H", a.th_H);
  a.th_L = kv.get("assoc.th_L", a.th_L);
  a.th_high = kv.get("assoc.th_high", a.th_high);
  a.th_low = kv.get("assoc.th_low", a.th_low);
  a.score_min = kv.get("assoc.score_min", a.score_min);
  a.plane_angle_tol = kv.get("assoc.plane_angle_tol_deg", a.plane_angle_tol * 180.0 / M_PI) * M_PI / 180.0;
  a.plane_dist_tol = kv.get("assoc.plane_dist_tol", a.plane_dist_tol);
  a.min_candidate_depth = kv.get("assoc.min_candidate_depth", a.min_candidate_depth);
  check_config(a);

  OptimizerConfig& o = cfg.optimizer;
  o.max_iterations = kv.get("optimizer.max_iterations", o.max_iterations);
  o.lambda_init = kv.get("optimizer.lambda_init", o.lambda_init);
  o.lambda_scale = kv.get("optimizer.lambda_scale", o.lambda_scale);
  o.lambda_max = kv.get("optimizer.lambda_max", o.lambda_max);
  o.abs_tol = kv.get("optimizer.abs_tol", o.abs_tol);
  o.rel_tol = kv.get("optimizer.rel_tol", o.rel_tol);
  o.parallel_eval = kv.get("optimizer.parallel_eval", o.parallel_eval);
  o.max_threads = kv.get("optimizer.max_threads", o.max_threads);
  check_config(o);

  NoiseConfig& n = cfg.noise;
  n.pixel_sigma = kv.get("noise.pixel_sigma", n.pixel_sigma);
  n.huber_width = kv.get("noise.huber_width", n.huber_width);
  n.sigma_d = kv.get("noise.sigma_d", n.sigma_d);
  n.sigma_par = kv.get("noise.sigma_par", n.sigma_par);
  n.sigma_per = kv.get("noise.sigma_per", n.sigma_per);
  n.sigma_t = kv.get("noise.sigma_t", n.sigma_t);
  n.plane_sigmas(0) = kv.get("noise.plane_sigma_0", n.plane_sigmas(0));
  n.plane_sigmas(1) = kv.get("noise.plane_sigma_1", n.plane_sigmas(1));
  n.plane_sigmas(2) = kv.get("noise.plane_sigma_2", n.plane_sigmas(2));
  n.sigma_p = kv.get("noise.sigma_p", n.sigma_p);
  n.iou_sigma_scale = kv.get("noise.iou_sigma_scale", n.iou_sigma_scale);
  n.odom_rot_sigma = kv.get("noise.odom_rot_sigma", n.odom_rot_sigma);
  n.odom_trans_sigma = kv.get("noise.odom_trans_sigma", n.odom_trans_sigma);
  for (double s : {n.pixel_sigma, n.huber_width, n.sigma_d, n.sigma_par, n.sigma_per, n.sigma_t, n.plane_sigmas(0),
                   n.plane_sigmas(1), n.plane_sigmas(2), n.sigma_p, n.iou_sigma_scale, n.odom_rot_sigma,
                   n.odom_trans_sigma}) {
    if (!(s > 0.0)) throw std::invalid_argument("noise settings must be positive");
  }

  cfg.batch_every = kv.get("pipeline.batch_every", cfg.batch_every);
  cfg.point_plane_tol = kv.get("pipeline.point_plane_tol", cfg.point_plane_tol);
  cfg.min_parallax = kv.get("pipeline.min_parallax", cfg.min_parallax);
  cfg.manhattan_tol = kv.get("pipeline.manhattan_tol_deg", cfg.manhattan_tol * 180.0 / M_PI) * M_PI / 180.0;
  cfg.support_tol = kv.get("pipeline.support_tol", cfg.support_tol);
  cfg.object_min_baseline = kv.get("pipeline.object_min_baseline", cfg.object_min_baseline);
  cfg.object_iterations = kv.get("pipeline.object_iterations", cfg.object_iterations);
  if (cfg.batch_every < 1 || !(cfg.point_plane_tol > 0.0) || !(cfg.min_parallax >= 0.0) ||
      !(cfg.manhattan_tol > 0.0) || !(cfg.support_tol > 0.0) || !(cfg.object_min_baseline >= 0.0) ||
      cfg.object_iterations < 1) {
    throw std::invalid_argument("pipeline settings out of range");
  }
  kv.reject_unused();
}

SceneSpec scene_spec_from(const KeyValueConfig& kv) {
  SceneSpec s;
  s.seed = static_cast<std::uint64_t>(kv.get("seed", 0));
  s.n_points = kv.get("n_points", s.n_points);
  s.n_planes = kv.get("n_planes", s.n_planes);
  s.n_quadrics = kv.get("n_quadrics", s.n_quadrics);
  s.manhattan = kv.get("manhattan", s.manhattan);
  const std::string traj = kv.get("trajectory", "orbit");
  if (traj == "orbit") {
    s.trajectory = TrajectoryKind::Orbit;
  } else if (traj == "corridor") {
    s.trajectory = TrajectoryKind::Corridor;
  } else {
    throw InvalidSpec("trajectory must be orbit or corridor");
  }
  s.trajectory_size = kv.get("trajectory_size", s.trajectory_size);
  s.n_keyframes = kv.get("n_keyframes", s.n_keyframes);
  s.track_length = kv.get("track_length", s.track_length);
  SimNoise& n = s.noise;
  n.pixel_sigma = kv.get("noise.pixel_sigma", n.pixel_sigma);
  n.bbox_sigma = kv.get("noise.bbox_sigma", n.bbox_sigma);
  n.plane_angle_sigma = kv.get("noise.plane_angle_sigma", n.plane_angle_sigma);
  n.plane_dist_sigma = kv.get("noise.plane_dist_sigma", n.plane_dist_sigma);
  n.odom_rot_sigma = kv.get("noise.odom_rot_sigma", n.odom_rot_sigma);
  n.odom_trans_sigma = kv.get("noise.odom_trans_sigma", n.odom_trans_sigma);
  n.scale_drift_sigma = kv.get("noise.scale_drift_sigma", n.scale_drift_sigma);
  s.detection_dropout = kv.get("detection_dropout", s.detection_dropout);
  s.object_clouds = kv.get("object_clouds", s.object_clouds);
  Camera& c = s.camera;
  c.fx = kv.get("camera.fx", c.fx);
  c.fy = kv.get("camera.fy", c.fy);
  c.cx = kv.get("camera.cx", c.cx);
  c.cy = kv.get("camera.cy", c.cy);
  c.width = kv.get("camera.width", c.width);
  c.height = kv.get("camera.height", c.height);
  kv.reject_unused();
  check_spec(s);
  return s;
}

Trajectory gt_trajectory(const Dataset& ds) {
  std::vector<std::pair<int, Pose>> entries;
  for (const auto& kf : ds.keyframes) entries.emplace_back(kf.id, kf.gt_pose);
  return Trajectory(std::move(entries));
}

namespace {

VariableId pose_id(int frame) { return {VarKind::Pose, frame}; }

struct PlaneLandmark {
  VariableId var;
  int anchor = 0;
  std::set<int> tracks;
  std::set<int> linked;
};

struct QuadricLandmark {
  VariableId var;
  int anchor = 0;
  int class_id = 0;
  std::set<int> tracks;
  std::string cloud_file;
  int support = -1;
  std::optional<std::size_t> shape_factor;
};

struct PendingObject {
  std::vector<const ObjectObservation*> views;
  std::set<int> tracks;
};

class Pipeline {
 public:
  static constexpr int kPriorRounds = 3;

  Pipeline(const Dataset& ds, const RunConfig& cfg) : ds_(ds), cfg_(cfg) {
    const int n = static_cast<int>(ds.keyframes.size());
    points_.resize(n);
    planes_obs_.resize(n);
    objects_obs_.resize(n);
    for (const auto& p : ds.points) {
      check_frame(p.frame);
      points_[p.frame].push_back(&p);
      pixels_[{p.frame, p.track}] = p.pixel;
    }
    for (const auto& p : ds.planes) {
      check_frame(p.frame);
      planes_obs_[p.frame].push_back(&p);
    }
    for (const auto& o : ds.objects) {
      check_frame(o.frame);
      objects_obs_[o.frame].push_back(&o);
    }
    for (const auto& [name, cloud] : ds.clouds) clouds_[name] = cloud;
    reproj_loss_ = Huber{cfg.noise.huber_width};
  }

  PipelineResult run() {
    const int n = static_cast<int>(ds_.keyframes.size());
    if (n == 0) throw FormatError("dataset has no keyframes", 0);
    bool solved_last = false;
    for (int f = 0; f < n; ++f) {
      add_keyframe(f);
      add_points(f);
      if (uses_planes(cfg_.mode)) add_planes(f);
      if (uses_objects(cfg_.mode)) add_objects(f);
      if (uses_planes(cfg_.mode)) link_points_to_planes();
      solved_last = (f + 1) % cfg_.batch_every == 0;
      if (solved_last) batch();
    }
    if (!solved_last) batch();
    return finish();
  }

 private:
  void check_frame(int f) const {
    if (f < 0 || f >= static_cast<int>(ds_.keyframes.size())) throw FormatError("observation of unknown frame", 0);
  }

  const Pose& pose(int f) const { return graph_.get<Pose>(pose_id(f)); }

  Plane world_plane(const PlaneLandmark& p) const {
    return transform_plane(graph_.get<Plane>(p.var), pose(p.anchor));
  }

  DualQuadric world_quadric(const QuadricLandmark& q) const {
    return graph_.get<DualQuadric>(q.var).transformed(pose(q.anchor));
  }

  NoiseModel odom_noise() const {
    Vector6d s;
    s << Eigen::Vector3d::Constant(cfg_.noise.odom_rot_sigma), Eigen::Vector3d::Constant(cfg_.noise.odom_trans_sigma);
    return NoiseModel::diagonal(s);
  }

  void add_keyframe(int f) {
    const KeyframeRecord& kf = ds_.keyframes[f];
    if (f == 0) {
      graph_.add_variable(pose_id(0), kf.odom);
      graph_.fix(pose_id(0));
      return;
    }
    graph_.add_variable(pose_id(f), normalized(pose(f - 1) * kf.odom));
    graph_.add_factor(make_between(pose_id(f - 1), pose_id(f), kf.odom, odom_noise()));
    track_pose(f);
  }

  // Motion-only refinement of the new keyframe against mapped points.
  void track_pose(int f) {
    FactorGraph local;
    local.add_variable(pose_id(f - 1), pose(f - 1));
    local.fix(pose_id(f - 1));
    local.add_variable(pose_id(f), pose(f));
    local.add_factor(make_between(pose_id(f - 1), pose_id(f), ds_.keyframes[f].odom, odom_noise()));
    int n = 0;
    for (const PointObservation* obs : points_[f]) {
      const auto it = point_vars_.find(obs->track);
      if (it == point_vars_.end()) continue;
      local.add_variable(it->second, graph_.value(it->second));
      local.fix(it->second);
      local.add_factor(
          make_reprojection(it->second, pose_id(f), ds_.camera, obs->pixel, cfg_.noise.pixel_sigma, reproj_loss_));
      ++n;
    }
    if (n < 6) return;
    OptimizerConfig oc = cfg_.optimizer;
    oc.max_iterations = 20;
    const OptimizeReport r = optimize(local, oc);
    if (r.status != OptimizerStatus::NumericalFailure) graph_.set_value(pose_id(f), local.value(pose_id(f)));
  }

  std::optional<Eigen::Vector3d> triangulate(const std::vector<std::pair<int, Eigen::Vector2d>>& obs) const {
    if (obs.size() < 2) return std::nullopt;
    const Camera& cam = ds_.camera;
    auto ray = [&](int f, const Eigen::Vector2d& px) {
      return (pose(f).rotation() * Eigen::Vector3d((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0))
          .normalized();
    };
    const auto& a = obs.front();
    const auto& b = obs.back();
    const double angle = std::acos(std::clamp(ray(a.first, a.second).dot(ray(b.first, b.second)), -1.0, 1.0));
    if (angle < cfg_.min_parallax) return std::nullopt;

    Eigen::MatrixXd m(2 * obs.size(), 4);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Eigen::Matrix<double, 3, 4> p = projection_matrix(cam, pose(obs[i].first));
      m.row(2 * i) = obs[i].second.x() * p.row(2) - p.row(0);
      m.row(2 * i + 1) = obs[i].second.y() * p.row(2) - p.row(1);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svd.matrixV().col(3);
    if (std::abs(h(3)) < 1e-12) return std::nullopt;
    const Eigen::Vector3d x = h.head<3>() / h(3);
    for (const auto& [f, px] : obs) {
      const Eigen::Vector3d y = pose(f).inverse() * x;
      if (y.z() <= 0.05) return std::nullopt;
      const Eigen::Vector2d proj(cam.fx * y.x() / y.z() + cam.cx, cam.fy * y.y() / y.z() + cam.cy);
      if ((proj - px).norm() > 5.0 * cfg_.noise.pixel_sigma + 1.0) return std::nullopt;
    }
    return x;
  }

  void add_points(int f) {
    for (const PointObservation* obs : points_[f]) {
      const auto it = point_vars_.find(obs->track);
      if (it != point_vars_.end()) {
        graph_.add_factor(
            make_reprojection(it->second, pose_id(f), ds_.camera, obs->pixel, cfg_.noise.pixel_sigma, reproj_loss_));
        continue;
      }
      auto& pending = pending_points_[obs->track];
      pending.emplace_back(f, obs->pixel);
      if (const auto x = triangulate(pending)) {
        const VariableId id = graph_.add_variable(VariableId{VarKind::Point, obs->track}, *x);
        point_vars_[obs->track] = id;
        for (const auto& [frame, px] : pending) {
          graph_.add_factor(make_reprojection(id, pose_id(frame), ds_.camera, px, cfg_.noise.pixel_sigma, reproj_loss_));
        }
        pending_points_.erase(obs->track);
      }
    }
  }

  NoiseModel plane_noise() const { return NoiseModel::diagonal(cfg_.noise.plane_sigmas); }

  void add_planes(int f) {
    std::vector<MapPlane> map;
    for (std::size_t i = 0; i < planes_.size(); ++i) {
      map.push_back({static_cast<int>(i), world_plane(planes_[i]), planes_[i].tracks});
    }
    for (const PlaneObservation* obs : planes_obs_[f]) {
      const MatchDecision d = match_planes({obs->plane, obs->inlier_tracks}, map, pose(f), cfg_.assoc);
      if (d.decision == Decision::Matched) {
        PlaneLandmark& pl = planes_[d.landmark];
        graph_.add_factor(make_plane_observation(pl.var, pose_id(pl.anchor), pose_id(f), obs->plane, plane_noise()));
        pl.tracks.insert(obs->inlier_tracks.begin(), obs->inlier_tracks.end());
      } else if (d.decision == Decision::New) {
        PlaneLandmark pl;
        pl.var = graph_.add_variable(obs->plane);
        pl.anchor = f;
        pl.tracks.insert(obs->inlier_tracks.begin(), obs->inlier_tracks.end());
        graph_.add_factor(make_plane_observation(pl.var, pose_id(f), pose_id(f), obs->plane, plane_noise()));
        if (uses_manhattan(cfg_.mode)) add_manhattan(pl);
        planes_.push_back(std::move(pl));
      }
    }
  }

  void add_manhattan(const PlaneLandmark& fresh) {
    const Eigen::Vector3d n = world_plane(fresh).normal();
    for (const PlaneLandmark& other : planes_) {
      const double c = std::abs(n.dot(world_plane(other).normal()));
      if (c > std::cos(cfg_.manhattan_tol)) {
        graph_.add_factor(make_parallel(fresh.var, pose_id(fresh.anchor), other.var, pose_id(other.anchor),
                                        cfg_.noise.sigma_par));
      } else if (c < std::sin(cfg_.manhattan_tol)) {
        graph_.add_factor(make_perpendicular(fresh.var, pose_id(fresh.anchor), other.var, pose_id(other.anchor),
                                             cfg_.noise.sigma_per));
      }
    }
  }

  void link_points_to_planes() {
    for (PlaneLandmark& pl : planes_) {
      const Plane plane = world_plane(pl);
      std::vector<std::pair<int, Eigen::Vector3d>> candidates;
      for (int t : pl.tracks) {
        if (pl.linked.count(t)) continue;
        const auto it = point_vars_.find(t);
        if (it != point_vars_.end()) candidates.emplace_back(t, graph_.get<Eigen::Vector3d>(it->second));
      }
      for (int t : associate_points_to_plane(candidates, pl.tracks, plane, cfg_.point_plane_tol)) {
        graph_.add_factor(make_point_plane(point_vars_.at(t), pl.var, pose_id(pl.anchor), cfg_.noise.sigma_d));
        pl.linked.insert(t);
      }
    }
  }

  // Image position of a track in frame f: the observed keypoint when there is
  // one, else the projection of its mapped point.
  std::optional<Eigen::Vector2d> keypoint(int f, int track) const {
    const auto it = pixels_.find({f, track});
    if (it != pixels_.end()) return it->second;
    const auto v = point_vars_.find(track);
    if (v == point_vars_.end()) return std::nullopt;
    try {
      return project_point(graph_.get<Eigen::Vector3d>(v->second), ds_.camera, pose(f));
    } catch (const BehindCamera&) {
      return std::nullopt;
    }
  }

  void add_quadric_factor(const QuadricLandmark& q, const ObjectObservation& obs) {
    graph_.add_factor(make_quadric_observation(q.var, pose_id(q.anchor), pose_id(obs.frame), ds_.camera, obs.box,
                                               cfg_.noise.iou_sigma_scale, Huber{cfg_.noise.huber_width}));
  }

  void add_objects(int f) {
    std::vector<const ObjectObservation*> dets;
    std::vector<BBox> boxes;
    for (const ObjectObservation* o : objects_obs_[f]) {
      if (o->box.score < cfg_.assoc.score_min) continue;
      dets.push_back(o);
      boxes.push_back(o->box);
    }
    std::vector<ObjectCandidate> candidates;
    for (std::size_t i = 0; i < quadrics_.size(); ++i) {
      if (!quadric_in_front(world_quadric(quadrics_[i]), pose(f), cfg_.assoc)) continue;
      ObjectCandidate c{static_cast<int>(i), {}};
      for (int t : quadrics_[i].tracks) {
        if (const auto k = keypoint(f, t)) c.keypoints.push_back(*k);
      }
      candidates.push_back(std::move(c));
    }
    const std::vector<MatchDecision> decisions = match_objects(boxes, candidates, cfg_.assoc);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const ObjectObservation& obs = *dets[i];
      if (decisions[i].decision == Decision::Matched) {
        QuadricLandmark& q = quadrics_[decisions[i].landmark];
        add_quadric_factor(q, obs);
        q.tracks.insert(obs.tracks.begin(), obs.tracks.end());
      } else if (decisions[i].decision == Decision::New) {
        add_pending_object(f, obs);
      }
    }
  }

  void add_pending_object(int f, const ObjectObservation& obs) {
    PendingObject* target = nullptr;
    int best = cfg_.assoc.th_high - 1;
    for (PendingObject& p : pending_objects_) {
      if (p.views.back()->frame == f) continue;
      int common = 0;
      for (int t : p.tracks) {
        const auto k = keypoint(f, t);
        common += (k && obs.box.contains(k->x(), k->y())) ? 1 : 0;
      }
      if (common > best) {
        best = common;
        target = &p;
      }
    }
    if (!target) {
      pending_objects_.push_back({{&obs}, std::set<int>(obs.tracks.begin(), obs.tracks.end())});
      return;
    }
    target->views.push_back(&obs);
    target->tracks.insert(obs.tracks.begin(), obs.tracks.end());

    std::vector<ObjectView> views;
    for (const ObjectObservation* v : target->views) views.push_back({v->box, pose(v->frame)});
    const auto q_world = init_quadric(views, ds_.camera, std::nullopt, cfg_.object_min_baseline);
    if (!q_world) return;

    QuadricLandmark q;
    q.anchor = target->views.front()->frame;
    q.var = graph_.add_variable(q_world->transformed(pose(q.anchor).inverse()));
    q.class_id = obs.box.class_id;
    q.tracks = target->tracks;
    for (const ObjectObservation* v : target->views) {
      add_quadric_factor(q, *v);
      if (q.cloud_file.empty() && !v->cloud_file.empty() && clouds_.count(v->cloud_file)) q.cloud_file = v->cloud_file;
    }
    quadrics_.push_back(std::move(q));
    pending_objects_.erase(pending_objects_.begin() + (target - pending_objects_.data()));
  }

  // Tangency with the closest plane whose gap to the ellipsoid is small, and
  // the shape prior re-registered to the current estimate.
  void refresh_object_priors() {
    if (!uses_support(cfg_.mode)) return;
    for (QuadricLandmark& q : quadrics_) {
      const DualQuadric qw = world_quadric(q);
      if (q.support < 0) {
        const Eigen::Matrix3d r = qw.frame().rotation();
        const Eigen::Matrix3d m = r * qw.semi_axes().cwiseAbs2().asDiagonal() * r.transpose();
        double best = cfg_.support_tol;
        for (std::size_t i = 0; i < planes_.size(); ++i) {
          const Plane p = world_plane(planes_[i]);
          const double side = std::abs(p.normal().dot(qw.center()) + p.distance());
          const double gap = std::abs(side - std::sqrt(p.normal().dot(m * p.normal())));
          if (gap < best) {
            best = gap;
            q.support = static_cast<int>(i);
          }
        }
        if (q.support >= 0) {
          const PlaneLandmark& pl = planes_[q.support];
          graph_.add_factor(
              make_tangency(pl.var, pose_id(pl.anchor), q.var, pose_id(q.anchor), cfg_.noise.sigma_t));
        }
      }
      if (!q.cloud_file.empty()) {
        const DualQuadric& local = graph_.get<DualQuadric>(q.var);
        Eigen::Vector3d half;
        try {
          const Registration reg = register_pointcloud(clouds_.at(q.cloud_file), local);
          half = model_cuboid(reg.cloud, local).half_extents;
        } catch (const DegenerateInput&) {
          continue;
        }
        const Factor prior = make_shape_prior(q.var, half, cfg_.noise.sigma_p);
        if (q.shape_factor) {
          graph_.replace_factor(*q.shape_factor, prior);
        } else {
          q.shape_factor = graph_.add_factor(prior);
        }
      }
    }
  }

  static bool touches_quadric(const Factor& f) {
    return std::any_of(f.vars.begin(), f.vars.end(), [](const VariableId& id) { return id.kind == VarKind::Quadric; });
  }

  // Solves the factors selected by `with_objects` (those touching a quadric,
  // or all the others) on a copy of the graph. Without objects everything is
  // free; with objects only the quadrics move. Returns false on numerical
  // failure.
  bool solve_part(bool with_objects, int max_iterations) {
    FactorGraph sub;
    for (const Factor& f : graph_.factors()) {
      if (touches_quadric(f) != with_objects) continue;
      for (const VariableId& id : f.vars) {
        if (sub.contains(id)) continue;
        sub.add_variable(id, graph_.value(id));
        if (graph_.is_fixed(id) || (with_objects && id.kind != VarKind::Quadric)) sub.fix(id);
      }
      sub.add_factor(f);
    }
    if (sub.factors().empty()) return true;
    OptimizerConfig oc = cfg_.optimizer;
    oc.max_iterations = max_iterations;
    oc.keep_active = with_objects;
    const OptimizeReport r = optimize(sub, oc);
    iterations_ += r.iterations;
    if (r.status == OptimizerStatus::NumericalFailure) {
      last_ = r;
      return false;
    }
    for (const auto& [id, v] : sub.values()) {
      if (!sub.is_fixed(id)) graph_.set_value(id, v);
    }
    return true;
  }

  void batch() {
    if (!quadrics_.empty()) {
      // Staged solve: the map without objects, then the objects alone
      // against it, then everything jointly. Starting jointly lets badly
      // initialized quadrics drag the poses (and the map scale) with them.
      // Support and shape priors are attached once the quadrics fit their
      // boxes, and re-registered after each object solve.
      if (!solve_part(false, cfg_.optimizer.max_iterations)) return;
      if (!solve_part(true, cfg_.object_iterations)) return;
      for (int round = 0; round < kPriorRounds; ++round) {
        refresh_object_priors();
        if (!solve_part(true, cfg_.object_iterations)) return;
      }
    }
    // Box factors have no gradient once overlap is lost, so steps that would
    // drop one are refused whenever objects are in the graph.
    OptimizerConfig oc = cfg_.optimizer;
    oc.keep_active = !quadrics_.empty();
    last_ = optimize(graph_, oc);
    iterations_ += last_.iterations;
    if (uses_support(cfg_.mode) && !quadrics_.empty() && last_.status != OptimizerStatus::NumericalFailure) {
      refresh_object_priors();
      last_ = optimize(graph_, oc);
      iterations_ += last_.iterations;
    }
  }

  PipelineResult finish() {
    PipelineResult out;
    Solution& s = out.solution;
    s.mode = to_string(cfg_.mode);
    s.status = to_string(last_.status);
    s.iterations = iterations_;
    s.initial_cost = last_.initial_cost;
    s.final_cost = last_.final_cost;
    s.factor_counts = graph_.factor_counts();
    for (std::size_t f = 0; f < ds_.keyframes.size(); ++f) s.poses.emplace_back(static_cast<int>(f), pose(f));
    for (const auto& [track, id] : point_vars_) s.points.emplace_back(track, graph_.get<Eigen::Vector3d>(id));
    for (std::size_t i = 0; i < planes_.size(); ++i) {
      s.planes.push_back({static_cast<int>(i), world_plane(planes_[i]), planes_[i].anchor,
                          std::vector<int>(planes_[i].tracks.begin(), planes_[i].tracks.end())});
    }
    for (std::size_t i = 0; i < quadrics_.size(); ++i) {
      s.quadrics.push_back({static_cast<int>(i), world_quadric(quadrics_[i]), quadrics_[i].anchor,
                            quadrics_[i].class_id, quadrics_[i].support});
    }
    out.last_report = last_;
    out.graph = graph_;
    return out;
  }

  const Dataset& ds_;
  RunConfig cfg_;
  FactorGraph graph_;
  Huber reproj_loss_;
  std::vector<std::vector<const PointObservation*>> points_;
  std::vector<std::vector<const PlaneObservation*>> planes_obs_;
  std::vector<std::vector<const ObjectObservation*>> objects_obs_;
  std::map<std::pair<int, int>, Eigen::Vector2d> pixels_;
  std::map<std::string, std::vector<Eigen::Vector3d>> clouds_;
  std::map<int, VariableId> point_vars_;
  std::map<int, std::vector<std::pair<int, Eigen::Vector2d>>> pending_points_;
  std::vector<PlaneLandmark> planes_;
  std::vector<QuadricLandmark> quadrics_;
  std::vector<PendingObject> pending_objects_;
  OptimizeReport last_;
  int iterations_ = 0;
};

}  // namespace

PipelineResult run_pipeline(const Dataset& ds, const RunConfig& cfg) { return Pipeline(ds, cfg).run(); }

// --- solution files -----------------------------------------------------------

namespace {

using json = nlohmann::json;

template <typename Vec>
json arr(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != N) throw std::runtime_error(std::string("bad field ") + key);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = a.at(i).get<double>();
  return v;
}

}  // namespace

void write_solution(const Solution& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kSolutionFileName);
  if (!out) throw std::runtime_error("cannot write " + (dir / kSolutionFileName).string());
  json counts = json::object();
  for (int k = 0; k < kFactorKindCount; ++k) counts[std::string(to_string(static_cast<FactorKind>(k)))] = s.factor_counts[k];
  out << json{{"format_version", 1},        {"mode", s.mode},           {"status", s.status},
              {"iterations", s.iterations}, {"initial_cost", s.initial_cost}, {"final_cost", s.final_cost},
              {"factor_counts", counts}}
             .dump()
      << '\n';
  for (const auto& [id, p] : s.poses) out << json{{"type", "pose"}, {"id", id}, {"pose", arr(pose_log(p))}}.dump() << '\n';
  for (const auto& [id, x] : s.points) out << json{{"type", "point"}, {"id", id}, {"xyz", arr(x)}}.dump() << '\n';
  for (const auto& p : s.planes) {
    out << json{{"type", "plane"}, {"id", p.id}, {"coeffs", arr(p.plane.coeffs())}, {"anchor", p.anchor}, {"tracks", p.tracks}}
               .dump()
        << '\n';
  }
  for (const auto& q : s.quadrics) {
    out << json{{"type", "quadric"},
                {"id", q.id},
                {"frame", arr(pose_log(q.quadric.frame()))},
                {"log_semi_axes", arr(q.quadric.log_semi_axes())},
                {"anchor", q.anchor},
                {"class", q.class_id},
                {"support", q.support}}
               .dump()
        << '\n';
  }
}

Solution read_solution(const std::filesystem::path& dir) {
  const auto file = dir / kSolutionFileName;
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string(), 0);
  Solution s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (line_no == 1) {
        if (j.at("format_version").get<int>() != 1) throw std::runtime_error("unsupported solution version");
        s.mode = j.at("mode").get<std::string>();
        s.status = j.at("status").get<std::string>();
        s.iterations = j.at("iterations").get<int>();
        s.initial_cost = j.at("initial_cost").get<double>();
        s.final_cost = j.at("final_cost").get<double>();
        for (int k = 0; k < kFactorKindCount; ++k) {
          s.factor_counts[k] = j.at("factor_counts").value(std::string(to_string(static_cast<FactorKind>(k))), 0);
        }
        continue;
      }
      const std::string type = j.at("type").get<std::string>();
      if (type == "pose") {
        s.poses.emplace_back(j.at("id").get<int>(), normalized(se3_exp<double>(read_vec<6>(j, "pose"))));
      } else if (type == "point") {
        s.points.emplace_back(j.at("id").get<int>(), read_vec<3>(j, "xyz"));
      } else if (type == "plane") {
        s.planes.push_back({j.at("id").get<int>(), make_plane(read_vec<4>(j, "coeffs")), j.at("anchor").get<int>(),
                            j.at("tracks").get<std::vector<int>>()});
      } else if (type == "quadric") {
        s.quadrics.push_back({j.at("id").get<int>(),
                              DualQuadric(normalized(se3_exp<double>(read_vec<6>(j, "frame"))), read_vec<3>(j, "log_semi_axes")),
                              j.at("anchor").get<int>(), j.at("class").get<int>(), j.at("support").get<int>()});
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  if (line_no == 0) throw FormatError("empty solution file", 1);
  return s;
}

}  // namespace semslam
