#include "support.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "semslam/factors/factor.hpp"

namespace testing {

double union_area(const semslam::BBox& a, const semslam::BBox& b) {
  std::vector<double> xs{a.x_min, a.x_max, b.x_min, b.x_max}, ys{a.y_min, a.y_max, b.y_min, b.y_max};
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double u = 0.5 * (xs[i] + xs[i + 1]), v = 0.5 * (ys[j] + ys[j + 1]);
      if (a.contains(u, v) || b.contains(u, v)) total += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
    }
  }
  return total;
}

using namespace semslam;

GtGraph build_gt_graph(const Dataset& ds, const GroundTruth& gt, bool objects) {
  GtGraph out;
  FactorGraph& g = out.graph;
  const auto pose_id = [](int f) { return VariableId{VarKind::Pose, f}; };
  for (const auto& kf : ds.keyframes) g.add_variable(pose_id(kf.id), kf.gt_pose);
  g.fix(pose_id(ds.keyframes.front().id));
  for (std::size_t k = 1; k < ds.keyframes.size(); ++k) {
    g.add_factor(make_between(pose_id(ds.keyframes[k - 1].id), pose_id(ds.keyframes[k].id), ds.keyframes[k].odom,
                              NoiseModel::isotropic(6, 0.01)));
  }
  const auto pose_of = [&](int f) { return g.get<Pose>(pose_id(f)); };

  std::map<int, VariableId> point_var;
  for (const auto& o : ds.points) {
    if (!point_var.count(o.gt_id)) {
      point_var[o.gt_id] = g.add_variable(VariableId{VarKind::Point, o.gt_id}, gt.points[o.gt_id]);
    }
    g.add_factor(make_reprojection(point_var.at(o.gt_id), pose_id(o.frame), ds.camera, o.pixel, 1.0));
  }

  std::map<int, VariableId> plane_var;
  for (const auto& o : ds.planes) {
    if (!plane_var.count(o.gt_id)) {
      out.plane_anchor[o.gt_id] = o.frame;
      plane_var[o.gt_id] = g.add_variable(VariableId{VarKind::Plane, o.gt_id},
                                          transform_plane(gt.planes[o.gt_id], pose_of(o.frame).inverse()));
    }
    g.add_factor(make_plane_observation(plane_var.at(o.gt_id), pose_id(out.plane_anchor.at(o.gt_id)),
                                        pose_id(o.frame), o.plane, NoiseModel::isotropic(3, 0.01)));
  }
  for (const auto& [j, var] : point_var) {
    for (const auto& [i, pv] : plane_var) {
      const Plane& p = gt.planes[i];
      if (std::abs(p.normal().dot(gt.points[j]) + p.distance()) < 1e-9) {
        g.add_factor(make_point_plane(var, pv, pose_id(out.plane_anchor.at(i)), 0.02));
      }
    }
  }
  for (const auto& [a, b] : gt.parallel) {
    if (!plane_var.count(a) || !plane_var.count(b)) continue;
    g.add_factor(make_parallel(plane_var.at(a), pose_id(out.plane_anchor.at(a)), plane_var.at(b),
                               pose_id(out.plane_anchor.at(b)), 0.01));
  }
  for (const auto& [a, b] : gt.perpendicular) {
    if (!plane_var.count(a) || !plane_var.count(b)) continue;
    g.add_factor(make_perpendicular(plane_var.at(a), pose_id(out.plane_anchor.at(a)), plane_var.at(b),
                                    pose_id(out.plane_anchor.at(b)), 0.01));
  }
  if (!objects) return out;

  std::map<int, VariableId> quadric_var;
  for (const auto& o : ds.objects) {
    if (!quadric_var.count(o.gt_id)) {
      out.quadric_anchor[o.gt_id] = o.frame;
      quadric_var[o.gt_id] = g.add_variable(VariableId{VarKind::Quadric, o.gt_id},
                                            gt.quadrics[o.gt_id].transformed(pose_of(o.frame).inverse()));
    }
    g.add_factor(make_quadric_observation(quadric_var.at(o.gt_id), pose_id(out.quadric_anchor.at(o.gt_id)),
                                          pose_id(o.frame), ds.camera, o.box, 0.05));
  }
  for (const auto& [q, p] : gt.supports) {
    if (!quadric_var.count(q) || !plane_var.count(p)) continue;
    g.add_factor(make_tangency(plane_var.at(p), pose_id(out.plane_anchor.at(p)), quadric_var.at(q),
                               pose_id(out.quadric_anchor.at(q)), 0.05));
  }
  // Exact model extents; the sampled clouds only approximate them.
  for (const auto& [k, var] : quadric_var) {
    g.add_factor(make_shape_prior(var, quadric_cuboid(gt.quadrics[k]).half_extents, 0.1));
  }
  return out;
}

std::vector<std::pair<FactorKind, int>> smooth_factor_kinds() {
  return {{FactorKind::PointReprojection, 2}, {FactorKind::PointPlane, 3},   {FactorKind::PlaneParallel, 4},
          {FactorKind::PlanePerpendicular, 4}, {FactorKind::Tangency, 4},   {FactorKind::PlaneObservation, 3},
          {FactorKind::PlaneObservation, 2},   {FactorKind::Between, 2}};
}

FactorCase random_factor_case(FactorKind kind, int slots, Rng& rng) {
  const VariableId x{VarKind::Point, 0}, pl{VarKind::Plane, 0}, pl2{VarKind::Plane, 1}, q{VarKind::Quadric, 0};
  const VariableId a{VarKind::Pose, 0}, b{VarKind::Pose, 1};
  FactorCase c;
  switch (kind) {
    case FactorKind::PointReprojection: {
      const Pose cam = random_pose(rng);
      const Eigen::Vector3d local(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 1, 5));
      const Eigen::Vector2d pixel(uniform(rng, 0, 640), uniform(rng, 0, 480));
      c.factor = make_reprojection(x, a, Camera{}, pixel, 1.0);
      c.values = {Eigen::Vector3d(cam * local), cam};
      break;
    }
    case FactorKind::PointPlane:
      c.factor = make_point_plane(x, pl, a, 0.02);
      c.values = {uniform3(rng, -2, 2), random_plane(rng), random_pose(rng)};
      break;
    case FactorKind::PlaneParallel:
      c.factor = make_parallel(pl, a, pl2, b, 0.01);
      c.values = {random_plane(rng), random_pose(rng), random_plane(rng), random_pose(rng)};
      break;
    case FactorKind::PlanePerpendicular:
      c.factor = make_perpendicular(pl, a, pl2, b, 0.01);
      c.values = {random_plane(rng), random_pose(rng), random_plane(rng), random_pose(rng)};
      break;
    case FactorKind::Tangency:
      c.factor = make_tangency(pl, a, q, b, 0.05);
      c.values = {random_plane(rng), random_pose(rng), random_quadric(rng), random_pose(rng)};
      break;
    case FactorKind::PlaneObservation: {
      const Plane plane = random_plane(rng);
      const Pose ref = random_pose(rng), cam = slots == 3 ? random_pose(rng) : Pose::Identity();
      const Plane predicted = transform_plane(plane, cam.inverse() * ref);
      const Plane observed = plane_retract(predicted, uniform3(rng, -0.3, 0.3));
      const NoiseModel noise = NoiseModel::diagonal(Eigen::Vector3d(0.01, 0.01, 0.05));
      if (slots == 3) {
        c.factor = make_plane_observation(pl, a, b, observed, noise);
        c.values = {plane, ref, cam};
      } else {
        c.factor = make_plane_observation(pl, a, a, observed, noise);
        c.values = {plane, ref};
      }
      break;
    }
    case FactorKind::Between: {
      const Pose pi = random_pose(rng), pj = random_pose(rng);
      Vector6d noise;
      for (int k = 0; k < 6; ++k) noise(k) = uniform(rng, -0.3, 0.3);
      c.factor = make_between(a, b, pose_retract(pi.inverse() * pj, noise), NoiseModel::isotropic(6, 0.01));
      c.values = {pi, pj};
      break;
    }
    default:
      throw std::invalid_argument("random_factor_case: not a smooth kind");
  }
  return c;
}

std::vector<Eigen::MatrixXd> central_differences(const FactorCase& c, double step) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t s = 0; s < c.values.size(); ++s) {
    const int dim = tangent_dim(kind_of(c.values[s]));
    Eigen::MatrixXd j(c.factor.residual_dim(), dim);
    for (int k = 0; k < dim; ++k) {
      FactorCase plus = c, minus = c;
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(dim, k) * step;
      plus.values[s] = retract(c.values[s], e);
      minus.values[s] = retract(c.values[s], -e);
      j.col(k) = (evaluate_residual(c.factor, plus.refs()) - evaluate_residual(c.factor, minus.refs())) / (2 * step);
    }
    out.push_back(j);
  }
  return out;
}

double jacobian_relative_error(const FactorCase& c) {
  const auto analytic = analytic_jacobian(c.factor, c.refs());
  if (!analytic) return std::numeric_limits<double>::infinity();
  const auto fd = central_differences(c);
  double worst = 0.0;
  for (std::size_t s = 0; s < fd.size(); ++s) {
    const double scale = std::max((*analytic)[s].norm(), 1.0);
    worst = std::max(worst, ((*analytic)[s] - fd[s]).norm() / scale);
  }
  return worst;
}

}  // namespace testing
