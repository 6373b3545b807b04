#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "semslam/errors.hpp"
#include "semslam/factors/factor.hpp"
#include "semslam/factors/residuals.hpp"
#include "semslam/geometry/projection.hpp"

namespace semslam {

// ---------------------------------------------------------------------------
// Variables

std::string to_string(VarKind kind) {
  switch (kind) {
    case VarKind::Pose: return "pose";
    case VarKind::Point: return "point";
    case VarKind::Plane: return "plane";
    case VarKind::Quadric: return "quadric";
  }
  return "unknown";
}

int tangent_dim(VarKind kind) {
  switch (kind) {
    case VarKind::Pose: return 6;
    case VarKind::Point: return 3;
    case VarKind::Plane: return 3;
    case VarKind::Quadric: return 9;
  }
  return 0;
}

Value retract(const Value& value, const Eigen::VectorXd& delta) {
  if (delta.size() != tangent_dim(kind_of(value))) throw std::invalid_argument("retract: wrong tangent size");
  switch (kind_of(value)) {
    case VarKind::Pose: return normalized(pose_retract(std::get<Pose>(value), Vector6d(delta)));
    case VarKind::Point:
      if (!delta.allFinite()) throw std::invalid_argument("retract: non-finite delta");
      return Eigen::Vector3d(std::get<Eigen::Vector3d>(value) + delta);
    case VarKind::Plane: return plane_retract(std::get<Plane>(value), Eigen::Vector3d(delta));
    case VarKind::Quadric: return quadric_retract(std::get<DualQuadric>(value), Vector9d(delta));
  }
  return value;
}

bool is_valid(const Value& value) {
  switch (kind_of(value)) {
    case VarKind::Pose: return std::get<Pose>(value).is_valid();
    case VarKind::Point: return std::get<Eigen::Vector3d>(value).allFinite();
    case VarKind::Plane: {
      const auto& c = std::get<Plane>(value).coeffs();
      return c.allFinite() && std::abs(c.head<3>().norm() - 1.0) <= 1e-9;
    }
    case VarKind::Quadric: return is_valid(std::get<DualQuadric>(value));
  }
  return false;
}

// ---------------------------------------------------------------------------
// Residuals on plain doubles

Eigen::Vector2d point_reprojection(const Eigen::Vector3d& x, const Pose& camera_pose, const Camera& cam,
                                   const Eigen::Vector2d& pixel) {
  return project_point(x, cam, camera_pose) - pixel;
}

BBox predicted_bbox(const DualQuadric& quadric_ref, const Pose& ref_pose, const Pose& camera_pose,
                    const Camera& cam) {
  const DualQuadric in_world = quadric_ref.transformed(ref_pose);
  return conic_to_bbox(project_quadric(in_world, cam, camera_pose));
}

double quadric_observation(const DualQuadric& quadric_ref, const Pose& ref_pose, const Pose& camera_pose,
                           const Camera& cam, const BBox& observed) {
  return 1.0 - bbox_iou(predicted_bbox(quadric_ref, ref_pose, camera_pose, cam), observed);
}

double shape_prior(const DualQuadric& q, const Cuboid& model) {
  return 1.0 - cuboid_iou(quadric_cuboid(q), model);
}

// ---------------------------------------------------------------------------
// Factor construction

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::PointReprojection: return "point_reprojection";
    case FactorKind::PointPlane: return "point_plane";
    case FactorKind::PlaneParallel: return "plane_parallel";
    case FactorKind::PlanePerpendicular: return "plane_perpendicular";
    case FactorKind::Tangency: return "tangency";
    case FactorKind::PlaneObservation: return "plane_observation";
    case FactorKind::QuadricObservation: return "quadric_observation";
    case FactorKind::ShapePrior: return "shape_prior";
    case FactorKind::Between: return "between";
  }
  return "unknown";
}

int Factor::residual_dim() const {
  switch (kind()) {
    case FactorKind::PointReprojection: return 2;
    case FactorKind::PlaneObservation: return 3;
    case FactorKind::Between: return 6;
    default: return 1;
  }
}

namespace {

using VK = VarKind;

std::vector<std::vector<VK>> allowed_slots(FactorKind kind) {
  switch (kind) {
    case FactorKind::PointReprojection: return {{VK::Point, VK::Pose}};
    case FactorKind::PointPlane: return {{VK::Point, VK::Plane, VK::Pose}};
    case FactorKind::PlaneParallel:
    case FactorKind::PlanePerpendicular: return {{VK::Plane, VK::Pose, VK::Plane, VK::Pose}};
    case FactorKind::Tangency: return {{VK::Plane, VK::Pose, VK::Quadric, VK::Pose}};
    case FactorKind::PlaneObservation: return {{VK::Plane, VK::Pose, VK::Pose}, {VK::Plane, VK::Pose}};
    case FactorKind::QuadricObservation: return {{VK::Quadric, VK::Pose, VK::Pose}, {VK::Quadric, VK::Pose}};
    case FactorKind::ShapePrior: return {{VK::Quadric}};
    case FactorKind::Between: return {{VK::Pose, VK::Pose}};
  }
  return {};
}

Factor finish(Factor f) {
  check_factor(f);
  return f;
}

// Observation factors whose reference keyframe is the observer are binary.
std::vector<VariableId> observation_slots(VariableId landmark, VariableId reference, VariableId camera) {
  if (reference == camera) return {landmark, camera};
  return {landmark, reference, camera};
}

}  // namespace

void check_factor(const Factor& f) {
  bool ok = false;
  for (const auto& slots : allowed_slots(f.kind())) {
    if (slots.size() != f.vars.size()) continue;
    ok = true;
    for (std::size_t i = 0; i < slots.size(); ++i) ok = ok && slots[i] == f.vars[i].kind;
    if (ok) break;
  }
  if (!ok) throw std::invalid_argument(std::string("factor ") + std::string(to_string(f.kind())) +
                                       ": variable kinds do not match");
  if (f.noise.dim() != f.residual_dim()) throw std::invalid_argument("factor: noise dimension mismatch");
}

Factor make_reprojection(VariableId point, VariableId pose, const Camera& cam, const Eigen::Vector2d& pixel,
                         double pixel_sigma, std::optional<Huber> loss) {
  if (!pixel.allFinite()) throw std::invalid_argument("reprojection: non-finite pixel");
  return finish({{point, pose}, ReprojectionMeasurement{cam, pixel}, NoiseModel::isotropic(2, pixel_sigma), loss});
}

Factor make_point_plane(VariableId point, VariableId plane, VariableId anchor, double sigma) {
  return finish({{point, plane, anchor}, PointPlaneMeasurement{}, NoiseModel::isotropic(1, sigma), std::nullopt});
}

Factor make_parallel(VariableId plane_a, VariableId anchor_a, VariableId plane_b, VariableId anchor_b, double sigma) {
  return finish({{plane_a, anchor_a, plane_b, anchor_b},
                 ParallelMeasurement{},
                 NoiseModel::isotropic(1, sigma),
                 std::nullopt});
}

Factor make_perpendicular(VariableId plane_a, VariableId anchor_a, VariableId plane_b, VariableId anchor_b,
                          double sigma) {
  return finish({{plane_a, anchor_a, plane_b, anchor_b},
                 PerpendicularMeasurement{},
                 NoiseModel::isotropic(1, sigma),
                 std::nullopt});
}

Factor make_tangency(VariableId plane, VariableId plane_anchor, VariableId quadric, VariableId quadric_anchor,
                     double sigma) {
  return finish({{plane, plane_anchor, quadric, quadric_anchor},
                 TangencyMeasurement{},
                 NoiseModel::isotropic(1, sigma),
                 std::nullopt});
}

Factor make_plane_observation(VariableId plane, VariableId reference, VariableId camera, const Plane& observed,
                              const NoiseModel& noise) {
  if (!observed.coeffs().allFinite()) throw std::invalid_argument("plane observation: non-finite plane");
  return finish({observation_slots(plane, reference, camera), PlaneObservationMeasurement{observed}, noise,
                 std::nullopt});
}

Factor make_quadric_observation(VariableId quadric, VariableId reference, VariableId camera, const Camera& cam,
                                const BBox& box, double sigma_scale, std::optional<Huber> loss) {
  if (!box.is_valid()) throw std::invalid_argument("quadric observation: invalid box");
  const double score = std::max(box.score, 1e-6);
  return finish({observation_slots(quadric, reference, camera), QuadricObservationMeasurement{cam, box},
                 NoiseModel::isotropic(1, sigma_scale / std::sqrt(score)), loss});
}

Factor make_shape_prior(VariableId quadric, const Eigen::Vector3d& model_half_extents, double sigma) {
  if (!model_half_extents.allFinite() || (model_half_extents.array() <= 0.0).any()) {
    throw std::invalid_argument("shape prior: half extents must be positive");
  }
  return finish({{quadric}, ShapePriorMeasurement{model_half_extents}, NoiseModel::isotropic(1, sigma), std::nullopt});
}

Factor make_between(VariableId pose_i, VariableId pose_j, const Pose& measured, const NoiseModel& noise) {
  return finish({{pose_i, pose_j}, BetweenMeasurement{measured}, noise, std::nullopt});
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

const Pose& pose_at(ValueRefs v, std::size_t i) { return std::get<Pose>(*v[i]); }
const Eigen::Vector3d& point_at(ValueRefs v, std::size_t i) { return std::get<Eigen::Vector3d>(*v[i]); }
const Plane& plane_at(ValueRefs v, std::size_t i) { return std::get<Plane>(*v[i]); }
const DualQuadric& quadric_at(ValueRefs v, std::size_t i) { return std::get<DualQuadric>(*v[i]); }

// Reference and camera poses of an observation factor (binary form: the
// landmark lives in the camera frame itself).
std::pair<Pose, Pose> observation_poses(ValueRefs v) {
  if (v.size() == 2) return {Pose::Identity(), Pose::Identity()};
  return {pose_at(v, 1), pose_at(v, 2)};
}

Cuboid model_box(const DualQuadric& q, const Eigen::Vector3d& half) {
  return Cuboid{q.center(), q.frame().rotation(), half / half.maxCoeff()};
}

}  // namespace

Eigen::VectorXd evaluate_residual(const Factor& f, ValueRefs v) {
  if (v.size() != f.vars.size()) throw std::invalid_argument("evaluate_residual: slot count mismatch");
  Eigen::VectorXd r(f.residual_dim());
  switch (f.kind()) {
    case FactorKind::PointReprojection: {
      const auto& m = std::get<ReprojectionMeasurement>(f.measurement);
      r = point_reprojection(point_at(v, 0), pose_at(v, 1), m.camera, m.pixel);
      break;
    }
    case FactorKind::PointPlane:
      r(0) = point_plane<double>(point_at(v, 0), transform_plane<double>(plane_at(v, 1), pose_at(v, 2)));
      break;
    case FactorKind::PlaneParallel:
      r(0) = plane_parallel<double>(transform_plane<double>(plane_at(v, 0), pose_at(v, 1)),
                                    transform_plane<double>(plane_at(v, 2), pose_at(v, 3)));
      break;
    case FactorKind::PlanePerpendicular:
      r(0) = plane_perpendicular<double>(transform_plane<double>(plane_at(v, 0), pose_at(v, 1)),
                                         transform_plane<double>(plane_at(v, 2), pose_at(v, 3)));
      break;
    case FactorKind::Tangency:
      r(0) = tangency<double>(transform_plane<double>(plane_at(v, 0), pose_at(v, 1)),
                              quadric_at(v, 2).transformed(pose_at(v, 3)));
      break;
    case FactorKind::PlaneObservation: {
      const auto& m = std::get<PlaneObservationMeasurement>(f.measurement);
      const auto [ref, cam] = observation_poses(v);
      r = plane_observation<double>(plane_at(v, 0), ref, cam, m.observed);
      break;
    }
    case FactorKind::QuadricObservation: {
      const auto& m = std::get<QuadricObservationMeasurement>(f.measurement);
      const auto [ref, cam] = observation_poses(v);
      r(0) = quadric_observation(quadric_at(v, 0), ref, cam, m.camera, m.box);
      break;
    }
    case FactorKind::ShapePrior: {
      const auto& m = std::get<ShapePriorMeasurement>(f.measurement);
      const DualQuadric& q = quadric_at(v, 0);
      // The cloud carries no axis labels: take the best axis correspondence.
      std::array<int, 3> perm{0, 1, 2};
      r(0) = std::numeric_limits<double>::infinity();
      do {
        const Eigen::Vector3d h(m.model_half_extents(perm[0]), m.model_half_extents(perm[1]),
                                m.model_half_extents(perm[2]));
        r(0) = std::min(r(0), shape_prior(q, model_box(q, h)));
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case FactorKind::Between: {
      const auto& m = std::get<BetweenMeasurement>(f.measurement);
      r = pose_between<double>(pose_at(v, 0), pose_at(v, 1), m.measured);
      break;
    }
  }
  return r;
}

namespace {

// --- forward-mode helpers ---------------------------------------------------

template <int N, int D>
Eigen::Matrix<Jet<N>, D, 1> seeded(int offset) {
  Eigen::Matrix<Jet<N>, D, 1> d;
  for (int i = 0; i < D; ++i) d(i) = Jet<N>(0.0, N, offset + i);
  return d;
}

template <int N>
PoseT<Jet<N>> jet_pose(const Pose& p, int offset) {
  return pose_retract<Jet<N>>(p.cast<Jet<N>>(), seeded<N, 6>(offset));
}

template <int N>
PlaneT<Jet<N>> jet_plane(const Plane& p, int offset) {
  return plane_retract<Jet<N>>(p.cast<Jet<N>>(), seeded<N, 3>(offset));
}

template <int N>
DualQuadricT<Jet<N>> jet_quadric(const DualQuadric& q, int offset) {
  return quadric_retract<Jet<N>>(q.cast<Jet<N>>(), seeded<N, 9>(offset));
}

template <int N, int R>
std::vector<Eigen::MatrixXd> split_jacobian(const Eigen::Matrix<Jet<N>, R, 1>& r, const std::vector<int>& dims) {
  Eigen::Matrix<double, R, N> full;
  for (int i = 0; i < R; ++i) full.row(i) = r(i).derivatives().transpose();
  std::vector<Eigen::MatrixXd> out;
  int col = 0;
  for (int d : dims) {
    out.emplace_back(full.middleCols(col, d));
    col += d;
  }
  return out;
}

template <int N>
Eigen::Matrix<Jet<N>, 1, 1> as_vec(const Jet<N>& x) {
  Eigen::Matrix<Jet<N>, 1, 1> v;
  v(0) = x;
  return v;
}

// d(unit-normal plane after retraction) / d delta at delta = 0, 4x3.
Eigen::Matrix<double, 4, 3> plane_retract_jacobian(const Plane& plane) {
  const Eigen::Vector4d q = unit_coeffs(plane);
  const Eigen::Vector3d qv = q.head<3>();
  Eigen::Matrix<double, 4, 3> dq;
  dq.topRows<3>() = q(3) * Eigen::Matrix3d::Identity() + skew<double>(qv);
  dq.row(3) = -qv.transpose();
  const double nn = qv.norm();
  Eigen::Matrix4d dpi = Eigen::Matrix4d::Identity() / nn;
  Eigen::RowVector4d qn_row = Eigen::RowVector4d::Zero();
  qn_row.head<3>() = qv.transpose();
  dpi -= q * qn_row / (nn * nn * nn);
  return dpi * dq;
}

std::vector<Eigen::MatrixXd> reprojection_jacobian(const Factor& f, ValueRefs v) {
  const auto& m = std::get<ReprojectionMeasurement>(f.measurement);
  const Pose& pose = pose_at(v, 1);
  const Eigen::Vector3d y = pose.inverse() * point_at(v, 0);
  if (y.z() <= 0.0) throw BehindCamera("point behind camera");
  const double iz = 1.0 / y.z();
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << m.camera.fx * iz, 0.0, -m.camera.fx * y.x() * iz * iz,  //
      0.0, m.camera.fy * iz, -m.camera.fy * y.y() * iz * iz;
  Eigen::Matrix<double, 3, 6> dy_dpose;
  dy_dpose.leftCols<3>() = skew<double>(y);
  dy_dpose.rightCols<3>() = -Eigen::Matrix3d::Identity();
  return {dproj * pose.rotation().transpose(), dproj * dy_dpose};
}

std::vector<Eigen::MatrixXd> point_plane_jacobian(ValueRefs v) {
  const Eigen::Vector3d& x = point_at(v, 0);
  const Plane& plane = plane_at(v, 1);
  const Pose& anchor = pose_at(v, 2);
  const Eigen::Vector3d y = anchor.inverse() * x;
  const Eigen::Vector3d n = plane.normal();
  Eigen::MatrixXd jx = (anchor.rotation() * n).transpose();
  Eigen::Vector4d yh;
  yh << y, 1.0;
  Eigen::MatrixXd jplane = yh.transpose() * plane_retract_jacobian(plane);
  Eigen::MatrixXd janchor(1, 6);
  janchor.leftCols<3>() = n.transpose() * skew<double>(y);
  janchor.rightCols<3>() = -n.transpose();
  return {jx, jplane, janchor};
}

template <bool Parallel>
std::vector<Eigen::MatrixXd> manhattan_jacobian(ValueRefs v) {
  constexpr int N = 18;
  const auto a = transform_plane(jet_plane<N>(plane_at(v, 0), 0), jet_pose<N>(pose_at(v, 1), 3));
  const auto b = transform_plane(jet_plane<N>(plane_at(v, 2), 9), jet_pose<N>(pose_at(v, 3), 12));
  const Jet<N> r = Parallel ? plane_parallel(a, b) : plane_perpendicular(a, b);
  return split_jacobian<N, 1>(as_vec<N>(r), {3, 6, 3, 6});
}

std::vector<Eigen::MatrixXd> tangency_jacobian(ValueRefs v) {
  constexpr int N = 24;
  const auto plane = transform_plane(jet_plane<N>(plane_at(v, 0), 0), jet_pose<N>(pose_at(v, 1), 3));
  const auto quadric = jet_quadric<N>(quadric_at(v, 2), 9).transformed(jet_pose<N>(pose_at(v, 3), 18));
  return split_jacobian<N, 1>(as_vec<N>(tangency(plane, quadric)), {3, 6, 9, 6});
}

std::vector<Eigen::MatrixXd> plane_observation_jacobian(const Factor& f, ValueRefs v) {
  const auto& m = std::get<PlaneObservationMeasurement>(f.measurement);
  if (v.size() == 2) {
    constexpr int N = 9;
    const auto plane = jet_plane<N>(plane_at(v, 0), 0);
    // Landmark lives in the camera frame; the camera slot has no effect.
    const auto cam = jet_pose<N>(Pose::Identity(), 3);
    const auto r = plane_observation(plane, cam, cam, m.observed.cast<Jet<N>>());
    return split_jacobian<N, 3>(r, {3, 6});
  }
  constexpr int N = 15;
  const auto plane = jet_plane<N>(plane_at(v, 0), 0);
  const auto ref = jet_pose<N>(pose_at(v, 1), 3);
  const auto cam = jet_pose<N>(pose_at(v, 2), 9);
  const auto r = plane_observation(plane, ref, cam, m.observed.cast<Jet<N>>());
  return split_jacobian<N, 3>(r, {3, 6, 6});
}

std::vector<Eigen::MatrixXd> between_jacobian(const Factor& f, ValueRefs v) {
  constexpr int N = 12;
  const auto& m = std::get<BetweenMeasurement>(f.measurement);
  const auto r = pose_between(jet_pose<N>(pose_at(v, 0), 0), jet_pose<N>(pose_at(v, 1), 6),
                              m.measured.cast<Jet<N>>());
  return split_jacobian<N, 6>(r, {6, 6});
}

}  // namespace

std::optional<std::vector<Eigen::MatrixXd>> analytic_jacobian(const Factor& f, ValueRefs v) {
  switch (f.kind()) {
    case FactorKind::PointReprojection: return reprojection_jacobian(f, v);
    case FactorKind::PointPlane: return point_plane_jacobian(v);
    case FactorKind::PlaneParallel: return manhattan_jacobian<true>(v);
    case FactorKind::PlanePerpendicular: return manhattan_jacobian<false>(v);
    case FactorKind::Tangency: return tangency_jacobian(v);
    case FactorKind::PlaneObservation: return plane_observation_jacobian(f, v);
    case FactorKind::Between: return between_jacobian(f, v);
    case FactorKind::QuadricObservation:
    case FactorKind::ShapePrior: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<Eigen::MatrixXd> numeric_jacobian(const Factor& f, ValueRefs values, double step) {
  std::vector<const Value*> work(values.begin(), values.end());
  std::vector<Eigen::MatrixXd> out;
  out.reserve(values.size());
  const int rdim = f.residual_dim();
  for (std::size_t slot = 0; slot < values.size(); ++slot) {
    const int dim = tangent_dim(kind_of(*values[slot]));
    Eigen::MatrixXd j(rdim, dim);
    for (int k = 0; k < dim; ++k) {
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(dim);
      delta(k) = step;
      const Value plus = retract(*values[slot], delta);
      const Value minus = retract(*values[slot], -delta);
      Eigen::VectorXd rp;
      Eigen::VectorXd rm;
      try {
        work[slot] = &plus;
        rp = evaluate_residual(f, work);
        work[slot] = &minus;
        rm = evaluate_residual(f, work);
      } catch (const BehindCamera& e) {
        throw EvaluationError(std::string("numeric jacobian: ") + e.what());
      } catch (const DegenerateProjection& e) {
        throw EvaluationError(std::string("numeric jacobian: ") + e.what());
      }
      work[slot] = values[slot];
      if (!rp.allFinite() || !rm.allFinite()) throw EvaluationError("numeric jacobian: non-finite residual");
      j.col(k) = (rp - rm) / (2.0 * step);
    }
    out.push_back(std::move(j));
  }
  return out;
}

Linearization linearize(const Factor& f, ValueRefs values) {
  Linearization lin;
  const int rdim = f.residual_dim();
  auto zero_jacobians = [&] {
    lin.jacobians.clear();
    for (const Value* v : values) lin.jacobians.push_back(Eigen::MatrixXd::Zero(rdim, tangent_dim(kind_of(*v))));
  };
  try {
    lin.residual = evaluate_residual(f, values);
  } catch (const BehindCamera&) {
    lin.status = FactorStatus::Undefined;
  } catch (const DegenerateProjection&) {
    lin.status = FactorStatus::Undefined;
  }
  if (lin.status == FactorStatus::Undefined) {
    lin.residual = Eigen::VectorXd::Zero(rdim);
    zero_jacobians();
    return lin;
  }
  if (!lin.residual.allFinite()) throw EvaluationError("linearize: non-finite residual");

  if (f.kind() == FactorKind::QuadricObservation && lin.residual(0) >= 1.0) {
    lin.status = FactorStatus::Plateau;
    zero_jacobians();
    return lin;
  }
  if (auto j = analytic_jacobian(f, values)) {
    lin.jacobians = std::move(*j);
    return lin;
  }
  try {
    lin.jacobians = numeric_jacobian(f, values);
  } catch (const EvaluationError&) {
    // Perturbation crossed into an undefined prediction. The residual itself
    // is fine, so keep its cost but give it no gradient this round.
    lin.status = FactorStatus::Plateau;
    zero_jacobians();
  }
  return lin;
}

}  // namespace semslam
