#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "semslam/factors/noise.hpp"
#include "semslam/factors/variables.hpp"
#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/camera.hpp"
#include "semslam/geometry/cuboid.hpp"

namespace semslam {

// Measurement payloads. The comment lists the variable slots in order.
// Landmarks held relative to a keyframe carry that keyframe ("anchor") as an
// extra slot; observation factors drop the reference slot when the reference
// keyframe is the observing one.

/// point, pose
struct ReprojectionMeasurement {
  Camera camera;
  Eigen::Vector2d pixel;
};
/// point, plane, plane anchor
struct PointPlaneMeasurement {};
/// plane, anchor, plane, anchor
struct ParallelMeasurement {};
/// plane, anchor, plane, anchor
struct PerpendicularMeasurement {};
/// plane, plane anchor, quadric, quadric anchor
struct TangencyMeasurement {};
/// plane, [reference pose,] camera pose
struct PlaneObservationMeasurement {
  Plane observed;
};
/// quadric, [reference pose,] camera pose
struct QuadricObservationMeasurement {
  Camera camera;
  BBox box;
};
/// quadric
struct ShapePriorMeasurement {
  Eigen::Vector3d model_half_extents;
};
/// pose_i, pose_j
struct BetweenMeasurement {
  Pose measured;
};

using Measurement =
    std::variant<ReprojectionMeasurement, PointPlaneMeasurement, ParallelMeasurement, PerpendicularMeasurement,
                 TangencyMeasurement, PlaneObservationMeasurement, QuadricObservationMeasurement,
                 ShapePriorMeasurement, BetweenMeasurement>;

enum class FactorKind {
  PointReprojection = 0,
  PointPlane,
  PlaneParallel,
  PlanePerpendicular,
  Tangency,
  PlaneObservation,
  QuadricObservation,
  ShapePrior,
  Between,
};

inline constexpr int kFactorKindCount = 9;

std::string_view to_string(FactorKind kind);

struct Factor {
  std::vector<VariableId> vars;
  Measurement measurement;
  NoiseModel noise = NoiseModel::isotropic(1, 1.0);
  std::optional<Huber> loss;

  FactorKind kind() const { return static_cast<FactorKind>(measurement.index()); }
  int residual_dim() const;
};

/// Throws std::invalid_argument if the slot kinds or count do not fit the
/// measurement, or if the noise dimension differs from the residual.
void check_factor(const Factor& f);

// Builders. Each validates its slots.
Factor make_reprojection(VariableId point, VariableId pose, const Camera& cam, const Eigen::Vector2d& pixel,
                         double pixel_sigma, std::optional<Huber> loss = std::nullopt);
Factor make_point_plane(VariableId point, VariableId plane, VariableId anchor, double sigma);
Factor make_parallel(VariableId plane_a, VariableId anchor_a, VariableId plane_b, VariableId anchor_b, double sigma);
Factor make_perpendicular(VariableId plane_a, VariableId anchor_a, VariableId plane_b, VariableId anchor_b,
                          double sigma);
Factor make_tangency(VariableId plane, VariableId plane_anchor, VariableId quadric, VariableId quadric_anchor,
                     double sigma);
/// Pass reference == camera for a landmark anchored at the observing keyframe.
Factor make_plane_observation(VariableId plane, VariableId reference, VariableId camera, const Plane& observed,
                              const NoiseModel& noise);
/// Noise sigma is scale / sqrt(score), i.e. information proportional to score.
Factor make_quadric_observation(VariableId quadric, VariableId reference, VariableId camera, const Camera& cam,
                                const BBox& box, double sigma_scale = 1.0, std::optional<Huber> loss = std::nullopt);
Factor make_shape_prior(VariableId quadric, const Eigen::Vector3d& model_half_extents, double sigma);
Factor make_between(VariableId pose_i, VariableId pose_j, const Pose& measured, const NoiseModel& noise);

enum class FactorStatus {
  Active,
  /// Flat region (IoU = 0): residual defined, no usable gradient.
  Plateau,
  /// Prediction undefined (behind camera, degenerate conic).
  Undefined,
};

struct Linearization {
  FactorStatus status = FactorStatus::Active;
  Eigen::VectorXd residual;
  /// One block per slot, residual_dim x tangent_dim(slot).
  std::vector<Eigen::MatrixXd> jacobians;
};

using ValueRefs = std::span<const Value* const>;

/// Raw (unwhitened) residual. Throws BehindCamera or DegenerateProjection
/// when the prediction is undefined.
Eigen::VectorXd evaluate_residual(const Factor& f, ValueRefs values);

/// Exact Jacobians where the factor is smooth; nullopt for the IoU factors.
std::optional<std::vector<Eigen::MatrixXd>> analytic_jacobian(const Factor& f, ValueRefs values);

/// Central differences in each slot's tangent space. Throws EvaluationError
/// if a perturbed residual is undefined or non-finite.
std::vector<Eigen::MatrixXd> numeric_jacobian(const Factor& f, ValueRefs values, double step = 1e-6);

/// Residual, Jacobians and status. Undefined predictions and plateaus are
/// reported through status instead of exceptions.
Linearization linearize(const Factor& f, ValueRefs values);

}  // namespace semslam
