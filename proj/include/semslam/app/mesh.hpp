#pragma once

#include <ostream>

#include "semslam/app/pipeline.hpp"

namespace semslam {

struct MeshOptions {
  int rings = 12;
  int segments = 24;
  /// Margin added around the inlier extent of each plane patch, meters.
  double plane_margin = 0.05;
};

/// ASCII PLY with per-vertex position and color: one tessellated ellipsoid per
/// quadric, one quad per plane spanning its inlier points, and the map points.
void write_map_mesh(const Solution& s, std::ostream& out, const MeshOptions& options = {});

/// One JSON line per landmark with world-frame geometry.
void write_map_records(const Solution& s, std::ostream& out);

}  // namespace semslam
