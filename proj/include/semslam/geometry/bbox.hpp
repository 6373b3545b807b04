#pragma once

#include <algorithm>
#include <stdexcept>

namespace semslam {

/// Axis-aligned image box in pixels.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double score = 1.0;
  int class_id = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool is_valid() const { return x_min < x_max && y_min < y_max && score >= 0.0 && score <= 1.0; }
  bool contains(double u, double v) const { return u >= x_min && u <= x_max && v >= y_min && v <= y_max; }
};

inline BBox make_bbox(double x_min, double y_min, double x_max, double y_max, double score = 1.0, int class_id = 0) {
  BBox b{x_min, y_min, x_max, y_max, score, class_id};
  if (!b.is_valid()) throw std::invalid_argument("bbox: requires x_min < x_max, y_min < y_max, score in [0,1]");
  return b;
}

/// Area IoU; 0 for disjoint boxes.
inline double bbox_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace semslam
