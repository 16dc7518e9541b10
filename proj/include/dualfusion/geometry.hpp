#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace dualfusion {

// Axis-aligned box in image coordinates. (x1,y1) is the top-left corner
// (inclusive), (x2,y2) the bottom-right corner (exclusive). Valid boxes
// have strictly positive area; degenerate boxes are rejected at parse
// time, not special-cased here.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

inline bool box_valid(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x2 > b.x1 && b.y2 > b.y1;
}

inline double area(const Box& b) {
  return (b.x2 - b.x1) * (b.y2 - b.y1);
}

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

// Intersection over union. 0 for disjoint boxes.
inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (area(a) + area(b) - inter);
}

// Intersection over area of the FIRST box: how much of p is covered by q.
// Not symmetric; a small p inside a large q gives 1.
inline double ioa(const Box& p, const Box& q) {
  return intersection_area(p, q) / area(p);
}

// Entry (i,j) = ioa(P[i], Q[j]). Empty inputs yield a 0-row or
// zero-column matrix.
inline std::vector<std::vector<double>> pairwise_ioa(
    const std::vector<Box>& boxes_p, const std::vector<Box>& boxes_q) {
  std::vector<std::vector<double>> m(boxes_p.size());
  for (std::size_t i = 0; i < boxes_p.size(); ++i) {
    m[i].resize(boxes_q.size());
    for (std::size_t j = 0; j < boxes_q.size(); ++j) {
      m[i][j] = ioa(boxes_p[i], boxes_q[j]);
    }
  }
  return m;
}

}  // namespace dualfusion
