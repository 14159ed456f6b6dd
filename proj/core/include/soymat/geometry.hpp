#pragma once

#include <array>
#include <cmath>

namespace soymat {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }

using Quad = std::array<Point2, 4>;

// Shoelace signed area; positive for counter-clockwise order in a y-up frame.
inline double signed_area(const Quad& q) {
  double a = 0.0;
  for (std::size_t i = 0; i < 4; ++i) a += cross(q[i], q[(i + 1) % 4]);
  return 0.5 * a;
}

}  // namespace soymat
