#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace svla {

struct Vec2 {
  double x = 0, y = 0;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(const Vec3& a) {
  double n = norm(a);
  return n > 0 ? a * (1.0 / n) : Vec3{0, 0, 0};
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a <= -M_PI) a += 2 * M_PI;
  return a;
}

// Axis-aligned pixel rectangle, inclusive corners. Default-constructed box is
// empty and absorbs nothing under union.
struct BBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool valid() const { return x1 >= x0 && y1 >= y0; }
  int width() const { return valid() ? x1 - x0 + 1 : 0; }
  int height() const { return valid() ? y1 - y0 + 1 : 0; }
  int area() const { return width() * height(); }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }

  void expand(int x, int y) {
    if (!valid()) {
      x0 = x1 = x;
      y0 = y1 = y;
    } else {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
};

inline BBox box_union(const BBox& a, const BBox& b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

inline BBox box_dilate_clip(const BBox& a, int margin, int w, int h) {
  if (!a.valid()) return a;
  BBox r{a.x0 - margin, a.y0 - margin, a.x1 + margin, a.y1 + margin};
  r.x0 = std::max(r.x0, 0);
  r.y0 = std::max(r.y0, 0);
  r.x1 = std::min(r.x1, w - 1);
  r.y1 = std::min(r.y1, h - 1);
  return r;
}

inline double box_iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  int iw = std::max(0, ix1 - ix0 + 1), ih = std::max(0, iy1 - iy0 + 1);
  double inter = double(iw) * ih;
  double uni = double(a.area()) + double(b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace svla
