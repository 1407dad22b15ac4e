#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rhhlgp {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform: rotation then translation (p_world = rot * p_local + pos).
struct Transform {
  Vec3 pos{0, 0, 0};
  Quat rot{1, 0, 0, 0};

  static Transform identity() { return {}; }

  Transform operator*(const Transform& o) const {
    return {pos + rot * o.pos, (rot * o.rot).normalized()};
  }
  Vec3 apply(const Vec3& p) const { return pos + rot * p; }
  Transform inverse() const {
    Quat ri = rot.conjugate();
    return {ri * (-pos), ri};
  }
  bool approxEqual(const Transform& o, double tol = 1e-9) const {
    double rotDiff = std::min((rot.coeffs() - o.rot.coeffs()).norm(),
                              (rot.coeffs() + o.rot.coeffs()).norm());
    return (pos - o.pos).norm() <= tol && rotDiff <= tol;
  }
};

inline Transform makePose(const Vec3& p, const Quat& q) {
  Quat qn = q;
  double n = qn.norm();
  if (std::abs(n - 1.0) > 1e-9) {
    if (n < 1e-12) throw std::invalid_argument("makePose: zero quaternion");
    qn.coeffs() /= n;
  }
  return {p, qn};
}

enum class ShapeKind { Box, Sphere, Capsule };

/// Box: dims = full side lengths (wx, wy, wz).
/// Sphere: dims.x = radius.
/// Capsule: dims.x = radius, dims.y = segment length (along local z).
struct Shape {
  ShapeKind kind = ShapeKind::Box;
  Vec3 dims{0, 0, 0};

  static Shape box(double wx, double wy, double wz) { return {ShapeKind::Box, {wx, wy, wz}}; }
  static Shape sphere(double r) { return {ShapeKind::Sphere, {r, 0, 0}}; }
  static Shape capsule(double r, double len) { return {ShapeKind::Capsule, {r, len, 0}}; }
};

/// Closest point on an axis-aligned box (in the box's local frame) to a local point.
inline Vec3 clampToBox(const Vec3& p, const Vec3& halfDims) {
  return {std::clamp(p.x(), -halfDims.x(), halfDims.x()),
          std::clamp(p.y(), -halfDims.y(), halfDims.y()),
          std::clamp(p.z(), -halfDims.z(), halfDims.z())};
}

/// Distance from a world point to the surface of a shape (0 if inside),
/// with the outward gradient wrt the point (zero inside).
inline double pointShapeDistance(const Vec3& p, const Shape& s, const Transform& pose,
                                 Vec3* grad = nullptr) {
  switch (s.kind) {
    case ShapeKind::Sphere: {
      Vec3 d = p - pose.pos;
      double n = d.norm();
      double dist = n - s.dims.x();
      if (grad) *grad = n > 1e-12 ? Vec3(d / n) : Vec3(0, 0, 0);
      return std::max(0.0, dist);
    }
    case ShapeKind::Box: {
      Vec3 local = pose.inverse().apply(p);
      Vec3 cp = clampToBox(local, 0.5 * s.dims);
      Vec3 d = local - cp;
      double n = d.norm();
      if (grad) *grad = n > 1e-12 ? Vec3(pose.rot * (d / n)) : Vec3(0, 0, 0);
      return n;
    }
    case ShapeKind::Capsule: {
      double h = 0.5 * s.dims.y();
      Vec3 a = pose.apply({0, 0, -h});
      Vec3 b = pose.apply({0, 0, h});
      Vec3 ab = b - a;
      double t = ab.squaredNorm() > 1e-12 ? std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
      Vec3 cp = a + t * ab;
      Vec3 d = p - cp;
      double n = d.norm();
      if (grad) *grad = n > 1e-12 ? Vec3(d / n) : Vec3(0, 0, 0);
      return std::max(0.0, n - s.dims.x());
    }
  }
  return 0.0;
}

namespace detail {

inline double segmentSegmentDistance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  // Ericson, Real-Time Collision Detection, 5.1.9.
  Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0, t = 0;
  const double eps = 1e-12;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      double b = d1.dot(d2), denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

inline bool isAxisAligned(const Transform& t, double tol = 1e-9) {
  Eigen::Matrix3d m = t.rot.toRotationMatrix();
  return (m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

/// Surface sample points of a shape in world coordinates, for the generic fallback.
inline std::vector<Vec3> sampleSurface(const Shape& s, const Transform& pose, int res = 12) {
  std::vector<Vec3> pts;
  switch (s.kind) {
    case ShapeKind::Box: {
      Vec3 h = 0.5 * s.dims;
      for (int i = 0; i <= res; ++i)
        for (int j = 0; j <= res; ++j) {
          double u = -1.0 + 2.0 * i / res, v = -1.0 + 2.0 * j / res;
          pts.push_back(pose.apply({h.x() * u, h.y() * v, h.z()}));
          pts.push_back(pose.apply({h.x() * u, h.y() * v, -h.z()}));
          pts.push_back(pose.apply({h.x() * u, h.y(), h.z() * v}));
          pts.push_back(pose.apply({h.x() * u, -h.y(), h.z() * v}));
          pts.push_back(pose.apply({h.x(), h.y() * u, h.z() * v}));
          pts.push_back(pose.apply({-h.x(), h.y() * u, h.z() * v}));
        }
      break;
    }
    case ShapeKind::Sphere:
      for (int i = 0; i <= res; ++i)
        for (int j = 0; j < 2 * res; ++j) {
          double th = M_PI * i / res, ph = M_PI * j / res;
          pts.push_back(pose.apply(s.dims.x() * Vec3{std::sin(th) * std::cos(ph),
                                                     std::sin(th) * std::sin(ph), std::cos(th)}));
        }
      break;
    case ShapeKind::Capsule: {
      double h = 0.5 * s.dims.y();
      for (int i = 0; i <= res; ++i)
        for (int j = 0; j < 2 * res; ++j) {
          double z = -h + s.dims.y() * i / res, ph = M_PI * j / res;
          pts.push_back(pose.apply(Vec3{s.dims.x() * std::cos(ph), s.dims.x() * std::sin(ph), z}));
        }
      pts.push_back(pose.apply({0, 0, h + s.dims.x()}));
      pts.push_back(pose.apply({0, 0, -h - s.dims.x()}));
      break;
    }
  }
  return pts;
}

}  // namespace detail

/// Nearest distance between the surfaces of two posed shapes, clamped at 0 for
/// overlap. Sphere and capsule pairings are analytic; axis-aligned box pairs
/// use interval gaps; remaining pairings fall back to sampled support points.
inline double shapeDistance(const Shape& a, const Transform& ta, const Shape& b, const Transform& tb) {
  auto ordered = [&](ShapeKind x, ShapeKind y) { return a.kind == x && b.kind == y; };
  if (ordered(ShapeKind::Sphere, ShapeKind::Sphere))
    return std::max(0.0, (ta.pos - tb.pos).norm() - a.dims.x() - b.dims.x());
  if (a.kind == ShapeKind::Sphere) return std::max(0.0, pointShapeDistance(ta.pos, b, tb) - a.dims.x());
  if (b.kind == ShapeKind::Sphere) return std::max(0.0, pointShapeDistance(tb.pos, a, ta) - b.dims.x());
  if (ordered(ShapeKind::Capsule, ShapeKind::Capsule)) {
    double ha = 0.5 * a.dims.y(), hb = 0.5 * b.dims.y();
    double d = detail::segmentSegmentDistance(ta.apply({0, 0, -ha}), ta.apply({0, 0, ha}),
                                              tb.apply({0, 0, -hb}), tb.apply({0, 0, hb}));
    return std::max(0.0, d - a.dims.x() - b.dims.x());
  }
  if (ordered(ShapeKind::Box, ShapeKind::Box) && detail::isAxisAligned(ta) && detail::isAxisAligned(tb)) {
    Vec3 gap;
    for (int i = 0; i < 3; ++i) {
      double g = std::abs(ta.pos[i] - tb.pos[i]) - 0.5 * (a.dims[i] + b.dims[i]);
      gap[i] = std::max(0.0, g);
    }
    return gap.norm();
  }
  // Generic fallback: min over sampled surface points of one shape against the other.
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : detail::sampleSurface(a, ta)) best = std::min(best, pointShapeDistance(p, b, tb));
  for (const Vec3& p : detail::sampleSurface(b, tb)) best = std::min(best, pointShapeDistance(p, a, ta));
  return std::max(0.0, best);
}

}  // namespace rhhlgp
