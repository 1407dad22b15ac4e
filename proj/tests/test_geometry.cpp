#include <catch2/catch_amalgamated.hpp>

#include "rhhlgp/geometry.hpp"

using namespace rhhlgp;

namespace {

// Test-side oracle: brute-force sampled surface distance, independent of the
// analytic pairings in shapeDistance.
double sampledDistance(const Shape& a, const Transform& ta, const Shape& b, const Transform& tb,
                       int res = 40) {
  auto ptsA = detail::sampleSurface(a, ta, res);
  auto ptsB = detail::sampleSurface(b, tb, res);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pa : ptsA)
    for (const auto& pb : ptsB) best = std::min(best, (pa - pb).norm());
  return best;
}

Transform at(double x, double y, double z) { return makePose({x, y, z}, Quat::Identity()); }

}  // namespace

TEST_CASE("transform compose and inverse") {
  Transform t = makePose({1, 2, 3}, Quat(Eigen::AngleAxisd(0.3, Vec3::UnitZ())));
  Transform u = makePose({-0.5, 0.2, 0.1}, Quat(Eigen::AngleAxisd(-0.7, Vec3::UnitY())));
  Transform id = (t * u) * (t * u).inverse();
  REQUIRE(id.approxEqual(Transform::identity(), 1e-12));
  Vec3 p{0.3, -0.1, 2.0};
  REQUIRE(((t * u).apply(p) - t.apply(u.apply(p))).norm() < 1e-12);
}

TEST_CASE("sphere-sphere distance") {
  Shape s1 = Shape::sphere(0.2), s2 = Shape::sphere(0.3);
  REQUIRE(shapeDistance(s1, at(0, 0, 0), s2, at(1, 0, 0)) == Catch::Approx(0.5));
  REQUIRE(shapeDistance(s1, at(0.1, 0, 0), s2, at(0.2, 0, 0)) == 0.0);  // overlap clamps
}

TEST_CASE("box-box axis-aligned distance") {
  Shape b = Shape::box(0.3, 0.6, 0.1);
  SECTION("diagonally offset stairs: 0.3 m rise and run edge to edge") {
    // consecutive stairs separated by 0.3 horizontally and 0.3 vertically
    double d = shapeDistance(b, at(0, 0, 0), b, at(0.6, 0, 0.4));
    REQUIRE(d == Catch::Approx(std::sqrt(0.09 + 0.09)).epsilon(1e-9));
    REQUIRE(d == Catch::Approx(0.424).margin(1e-3));
    double oracle = sampledDistance(b, at(0, 0, 0), b, at(0.6, 0, 0.4));
    REQUIRE(d == Catch::Approx(oracle).margin(1e-3));
  }
  SECTION("identical frames give zero") {
    REQUIRE(shapeDistance(b, at(0.4, 0.2, 0), b, at(0.4, 0.2, 0)) == 0.0);
  }
  SECTION("overlapping shapes clamp to zero") {
    REQUIRE(shapeDistance(b, at(0, 0, 0), b, at(0.05, 0.1, 0.02)) == 0.0);
  }
}

TEST_CASE("sphere-box and capsule pairings against sampled oracle") {
  Shape box = Shape::box(0.4, 0.2, 0.3);
  Shape sph = Shape::sphere(0.1);
  Shape cap = Shape::capsule(0.05, 0.4);
  Transform tb = at(0, 0, 0);
  Transform ts = at(0.5, 0.3, 0.4);
  Transform tc = makePose({-0.4, 0.1, 0.3}, Quat(Eigen::AngleAxisd(0.4, Vec3::UnitX())));
  REQUIRE(shapeDistance(sph, ts, box, tb) ==
          Catch::Approx(sampledDistance(sph, ts, box, tb)).margin(2e-3));
  REQUIRE(shapeDistance(cap, tc, sph, ts) ==
          Catch::Approx(sampledDistance(cap, tc, sph, ts)).margin(2e-3));
  REQUIRE(shapeDistance(cap, tc, cap, makePose({0.5, 0, 0}, Quat::Identity())) ==
          Catch::Approx(sampledDistance(cap, tc, cap, makePose({0.5, 0, 0}, Quat::Identity()))).margin(2e-3));
}

TEST_CASE("point-shape distance gradients point outward") {
  Shape box = Shape::box(0.2, 0.2, 0.2);
  Vec3 grad;
  double d = pointShapeDistance({0.5, 0, 0}, box, at(0, 0, 0), &grad);
  REQUIRE(d == Catch::Approx(0.4));
  REQUIRE((grad - Vec3{1, 0, 0}).norm() < 1e-12);
}
