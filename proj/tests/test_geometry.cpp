#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "metasurf/error.hpp"
#include "metasurf/geometry.hpp"

using namespace metasurf;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double nm = 1e-9;
const double kLambdaMed = 660 * nm / 2.4;

AtomBoundary circle_boundary(double r, int ppw, const AffineParams& p = {}) {
  return build_boundary(Circle{r}, p, ppw, kLambdaMed);
}

double perimeter(const AtomBoundary& b) {
  double s = 0.0;
  for (const auto& p : b.panels) s += p.length;
  return s;
}

double chord_perimeter(const AtomBoundary& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.panels.size(); ++i) {
    const Vec2& a = b.panels[i].start;
    const Vec2& c = b.panels[(i + 1) % b.panels.size()].start;
    s += (c - a).norm();
  }
  return s;
}

const RoundedRectangle kRect{660 * nm, 200 * nm, 82.5 * nm};

}  // namespace

TEST(Geometry, ShapeValidation) {
  EXPECT_NO_THROW(validate_shape(kRect));
  EXPECT_THROW(validate_shape(RoundedRectangle{660 * nm, 200 * nm, 101 * nm}), GeometryError);
  EXPECT_THROW(validate_shape(RoundedRectangle{660 * nm, 200 * nm, 0.0}), GeometryError);
  EXPECT_THROW(validate_shape(Circle{0.0}), GeometryError);
  EXPECT_THROW(validate_shape(Polygon{{Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)}}), GeometryError);
  EXPECT_THROW(build_boundary(Circle{100 * nm}, {}, 5, kLambdaMed), GeometryError);
  AffineParams flat;
  flat.lambda_x = 0.0;
  EXPECT_THROW(build_boundary(Circle{100 * nm}, flat, 16, kLambdaMed), GeometryError);
}

TEST(Geometry, CirclePerimeterAndCentroid) {
  // About 64 nodes: 2 pi 100 nm / (lambda_med / ppw).
  const AtomBoundary b = circle_boundary(100 * nm, 24);
  EXPECT_GE(b.panels.size(), 56u);
  EXPECT_NEAR(chord_perimeter(b), 2 * kPi * 100 * nm, 0.005 * 2 * kPi * 100 * nm);
  EXPECT_NEAR(perimeter(b), 2 * kPi * 100 * nm, 1e-12 * 2 * kPi * 100 * nm);
  EXPECT_LT(b.centroid.norm(), 1e-12 * 100 * nm);
}

TEST(Geometry, RoundedRectanglePerimeter) {
  const double lx = kRect.lx, ly = kRect.ly, r = kRect.radius;
  const double exact = 2 * (lx - 2 * r) + 2 * (ly - 2 * r) + 2 * kPi * r;
  const AtomBoundary b = build_boundary(kRect, {}, 16, kLambdaMed);
  EXPECT_NEAR(chord_perimeter(b), exact, 0.005 * exact);
  EXPECT_NEAR(perimeter(b), exact, 1e-10 * exact);
  EXPECT_LT(b.centroid.norm(), 1e-9 * lx);
}

TEST(Geometry, ChordPerimeterConvergesUnderRefinement) {
  const double exact = 2 * kPi * 100 * nm;
  double prev = std::abs(chord_perimeter(circle_boundary(100 * nm, 8)) - exact);
  for (int ppw : {16, 32}) {
    const double err = std::abs(chord_perimeter(circle_boundary(100 * nm, ppw)) - exact);
    EXPECT_LT(err, 0.5 * prev) << ppw;
    prev = err;
  }
}

TEST(Geometry, PanelFrameInvariants) {
  for (const BaseShape& shape : {BaseShape(kRect), BaseShape(Circle{150 * nm}),
                                 BaseShape(Polygon{{Vec2(0, 0), Vec2(300 * nm, 0),
                                                    Vec2(100 * nm, 200 * nm)}})}) {
    const AtomBoundary b = build_boundary(shape, {0.4, 1.2, 0.8, 30 * nm, -20 * nm}, 16, kLambdaMed);
    Vec2 closure = Vec2::Zero();
    double per = 0.0;
    for (const auto& p : b.panels) {
      EXPECT_NEAR(p.normal.norm(), 1.0, 1e-12);
      EXPECT_NEAR(p.tangent.norm(), 1.0, 1e-12);
      EXPECT_NEAR(p.normal.dot(p.tangent), 0.0, 1e-12);
      // tangent = z x normal
      EXPECT_NEAR(p.tangent.x(), -p.normal.y(), 1e-12);
      EXPECT_NEAR(p.tangent.y(), p.normal.x(), 1e-12);
      EXPECT_LE(p.length, kLambdaMed / 16 * (1 + 1e-12));
      closure += p.length * p.normal;
      per += p.length;
    }
    EXPECT_LT(closure.norm(), 1e-9 * per);
    // Counterclockwise: positive signed area of the node polygon.
    std::vector<Vec2> loop;
    for (const auto& p : b.panels) loop.push_back(p.point);
    EXPECT_GT(polygon_centroid(loop).second, 0.0);
    // Outward normals; the step clears the chord sagitta of curved cells.
    for (std::size_t i = 0; i < b.panels.size(); i += 7) {
      const Panel& p = b.panels[i];
      EXPECT_FALSE(inside(b.panels, p.point + 0.2 * p.length * p.normal));
      EXPECT_TRUE(inside(b.panels, p.point - 0.2 * p.length * p.normal));
    }
  }
}

TEST(Geometry, RotationIsAnIsometryOfTheMesh) {
  AffineParams rot;
  rot.theta = kPi / 2;
  const AtomBoundary a = build_boundary(kRect, {}, 16, kLambdaMed);
  const AtomBoundary b = build_boundary(kRect, rot, 16, kLambdaMed, 8, &a.topology);
  ASSERT_EQ(a.panels.size(), b.panels.size());
  const Mat2 R = rot.rotation();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.panels.size(); ++i)
    worst = std::max(worst, (R * a.panels[i].point - b.panels[i].point).norm());
  EXPECT_LT(worst, 1e-12 * 1e-6);
}

TEST(Geometry, AffineParamsComposeRotationAfterScaling) {
  const AffineParams p{0.3, 2.0, 0.5, 10 * nm, -5 * nm};
  const Vec2 x(1.0, 1.0);
  const Vec2 scaled(2.0, 0.5);
  const Vec2 expect = Vec2(std::cos(0.3) * scaled.x() - std::sin(0.3) * scaled.y(),
                           std::sin(0.3) * scaled.x() + std::cos(0.3) * scaled.y()) +
                      Vec2(10 * nm, -5 * nm);
  EXPECT_LT((p.apply(x) - expect).norm(), 1e-15);
}

TEST(Geometry, FrozenTopologyKeepsStructure) {
  const AtomBoundary a = build_boundary(kRect, {}, 16, kLambdaMed);
  const AtomBoundary b = build_boundary(kRect, {0.0, 1.01, 1.0, 0.0, 0.0}, 16, kLambdaMed, 8, &a.topology);
  EXPECT_EQ(a.panels.size(), b.panels.size());
  EXPECT_EQ(a.topology, b.topology);
}

TEST(Geometry, RotationWeight) {
  const AtomBoundary b = circle_boundary(120 * nm, 16, {0.0, 1.0, 1.0, 40 * nm, 70 * nm});
  for (const auto& p : b.panels) EXPECT_NEAR(weight_rotation(p), 0.0, 1e-12 * 120 * nm);

  // Right edge of a square, counterclockwise tangent +y: w = -(r . t) = -r_y.
  Panel p;
  p.r = Vec2(50 * nm, 20 * nm);
  p.normal = Vec2(1, 0);
  p.tangent = Vec2(0, 1);
  EXPECT_DOUBLE_EQ(weight_rotation(p), -20 * nm);
  p.r = Vec2(50 * nm, 0);
  EXPECT_DOUBLE_EQ(weight_rotation(p), 0.0);

  // Centroid-relative: a rigid shift of the atom leaves the weights alone.
  const AtomBoundary r0 = build_boundary(kRect, {0.2, 1, 1, 0, 0}, 16, kLambdaMed);
  const AtomBoundary r1 = build_boundary(kRect, {0.2, 1, 1, 300 * nm, -80 * nm}, 16, kLambdaMed, 8, &r0.topology);
  for (std::size_t i = 0; i < r0.panels.size(); ++i)
    EXPECT_NEAR(weight_rotation(r0.panels[i]), weight_rotation(r1.panels[i]), 1e-12 * kRect.lx);
}

TEST(Geometry, ExpansionWeight) {
  Panel top;
  top.r = Vec2(0, 100 * nm);
  top.normal = Vec2(0, 1);
  EXPECT_DOUBLE_EQ(weight_expansion(top, Vec2(1, 0)), 0.0);
  Panel side;
  side.r = Vec2(330 * nm, 0);
  side.normal = Vec2(1, 0);
  EXPECT_DOUBLE_EQ(weight_expansion(side, Vec2(1, 0)), 330 * nm);

  // Divergence theorem: the closed-loop sum is the enclosed area.
  const double a = 150 * nm;
  const AtomBoundary b = circle_boundary(a, 24);
  double s = 0.0;
  for (const auto& p : b.panels) s += weight_expansion(p, Vec2(1, 0)) * p.length;
  EXPECT_NEAR(s, kPi * a * a, 1e-10 * kPi * a * a);
}

TEST(Geometry, TranslationWeight) {
  Panel p;
  p.normal = Vec2(0, 1);
  EXPECT_DOUBLE_EQ(weight_translation(p, Vec2(0, 1)), 1.0);
  p.normal = Vec2(1, 0);
  EXPECT_NEAR(weight_translation(p, Vec2(1, 1).normalized()), 1 / std::sqrt(2.0), 1e-15);

  const AtomBoundary b = build_boundary(kRect, {0.7, 1.3, 0.9, 0, 0}, 16, kLambdaMed);
  double sx = 0.0, sy = 0.0, per = 0.0;
  for (const auto& q : b.panels) {
    sx += weight_translation(q, Vec2(1, 0)) * q.length;
    sy += weight_translation(q, Vec2(0, 1)) * q.length;
    per += q.length;
  }
  EXPECT_LT(std::abs(sx), 1e-9 * per);
  EXPECT_LT(std::abs(sy), 1e-9 * per);
}

TEST(Geometry, BoundaryDistanceAndMeshAssembly) {
  const AtomBoundary a = circle_boundary(100 * nm, 16, {0, 1, 1, 0, 0});
  const AtomBoundary b = circle_boundary(100 * nm, 16, {0, 1, 1, 300 * nm, 0});
  EXPECT_NEAR(boundary_distance(a, b), 100 * nm, 2 * nm);
  const AtomBoundary c = circle_boundary(100 * nm, 16, {0, 1, 1, 150 * nm, 0});
  EXPECT_EQ(boundary_distance(a, c), 0.0);

  const BoundaryMesh m1 = assemble_mesh({a, b}, 16, 8);
  const BoundaryMesh m2 = assemble_mesh({a, b}, 16, 8);
  EXPECT_NE(m1.id, m2.id);
  ASSERT_EQ(m1.atom_offsets.size(), 3u);
  EXPECT_EQ(m1.atom_panels(1).size(), b.panels.size());
  EXPECT_EQ(m1.atom_panels(1).front().atom, 1);
}
