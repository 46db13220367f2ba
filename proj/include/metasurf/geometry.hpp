#pragma once

// Meta-atom cross sections, affine placement and boundary discretization.
//
// A boundary is split into smooth segments (straight edges and circular arcs
// of the base shape). Each segment is subdivided into curved elements that
// follow the exact affinely-mapped curve; every element carries `order`
// Gauss-Legendre nodes. One node plus its quadrature cell is a Panel, the
// unit that carries boundary unknowns in the solver.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace metasurf {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using cplx = std::complex<double>;
using CVec2 = Eigen::Vector2cd;

struct RoundedRectangle {
  double lx = 0.0;
  double ly = 0.0;
  double radius = 0.0;  ///< corner arc radius, 0 < radius <= min(lx, ly) / 2
};

struct Circle {
  double radius = 0.0;
};

/// Simple polygon; vertices may be given in either orientation and are
/// re-centered on their centroid.
struct Polygon {
  std::vector<Vec2> vertices;
};

using BaseShape = std::variant<RoundedRectangle, Circle, Polygon>;

/// Throws GeometryError when the shape violates its invariants.
void validate_shape(const BaseShape& shape);

/// x' = Rot(theta) * diag(lambda_x, lambda_y) * x + (xc, yc); Rot is the
/// counterclockwise rotation.
struct AffineParams {
  double theta = 0.0;
  double lambda_x = 1.0;
  double lambda_y = 1.0;
  double xc = 0.0;
  double yc = 0.0;

  Mat2 rotation() const;
  Mat2 linear() const;
  Vec2 center() const { return {xc, yc}; }
  Vec2 apply(const Vec2& local) const { return linear() * local + center(); }
};

/// Smooth piece of a base boundary in the shape's local frame.
struct Segment {
  enum class Kind { Line, Arc };
  Kind kind = Kind::Line;
  Vec2 a = Vec2::Zero();  ///< line start
  Vec2 b = Vec2::Zero();  ///< line end
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double phi0 = 0.0;
  double phi1 = 0.0;

  static Segment line(const Vec2& a, const Vec2& b);
  static Segment arc(const Vec2& center, double radius, double phi0, double phi1);

  double length() const;
  Vec2 point(double tau) const;       ///< tau in [0, 1]
  Vec2 derivative(double tau) const;  ///< d point / d tau
  /// point(tau + dtau) - point(tau) without cancellation for small dtau.
  Vec2 chord(double tau, double dtau) const;
};

/// Counterclockwise segment list, local origin at the centroid.
std::vector<Segment> base_segments(const BaseShape& shape);

/// Curved boundary element on the transformed curve, parametrized by t in [-1, 1].
struct Element {
  int atom = 0;
  int segment = 0;
  Segment curve;
  double tau0 = 0.0;
  double tau1 = 1.0;
  Mat2 linear = Mat2::Identity();
  Vec2 offset = Vec2::Zero();
  std::size_t first_panel = 0;
  int order = 0;
  double length = 0.0;  ///< arclength
  Vec2 midpoint = Vec2::Zero();

  double tau(double t) const { return tau0 + 0.5 * (t + 1.0) * (tau1 - tau0); }
  Vec2 position(double t) const { return linear * curve.point(tau(t)) + offset; }
  Vec2 velocity(double t) const {
    return linear * curve.derivative(tau(t)) * (0.5 * (tau1 - tau0));
  }
  /// position(t) - position(s), accurate when t and s are close.
  Vec2 chord(double t, double s) const {
    return linear * curve.chord(tau(s), 0.5 * (t - s) * (tau1 - tau0));
  }
};

/// One quadrature node of the boundary together with its cell.
struct Panel {
  Vec2 start = Vec2::Zero();  ///< cell endpoints on the curve
  Vec2 end = Vec2::Zero();
  Vec2 point = Vec2::Zero();  ///< collocation / quadrature node
  double length = 0.0;        ///< arclength quadrature weight
  Vec2 normal = Vec2::Zero();   ///< outward (into air)
  Vec2 tangent = Vec2::Zero();  ///< counterclockwise, tangent = z x normal
  int atom = 0;
  Vec2 r = Vec2::Zero();  ///< point minus owning atom centroid
  int element = 0;
};

/// Element count per base segment. Fixing it keeps a discretization's
/// structure constant across parameter perturbations.
using MeshTopology = std::vector<int>;

/// Discretized boundary of a single meta-atom.
struct AtomBoundary {
  std::vector<Panel> panels;
  std::vector<Element> elements;
  MeshTopology topology;
  Vec2 centroid = Vec2::Zero();
  double area = 0.0;
  double max_panel_length = 0.0;
};

/// Number of geometric refinement levels applied at segment junctions of
/// non-circular shapes (default 0).
int junction_levels();
void set_junction_levels(int levels);

/// Closed counterclockwise boundary of `shape` mapped by `params`.
/// `medium_wavelength` bounds the panel length: every panel is at most
/// medium_wavelength / panels_per_wavelength long.
AtomBoundary build_boundary(const BaseShape& shape, const AffineParams& params,
                            int panels_per_wavelength, double medium_wavelength,
                            int order = 8, const MeshTopology* topology = nullptr,
                            int atom_index = 0);

struct BoundaryMesh {
  std::vector<Panel> panels;
  std::vector<Element> elements;
  std::vector<std::size_t> atom_offsets;     ///< panel ranges, size atoms + 1
  std::vector<std::size_t> element_offsets;  ///< element ranges, size atoms + 1
  std::vector<MeshTopology> topologies;
  std::vector<Vec2> centroids;
  int panels_per_wavelength = 0;
  int order = 0;
  std::uint64_t id = 0;  ///< unique per constructed mesh

  std::size_t atom_count() const { return centroids.size(); }
  std::span<const Panel> atom_panels(std::size_t atom) const {
    return std::span(panels).subspan(atom_offsets[atom], atom_offsets[atom + 1] - atom_offsets[atom]);
  }
  /// Perimeter of the polygon through the panel cell endpoints.
  double polygon_perimeter(std::size_t atom) const;
};

BoundaryMesh assemble_mesh(std::vector<AtomBoundary> atoms, int panels_per_wavelength, int order);

/// Polygon centroid and signed area of a closed vertex loop.
std::pair<Vec2, double> polygon_centroid(std::span<const Vec2> loop);

/// Minimum distance between two closed boundaries (0 if they intersect).
double boundary_distance(const AtomBoundary& a, const AtomBoundary& b);
double boundary_distance(std::span<const Panel> a, std::span<const Panel> b);

/// Whether `p` lies inside the closed panel loop.
bool inside(std::span<const Panel> loop, const Vec2& p);

/// Distance from `p` to the segment [a, b].
double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

// Geometric weights of the shape derivative for the counterclockwise contour.

/// Rotation about the centroid (positive theta = counterclockwise): -(r . t).
double weight_rotation(const Panel& panel);
/// Expansion along unit direction d about the centroid: (r . d)(d . n).
double weight_expansion(const Panel& panel, const Vec2& d_hat);
/// Rigid translation along unit direction d: d . n.
double weight_translation(const Panel& panel, const Vec2& d_hat);

}  // namespace metasurf
