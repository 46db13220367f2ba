#include "metasurf/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "metasurf/error.hpp"
#include "metasurf/quadrature.hpp"

namespace metasurf {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(q2 - q1, p1 - q1);
  const double d2 = cross(q2 - q1, p2 - q1);
  const double d3 = cross(p2 - p1, q1 - p1);
  const double d4 = cross(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

double signed_area(std::span<const Vec2> loop) {
  double a = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) a += cross(loop[i], loop[(i + 1) % loop.size()]);
  return 0.5 * a;
}

// Arclength of an affinely mapped segment.
double mapped_length(const Segment& seg, const Mat2& linear) {
  const GaussRule& rule = gauss_legendre(32);
  double len = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double tau = 0.5 * (rule.nodes[k] + 1.0);
    len += 0.5 * rule.weights[k] * (linear * seg.derivative(tau)).norm();
  }
  return len;
}

std::atomic<std::uint64_t> next_mesh_id{1};
std::atomic<int> junction_level_count{0};
constexpr double kJunctionRatio = 0.3;

}  // namespace

int junction_levels() { return junction_level_count.load(); }
void set_junction_levels(int levels) { junction_level_count = std::max(0, levels); }

void validate_shape(const BaseShape& shape) {
  if (const auto* rr = std::get_if<RoundedRectangle>(&shape)) {
    if (!(rr->lx > 0.0) || !(rr->ly > 0.0))
      throw GeometryError("rounded rectangle: side lengths must be positive");
    if (!(rr->radius > 0.0) || rr->radius > 0.5 * std::min(rr->lx, rr->ly) * (1.0 + 1e-12))
      throw GeometryError("rounded rectangle: corner radius must satisfy 0 < R <= min(Lx, Ly)/2");
  } else if (const auto* c = std::get_if<Circle>(&shape)) {
    if (!(c->radius > 0.0)) throw GeometryError("circle: radius must be positive");
  } else {
    const auto& poly = std::get<Polygon>(shape);
    const auto& v = poly.vertices;
    if (v.size() < 3) throw GeometryError("polygon: need at least three vertices");
    double scale = 0.0;
    for (const auto& p : v) scale = std::max(scale, p.norm());
    if (!(std::abs(signed_area(v)) > 1e-12 * scale * scale))
      throw GeometryError("polygon: zero area");
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      if ((v[(i + 1) % n] - v[i]).norm() <= 1e-12 * scale)
        throw GeometryError("polygon: repeated vertex");
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
          throw GeometryError("polygon: self-intersecting boundary");
      }
    }
  }
}

Mat2 AffineParams::rotation() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat2 AffineParams::linear() const {
  return rotation() * Eigen::DiagonalMatrix<double, 2>(lambda_x, lambda_y);
}

Segment Segment::line(const Vec2& a, const Vec2& b) {
  Segment s;
  s.kind = Kind::Line;
  s.a = a;
  s.b = b;
  return s;
}

Segment Segment::arc(const Vec2& center, double radius, double phi0, double phi1) {
  Segment s;
  s.kind = Kind::Arc;
  s.center = center;
  s.radius = radius;
  s.phi0 = phi0;
  s.phi1 = phi1;
  return s;
}

double Segment::length() const {
  return kind == Kind::Line ? (b - a).norm() : radius * std::abs(phi1 - phi0);
}

Vec2 Segment::point(double tau) const {
  if (kind == Kind::Line) return a + tau * (b - a);
  const double phi = phi0 + tau * (phi1 - phi0);
  return center + radius * Vec2(std::cos(phi), std::sin(phi));
}

Vec2 Segment::derivative(double tau) const {
  if (kind == Kind::Line) return b - a;
  const double phi = phi0 + tau * (phi1 - phi0);
  return radius * (phi1 - phi0) * Vec2(-std::sin(phi), std::cos(phi));
}

Vec2 Segment::chord(double tau, double dtau) const {
  if (kind == Kind::Line) return dtau * (b - a);
  const double dphi = dtau * (phi1 - phi0);
  const double mid = phi0 + tau * (phi1 - phi0) + 0.5 * dphi;
  return 2.0 * radius * std::sin(0.5 * dphi) * Vec2(-std::sin(mid), std::cos(mid));
}

std::vector<Segment> base_segments(const BaseShape& shape) {
  validate_shape(shape);
  std::vector<Segment> segs;
  if (const auto* rr = std::get_if<RoundedRectangle>(&shape)) {
    const double hx = 0.5 * rr->lx, hy = 0.5 * rr->ly, r = rr->radius;
    const double tiny = 1e-12 * (rr->lx + rr->ly);
    auto add_line = [&](Vec2 a, Vec2 b) {
      if ((b - a).norm() > tiny) segs.push_back(Segment::line(a, b));
    };
    add_line({hx, -hy + r}, {hx, hy - r});
    segs.push_back(Segment::arc({hx - r, hy - r}, r, 0.0, 0.5 * kPi));
    add_line({hx - r, hy}, {-hx + r, hy});
    segs.push_back(Segment::arc({-hx + r, hy - r}, r, 0.5 * kPi, kPi));
    add_line({-hx, hy - r}, {-hx, -hy + r});
    segs.push_back(Segment::arc({-hx + r, -hy + r}, r, kPi, 1.5 * kPi));
    add_line({-hx + r, -hy}, {hx - r, -hy});
    segs.push_back(Segment::arc({hx - r, -hy + r}, r, 1.5 * kPi, 2.0 * kPi));
  } else if (const auto* c = std::get_if<Circle>(&shape)) {
    segs.push_back(Segment::arc(Vec2::Zero(), c->radius, 0.0, 2.0 * kPi));
  } else {
    std::vector<Vec2> v = std::get<Polygon>(shape).vertices;
    if (signed_area(v) < 0.0) std::reverse(v.begin(), v.end());
    const Vec2 centroid = polygon_centroid(v).first;
    for (auto& p : v) p -= centroid;
    for (std::size_t i = 0; i < v.size(); ++i)
      segs.push_back(Segment::line(v[i], v[(i + 1) % v.size()]));
  }
  return segs;
}

AtomBoundary build_boundary(const BaseShape& shape, const AffineParams& params,
                            int panels_per_wavelength, double medium_wavelength, int order,
                            const MeshTopology* topology, int atom_index) {
  if (panels_per_wavelength < 6)
    throw GeometryError("panels_per_wavelength must be at least 6");
  if (!(medium_wavelength > 0.0)) throw GeometryError("wavelength must be positive");
  if (order < 1 || order > 32) throw GeometryError("element order must lie in [1, 32]");
  if (!(params.lambda_x > 0.0) || !(params.lambda_y > 0.0))
    throw GeometryError("affine scale factors must be positive");

  const std::vector<Segment> segs = base_segments(shape);
  if (topology && topology->size() != segs.size())
    throw GeometryError("mesh topology does not match the shape's segment count");

  const GaussRule& rule = gauss_legendre(order);
  const Mat2 lin = params.linear();
  const Vec2 off = params.center();
  const double max_cell = medium_wavelength / panels_per_wavelength;
  const double wmax = *std::max_element(rule.weights.begin(), rule.weights.end());

  // Cell boundaries in the element parameter: cumulative Gauss weights.
  std::vector<double> cells(order + 1, -1.0);
  for (int k = 0; k < order; ++k) cells[k + 1] = cells[k] + rule.weights[k];
  cells[order] = 1.0;

  AtomBoundary out;
  out.topology.resize(segs.size());

  // Curvature jumps at segment junctions limit the solution's smoothness, so
  // the end elements of each segment are split geometrically toward them.
  const bool grade = !std::holds_alternative<Circle>(shape);
  const int levels = junction_levels();
  auto make_elements = [&](std::size_t s, int count, std::vector<Element>& els) {
    std::vector<double> cuts;
    for (int e = 0; e <= count; ++e) cuts.push_back(static_cast<double>(e) / count);
    if (grade && levels > 0) {
      const double h = 1.0 / count;
      std::vector<double> extra;
      for (int l = 1; l <= levels; ++l) {
        const double f = h * std::pow(kJunctionRatio, l);
        extra.push_back(f);
        extra.push_back(1.0 - f);
      }
      cuts.insert(cuts.end(), extra.begin(), extra.end());
      std::sort(cuts.begin(), cuts.end());
    }
    els.clear();
    for (std::size_t e = 0; e + 1 < cuts.size(); ++e) {
      Element el;
      el.atom = atom_index;
      el.segment = static_cast<int>(s);
      el.curve = segs[s];
      el.tau0 = cuts[e];
      el.tau1 = cuts[e + 1];
      el.linear = lin;
      el.offset = off;
      el.order = order;
      els.push_back(el);
    }
  };

  for (std::size_t s = 0; s < segs.size(); ++s) {
    std::vector<Element> els;
    int count;
    if (topology) {
      count = (*topology)[s];
      if (count < 1) throw GeometryError("mesh topology entries must be positive");
      make_elements(s, count, els);
    } else {
      const double len = mapped_length(segs[s], lin);
      count = std::max(1, static_cast<int>(std::ceil(0.5 * wmax * len / max_cell)));
      for (;;) {
        make_elements(s, count, els);
        double longest = 0.0;
        for (const auto& el : els)
          for (int k = 0; k < order; ++k)
            longest = std::max(longest, rule.weights[k] * el.velocity(rule.nodes[k]).norm());
        if (longest <= max_cell) break;
        ++count;
      }
    }
    out.topology[s] = count;
    for (auto& el : els) {
      el.first_panel = out.panels.size();
      double len = 0.0;
      for (int k = 0; k < order; ++k) {
        const double t = rule.nodes[k];
        const Vec2 vel = el.velocity(t);
        const double speed = vel.norm();
        Panel p;
        p.start = el.position(cells[k]);
        p.end = el.position(cells[k + 1]);
        p.point = el.position(t);
        p.length = rule.weights[k] * speed;
        p.tangent = vel / speed;
        p.normal = Vec2(p.tangent.y(), -p.tangent.x());
        p.atom = atom_index;
        p.element = static_cast<int>(out.elements.size());
        len += p.length;
        out.max_panel_length = std::max(out.max_panel_length, p.length);
        out.panels.push_back(p);
      }
      el.length = len;
      el.midpoint = el.position(0.0);
      out.elements.push_back(el);
    }
  }

  std::vector<Vec2> loop;
  loop.reserve(out.panels.size());
  for (const auto& p : out.panels) loop.push_back(p.start);
  const auto [centroid, area] = polygon_centroid(loop);
  double perim = 0.0;
  for (const auto& p : out.panels) perim += p.length;
  if (!(area > 1e-10 * perim * perim)) throw GeometryError("degenerate boundary: zero enclosed area");
  out.centroid = centroid;
  out.area = area;
  for (auto& p : out.panels) p.r = p.point - centroid;
  return out;
}

BoundaryMesh assemble_mesh(std::vector<AtomBoundary> atoms, int panels_per_wavelength, int order) {
  BoundaryMesh mesh;
  mesh.panels_per_wavelength = panels_per_wavelength;
  mesh.order = order;
  mesh.id = next_mesh_id.fetch_add(1);
  mesh.atom_offsets.push_back(0);
  mesh.element_offsets.push_back(0);
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    auto& atom = atoms[a];
    const std::size_t panel_base = mesh.panels.size();
    const int element_base = static_cast<int>(mesh.elements.size());
    for (auto& p : atom.panels) {
      p.atom = static_cast<int>(a);
      p.element += element_base;
      mesh.panels.push_back(p);
    }
    for (auto& el : atom.elements) {
      el.atom = static_cast<int>(a);
      el.first_panel += panel_base;
      mesh.elements.push_back(el);
    }
    mesh.atom_offsets.push_back(mesh.panels.size());
    mesh.element_offsets.push_back(mesh.elements.size());
    mesh.topologies.push_back(std::move(atom.topology));
    mesh.centroids.push_back(atom.centroid);
  }
  return mesh;
}

double BoundaryMesh::polygon_perimeter(std::size_t atom) const {
  double perim = 0.0;
  for (const auto& p : atom_panels(atom)) perim += (p.end - p.start).norm();
  return perim;
}

std::pair<Vec2, double> polygon_centroid(std::span<const Vec2> loop) {
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Vec2& p = loop[i];
    const Vec2& q = loop[(i + 1) % loop.size()];
    const double w = cross(p, q);
    a += w;
    c += w * (p + q);
  }
  a *= 0.5;
  if (a == 0.0) return {Vec2::Zero(), 0.0};
  return {c / (6.0 * a), a};
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double boundary_distance(std::span<const Panel> a, std::span<const Panel> b) {
  Eigen::AlignedBox2d box_b;
  for (const auto& q : b) box_b.extend(q.start);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a) {
    for (const auto& q : b) {
      if (segments_intersect(p.start, p.end, q.start, q.end)) return 0.0;
      best = std::min({best, segment_distance(p.start, q.start, q.end),
                       segment_distance(p.end, q.start, q.end),
                       segment_distance(q.start, p.start, p.end),
                       segment_distance(q.end, p.start, p.end)});
    }
  }
  // containment without boundary crossing
  if (!a.empty() && !b.empty() && (inside(b, a.front().start) || inside(a, b.front().start)))
    return 0.0;
  return best;
}

double boundary_distance(const AtomBoundary& a, const AtomBoundary& b) {
  return boundary_distance(std::span<const Panel>(a.panels), std::span<const Panel>(b.panels));
}

bool inside(std::span<const Panel> loop, const Vec2& p) {
  bool in = false;
  for (const auto& s : loop) {
    const Vec2& a = s.start;
    const Vec2& b = s.end;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

double weight_rotation(const Panel& panel) { return -panel.r.dot(panel.tangent); }

double weight_expansion(const Panel& panel, const Vec2& d_hat) {
  return panel.r.dot(d_hat) * d_hat.dot(panel.normal);
}

double weight_translation(const Panel& panel, const Vec2& d_hat) { return d_hat.dot(panel.normal); }

}  // namespace metasurf
