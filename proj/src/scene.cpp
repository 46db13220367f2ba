#include "metasurf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metasurf/error.hpp"
#include "metasurf/quadrature.hpp"

namespace metasurf {

ExitLine ExitLine::make(const Vec2& a, const Vec2& b, int min_nodes, double lambda0) {
  const double len = (b - a).norm();
  if (!(len > 0.0)) throw GeometryError("exit line has zero length");
  constexpr int kPanelOrder = 8;
  const int wanted = std::max(min_nodes, static_cast<int>(std::ceil(10.0 * len / lambda0)));
  const int panels = std::max(1, (wanted + kPanelOrder - 1) / kPanelOrder);
  const GaussRule& rule = gauss_legendre(kPanelOrder);
  ExitLine line;
  line.a = a;
  line.b = b;
  for (int p = 0; p < panels; ++p) {
    for (int k = 0; k < kPanelOrder; ++k) {
      const double s = (p + 0.5 * (rule.nodes[k] + 1.0)) / panels;
      line.points.push_back(a + s * (b - a));
      line.weights.push_back(0.5 * rule.weights[k] * len / panels);
    }
  }
  return line;
}

BoundaryMesh build_mesh(const Scene& scene, const std::vector<MeshTopology>* topologies) {
  if (topologies && topologies->size() != scene.atoms.size())
    throw GeometryError("topology count does not match atom count");
  std::vector<AtomBoundary> parts;
  parts.reserve(scene.atoms.size());
  for (std::size_t i = 0; i < scene.atoms.size(); ++i) {
    const Atom& atom = scene.atoms[i];
    if (!(atom.eps_r > 0.0)) throw GeometryError("eps_r must be positive");
    const double medium = scene.lambda0 / std::sqrt(std::max(1.0, atom.eps_r));
    parts.push_back(build_boundary(atom.shape, atom.params, scene.panels_per_wavelength, medium,
                                   scene.element_order,
                                   topologies ? &(*topologies)[i] : nullptr,
                                   static_cast<int>(i)));
  }
  return assemble_mesh(std::move(parts), scene.panels_per_wavelength, scene.element_order);
}

void validate_scene(const Scene& scene, const BoundaryMesh& mesh, double margin) {
  const std::size_t n = mesh.atom_count();
  std::vector<double> radius(n, 0.0), longest(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (const auto& p : mesh.atom_panels(a)) {
      radius[a] = std::max(radius[a], (p.start - mesh.centroids[a]).norm());
      longest[a] = std::max(longest[a], p.length);
    }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double gap_needed = margin * std::max(longest[a], longest[b]);
      const double centre_gap = (mesh.centroids[a] - mesh.centroids[b]).norm();
      if (centre_gap > radius[a] + radius[b] + gap_needed) continue;
      const double gap = boundary_distance(mesh.atom_panels(a), mesh.atom_panels(b));
      if (gap <= gap_needed)
        throw GeometryError("atoms " + std::to_string(a) + " and " + std::to_string(b) +
                            " overlap or are closer than the required gap");
    }
    if (scene.exit_line.size() > 0) {
      const double d = [&] {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : mesh.atom_panels(a))
          best = std::min(best, segment_distance(p.start, scene.exit_line.a, scene.exit_line.b));
        return best;
      }();
      if (d <= longest[a] || inside(mesh.atom_panels(a), scene.exit_line.a))
        throw GeometryError("exit line intersects atom " + std::to_string(a));
    }
  }
}

}  // namespace metasurf
