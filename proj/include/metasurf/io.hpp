#pragma once

// Scene configuration files, field maps and CSV serialization.
//
// Human-facing files carry lengths in nm; everything in memory is SI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metasurf/costs.hpp"
#include "metasurf/gradient.hpp"
#include "metasurf/optimize.hpp"
#include "metasurf/solver.hpp"
#include "metasurf/verify.hpp"

namespace metasurf {

/// Regular sampling grid, row-major with x fastest.
struct FieldGrid {
  Vec2 origin = Vec2::Zero();
  Vec2 spacing = Vec2::Zero();
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;

  std::vector<Vec2> points() const;
};

/// Grid covering the atoms and the exit line with a one-wavelength margin,
/// at most 200 samples per side.
FieldGrid default_grid(const Scene& scene);

struct TargetSpec {
  std::vector<Vec2> focal_points;
  cplx j0 = 1.0;
  /// Rescale E_d so that its line norm equals that of the incident plane wave.
  bool normalize = false;
};

struct SceneConfig {
  Scene scene;
  CostKind cost = CostKind::AngleBetweenFields;
  TargetSpec target;
  std::optional<Vec2> point;  ///< x0 of PointIntensity; defaults to the first focal point
  OptimizeConfig optimize;
  ActiveParams active;
  std::optional<FieldGrid> field_map;
  int junction_levels = 0;

  CostSpec cost_spec() const;
};

/// Strict parser: unknown sections or keys, duplicates and malformed values
/// throw ConfigError with the offending line.
SceneConfig parse_config(const std::string& text);
SceneConfig load_config(const std::filesystem::path& path);

struct FieldMap {
  FieldGrid grid;
  double lambda0 = 0.0;  // m
  std::vector<CVec2> values;

  bool operator==(const FieldMap& other) const;
};

FieldMap compute_field_map(const LinearSystem& system, const BoundarySolution& solution,
                           const FieldGrid& grid);
/// Incident field only (no scatterers).
FieldMap incident_field_map(const Scene& scene, const FieldGrid& grid);

/// Binary layout, little-endian: "TEZF", u32 version (1), f64 origin x, y,
/// f64 spacing x, y (m), u32 nx, ny, f64 lambda0 (m), then per sample
/// f64 Re Ex, Im Ex, Re Ey, Im Ey.
inline constexpr std::uint32_t kFieldMapVersion = 1;
std::string encode_field_map(const FieldMap& map);
FieldMap decode_field_map(const std::string& bytes);
void write_field_map_binary(const std::filesystem::path& path, const FieldMap& map);
FieldMap read_field_map_binary(const std::filesystem::path& path);
void write_field_map_csv(const std::filesystem::path& path, const FieldMap& map);

/// Writes to a temporary sibling, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

std::string line_field_csv(const LineField& field);
std::string boundary_csv(const BoundaryMesh& mesh, const BoundarySolution& solution,
                         const BoundaryTraces& traces);
std::string trajectory_csv(const DesignTrajectory& trajectory);
/// One row per iteration and active parameter.
std::string gradient_csv(const DesignTrajectory& trajectory, const ActiveParams& active);
std::string design_csv(const Scene& scene);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string oracle_csv(const std::vector<OracleReport>& reports);

}  // namespace metasurf
