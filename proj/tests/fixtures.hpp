#pragma once

// Scenes shared by the module tests and the acceptance run.

#include <filesystem>
#include <string>

#include "metasurf/io.hpp"

namespace metasurf::testing {

inline constexpr double nm = 1e-9;

inline std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(METASURF_CONFIG_DIR) / name;
}

inline SceneConfig three_atom_config(int ppw = 16) {
  SceneConfig cfg = load_config(config_path("three_atom.cfg"));
  cfg.scene.panels_per_wavelength = ppw;
  return cfg;
}

inline Scene circle_scene(double radius, double eps_r = 5.76, int ppw = 16) {
  Scene s;
  s.panels_per_wavelength = ppw;
  s.atoms.push_back({Circle{radius}, {}, eps_r});
  s.exit_line = ExitLine::make(Vec2(3 * radius, -2 * radius), Vec2(3 * radius, 2 * radius), 16,
                               s.lambda0);
  return s;
}

}  // namespace metasurf::testing
