#include "metasurf/io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "metasurf/error.hpp"

namespace metasurf {

namespace {

constexpr double kNm = 1e-9;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

// Key/value entries of one section with usage tracking.
class Section {
 public:
  Section() = default;
  Section(std::string name, int line) : name_(std::move(name)), line_(line) {}

  void add(const std::string& key, Entry e, bool repeatable) {
    auto& list = entries_[key];
    if (!list.empty() && !repeatable)
      throw ConfigError("duplicate key '" + key + "' in [" + name_ + "]", e.line);
    list.push_back(std::move(e));
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  int line() const { return line_; }
  const std::string& name() const { return name_; }

  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second.front();
  }
  std::vector<Entry> all(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? std::vector<Entry>{} : it->second;
  }

  /// Rejects keys outside `allowed`.
  void restrict_to(const std::set<std::string>& allowed) const {
    for (const auto& [key, list] : entries_)
      if (!allowed.count(key))
        throw ConfigError("unknown key '" + key + "' in [" + name_ + "]", list.front().line);
  }

  std::vector<double> numbers(const Entry& e, std::size_t count = 0) const {
    std::vector<double> out;
    for (const auto& tok : split_ws(e.value)) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
        throw ConfigError("'" + tok + "' is not a number", e.line);
      out.push_back(v);
    }
    if (count > 0 && out.size() != count)
      throw ConfigError("expected " + std::to_string(count) + " numbers, got " +
                            std::to_string(out.size()),
                        e.line);
    if (out.empty()) throw ConfigError("missing value", e.line);
    return out;
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    const Entry* e = find(key);
    if (!e) {
      if (fallback) return *fallback;
      throw ConfigError("missing key '" + key + "' in [" + name_ + "]", line_);
    }
    return numbers(*e, 1)[0];
  }

  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const {
    const Entry* e = find(key);
    if (!e) {
      if (fallback) return *fallback;
      throw ConfigError("missing key '" + key + "' in [" + name_ + "]", line_);
    }
    int v = 0;
    const std::string s = trim(e->value);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      throw ConfigError("'" + s + "' is not an integer", e->line);
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    const std::string s = trim(e->value);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("'" + s + "' is not a boolean", e->line);
  }

  Vec2 point_nm(const Entry& e) const {
    const auto v = numbers(e, 2);
    return Vec2(v[0], v[1]) * kNm;
  }

 private:
  std::string name_;
  int line_ = 0;
  std::map<std::string, std::vector<Entry>> entries_;
};

const std::set<std::string> kRepeatable{"atom", "focal_point_nm"};

std::map<std::string, Section> tokenize(const std::string& text) {
  static const std::set<std::string> known{"simulation", "material", "atoms",  "exit_line",
                                           "cost",       "optimize", "active", "field_map"};
  std::map<std::string, Section> sections;
  Section* current = nullptr;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", lineno);
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!known.count(name)) throw ConfigError("unknown section [" + name + "]", lineno);
      if (sections.count(name)) throw ConfigError("duplicate section [" + name + "]", lineno);
      current = &sections.emplace(name, Section(name, lineno)).first->second;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
    if (!current) throw ConfigError("key outside of any section", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", lineno);
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", lineno);
    current->add(key, {value, lineno}, kRepeatable.count(key) > 0);
  }
  return sections;
}

BaseShape parse_shape(const Section& s) {
  const Entry* kind = s.find("shape");
  if (!kind) throw ConfigError("missing key 'shape' in [atoms]", s.line());
  const std::string name = trim(kind->value);
  std::set<std::string> allowed{"shape",         "atom",          "lattice_count",
                                "lattice_pitch_nm", "lattice_start_nm", "lattice_direction",
                                "lattice_theta", "lattice_lambda"};
  BaseShape shape;
  if (name == "rounded_rectangle") {
    allowed.insert({"lx_nm", "ly_nm", "corner_radius_nm"});
    s.restrict_to(allowed);
    const double lx = s.number("lx_nm") * kNm;
    shape = RoundedRectangle{lx, s.number("ly_nm") * kNm,
                             s.number("corner_radius_nm", lx / kNm / 8.0) * kNm};
  } else if (name == "circle") {
    allowed.insert("radius_nm");
    s.restrict_to(allowed);
    shape = Circle{s.number("radius_nm") * kNm};
  } else if (name == "polygon") {
    allowed.insert("vertices_nm");
    s.restrict_to(allowed);
    const Entry* e = s.find("vertices_nm");
    if (!e) throw ConfigError("missing key 'vertices_nm' in [atoms]", s.line());
    const auto v = s.numbers(*e);
    if (v.size() % 2 != 0) throw ConfigError("vertices_nm needs x y pairs", e->line);
    Polygon poly;
    for (std::size_t i = 0; i < v.size(); i += 2) poly.vertices.emplace_back(v[i] * kNm, v[i + 1] * kNm);
    shape = poly;
  } else {
    throw ConfigError("unknown shape '" + name + "'", kind->line);
  }
  try {
    validate_shape(shape);
  } catch (const GeometryError& e) {
    throw ConfigError(e.what(), kind->line);
  }
  return shape;
}

std::vector<AffineParams> parse_atoms(const Section& s) {
  std::vector<AffineParams> out;
  const auto explicit_atoms = s.all("atom");
  const bool lattice = s.has("lattice_count");
  if (!explicit_atoms.empty() && lattice)
    throw ConfigError("use either 'atom' entries or a lattice, not both", s.line());
  for (const auto& e : explicit_atoms) {
    const auto v = s.numbers(e, 5);
    out.push_back({v[0], v[1], v[2], v[3] * kNm, v[4] * kNm});
  }
  if (lattice) {
    const int count = s.integer("lattice_count");
    if (count < 0) throw ConfigError("lattice_count must be non-negative", s.find("lattice_count")->line);
    const double pitch = s.number("lattice_pitch_nm") * kNm;
    const Entry* start = s.find("lattice_start_nm");
    const Vec2 origin = start ? s.point_nm(*start) : Vec2::Zero();
    Vec2 dir(0.0, 1.0);
    if (const Entry* d = s.find("lattice_direction")) {
      const std::string v = trim(d->value);
      if (v == "x") dir = Vec2(1.0, 0.0);
      else if (v != "y") throw ConfigError("lattice_direction must be x or y", d->line);
    }
    const double theta = s.number("lattice_theta", 0.0);
    double lx = 1.0, ly = 1.0;
    if (const Entry* l = s.find("lattice_lambda")) {
      const auto v = s.numbers(*l, 2);
      lx = v[0];
      ly = v[1];
    }
    for (int i = 0; i < count; ++i) {
      const Vec2 c = origin + i * pitch * dir;
      out.push_back({theta, lx, ly, c.x(), c.y()});
    }
  } else {
    for (const char* k : {"lattice_pitch_nm", "lattice_start_nm", "lattice_direction",
                          "lattice_theta", "lattice_lambda"})
      if (const Entry* e = s.find(k))
        throw ConfigError(std::string("'") + k + "' requires lattice_count", e->line);
  }
  return out;
}

ActiveParams parse_active(const Section* s, std::size_t atoms) {
  std::array<bool, kParamCount> mask{};
  std::vector<int> which;
  if (!s) {
    mask[static_cast<int>(Param::Theta)] = true;
    return ActiveParams::uniform(atoms, mask);
  }
  s->restrict_to({"theta", "lambda_x", "lambda_y", "xc", "yc", "atoms"});
  for (int p = 0; p < kParamCount; ++p) mask[p] = s->boolean(param_name(static_cast<Param>(p)), false);
  if (const Entry* e = s->find("atoms")) {
    if (trim(e->value) != "all") {
      for (double v : s->numbers(*e)) {
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(atoms))
          throw ConfigError("active atom index out of range", e->line);
        which.push_back(static_cast<int>(v));
      }
      std::sort(which.begin(), which.end());
      which.erase(std::unique(which.begin(), which.end()), which.end());
    }
  }
  return ActiveParams::uniform(atoms, mask, which);
}

}  // namespace

std::vector<Vec2> FieldGrid::points() const {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (std::uint32_t j = 0; j < ny; ++j)
    for (std::uint32_t i = 0; i < nx; ++i)
      out.emplace_back(origin.x() + i * spacing.x(), origin.y() + j * spacing.y());
  return out;
}

FieldGrid default_grid(const Scene& scene) {
  Vec2 lo(0.0, 0.0), hi(0.0, 0.0);
  bool first = true;
  auto grow = [&](const Vec2& p) {
    if (first) {
      lo = hi = p;
      first = false;
    }
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  const BoundaryMesh mesh = build_mesh(scene);
  for (const auto& p : mesh.panels) grow(p.point);
  if (scene.exit_line.size() > 0) {
    grow(scene.exit_line.a);
    grow(scene.exit_line.b);
  }
  lo.array() -= scene.lambda0;
  hi.array() += scene.lambda0;
  const Vec2 extent = hi - lo;
  const double h = std::max(scene.lambda0 / 10.0, extent.maxCoeff() / 199.0);
  FieldGrid g;
  // Offset off the atom symmetry lines so samples do not land on flat edges.
  g.origin = lo - Vec2(0.37 * h, 0.29 * h);
  g.spacing = Vec2(h, h);
  g.nx = static_cast<std::uint32_t>(std::floor(extent.x() / h)) + 2;
  g.ny = static_cast<std::uint32_t>(std::floor(extent.y() / h)) + 2;
  return g;
}

CostSpec SceneConfig::cost_spec() const {
  CostSpec spec;
  spec.kind = cost;
  if (!target.focal_points.empty()) {
    spec.target = build_target_focus(target.focal_points, target.j0, scene);
    if (target.normalize) {
      const double amp = std::holds_alternative<PlaneWave>(scene.incident)
                             ? std::get<PlaneWave>(scene.incident).amplitude
                             : 1.0;
      const double want = amp * amp * scene.exit_line.length();
      const double have = spec.target.norm2();
      if (have > 0.0)
        for (auto& v : spec.target.values) v *= std::sqrt(want / have);
    }
  } else if (cost != CostKind::PointIntensity) {
    throw ConfigError("cost '" + std::string(cost_name(cost)) + "' needs at least one focal_point_nm");
  }
  if (cost == CostKind::PointIntensity) {
    if (point) spec.point = *point;
    else if (!target.focal_points.empty()) spec.point = target.focal_points.front();
    else throw ConfigError("point_intensity needs point_nm or focal_point_nm");
  }
  return spec;
}

SceneConfig parse_config(const std::string& text) {
  const auto sections = tokenize(text);
  auto section = [&](const std::string& name) -> const Section* {
    const auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  };
  auto required = [&](const std::string& name) -> const Section& {
    const Section* s = section(name);
    if (!s) throw ConfigError("missing section [" + name + "]");
    return *s;
  };

  SceneConfig cfg;
  Scene& sc = cfg.scene;

  const Section& sim = required("simulation");
  sim.restrict_to({"lambda0_nm", "panels_per_wavelength", "element_order", "junction_levels",
                   "incident_amplitude"});
  sc.lambda0 = sim.number("lambda0_nm") * kNm;
  if (!(sc.lambda0 > 0.0)) throw ConfigError("lambda0_nm must be positive", sim.find("lambda0_nm")->line);
  sc.panels_per_wavelength = sim.integer("panels_per_wavelength", 16);
  if (sc.panels_per_wavelength < 6) throw ConfigError("panels_per_wavelength must be at least 6", sim.line());
  sc.element_order = sim.integer("element_order", 8);
  if (sc.element_order < 1 || sc.element_order > 32)
    throw ConfigError("element_order must be in [1, 32]", sim.line());
  cfg.junction_levels = sim.integer("junction_levels", 0);
  if (cfg.junction_levels < 0) throw ConfigError("junction_levels must be non-negative", sim.line());
  sc.incident = PlaneWave{sim.number("incident_amplitude", 1.0)};

  double eps_r = 5.76;
  if (const Section* mat = section("material")) {
    mat->restrict_to({"eps_r"});
    eps_r = mat->number("eps_r", 5.76);
    if (!(eps_r > 0.0)) throw ConfigError("eps_r must be positive", mat->find("eps_r")->line);
  }

  if (const Section* atoms = section("atoms")) {
    if (atoms->has("shape") || atoms->has("atom") || atoms->has("lattice_count")) {
      const BaseShape shape = parse_shape(*atoms);
      for (const auto& p : parse_atoms(*atoms)) sc.atoms.push_back({shape, p, eps_r});
    } else {
      atoms->restrict_to({});
    }
  }

  const Section& exit = required("exit_line");
  exit.restrict_to({"endpoints_nm", "nodes"});
  {
    const Entry* e = exit.find("endpoints_nm");
    if (!e) throw ConfigError("missing key 'endpoints_nm' in [exit_line]", exit.line());
    const auto v = exit.numbers(*e, 4);
    const Vec2 a(v[0] * kNm, v[1] * kNm), b(v[2] * kNm, v[3] * kNm);
    if ((b - a).norm() == 0.0) throw ConfigError("exit line has zero length", e->line);
    const int nodes = exit.integer("nodes", 0);
    if (nodes < 0) throw ConfigError("nodes must be non-negative", exit.line());
    sc.exit_line = ExitLine::make(a, b, nodes, sc.lambda0);
  }

  if (const Section* cost = section("cost")) {
    cost->restrict_to({"kind", "focal_point_nm", "j0", "normalize_target", "point_nm"});
    if (const Entry* k = cost->find("kind")) {
      try {
        cfg.cost = parse_cost_kind(trim(k->value));
      } catch (const Error& e) {
        throw ConfigError(e.what(), k->line);
      }
    }
    for (const auto& e : cost->all("focal_point_nm")) cfg.target.focal_points.push_back(cost->point_nm(e));
    if (const Entry* j = cost->find("j0")) {
      const auto v = cost->numbers(*j);
      if (v.size() > 2) throw ConfigError("j0 takes a real part and an optional imaginary part", j->line);
      cfg.target.j0 = cplx(v[0], v.size() > 1 ? v[1] : 0.0);
    }
    cfg.target.normalize = cost->boolean("normalize_target", false);
    if (const Entry* p = cost->find("point_nm")) cfg.point = cost->point_nm(*p);
  }

  if (const Section* opt = section("optimize")) {
    opt->restrict_to({"max_iterations", "gradient_tolerance", "step_tolerance", "armijo_c1",
                      "backtrack", "max_backtracks", "history", "lambda_min", "lambda_max",
                      "centroid_box_nm", "initial_step", "overlap_margin"});
    OptimizeConfig& o = cfg.optimize;
    o.max_iterations = opt->integer("max_iterations", o.max_iterations);
    o.gradient_tolerance = opt->number("gradient_tolerance", o.gradient_tolerance);
    o.step_tolerance = opt->number("step_tolerance", o.step_tolerance);
    o.armijo_c1 = opt->number("armijo_c1", o.armijo_c1);
    o.backtrack = opt->number("backtrack", o.backtrack);
    o.max_backtracks = opt->integer("max_backtracks", o.max_backtracks);
    o.history = opt->integer("history", o.history);
    o.lambda_min = opt->number("lambda_min", o.lambda_min);
    o.lambda_max = opt->number("lambda_max", o.lambda_max);
    if (opt->has("centroid_box_nm")) o.centroid_box = opt->number("centroid_box_nm") * kNm;
    o.initial_step = opt->number("initial_step", o.initial_step);
    o.overlap_margin = opt->number("overlap_margin", o.overlap_margin);
    if (o.max_iterations < 0 || !(o.backtrack > 0.0 && o.backtrack < 1.0) ||
        !(o.armijo_c1 > 0.0 && o.armijo_c1 < 1.0) || o.max_backtracks < 0 || o.history < 1 ||
        !(o.initial_step > 0.0) || !(o.lambda_min > 0.0 && o.lambda_max >= o.lambda_min))
      throw ConfigError("invalid [optimize] settings", opt->line());
  }

  cfg.active = parse_active(section("active"), sc.atoms.size());

  if (const Section* fm = section("field_map")) {
    fm->restrict_to({"origin_nm", "spacing_nm", "size"});
    FieldGrid g;
    const Entry* o = fm->find("origin_nm");
    const Entry* h = fm->find("spacing_nm");
    const Entry* n = fm->find("size");
    if (!o || !h || !n) throw ConfigError("[field_map] needs origin_nm, spacing_nm and size", fm->line());
    g.origin = fm->point_nm(*o);
    g.spacing = fm->point_nm(*h);
    const auto sz = fm->numbers(*n, 2);
    if (!(g.spacing.x() > 0.0 && g.spacing.y() > 0.0)) throw ConfigError("spacing must be positive", h->line);
    if (sz[0] < 1 || sz[1] < 1 || sz[0] != std::floor(sz[0]) || sz[1] != std::floor(sz[1]) ||
        sz[0] * sz[1] > 1e7)
      throw ConfigError("size must be two positive integers", n->line);
    g.nx = static_cast<std::uint32_t>(sz[0]);
    g.ny = static_cast<std::uint32_t>(sz[1]);
    cfg.field_map = g;
  }
  return cfg;
}

SceneConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

bool FieldMap::operator==(const FieldMap& o) const {
  return encode_field_map(*this) == encode_field_map(o);
}

FieldMap compute_field_map(const LinearSystem& system, const BoundarySolution& solution,
                           const FieldGrid& grid) {
  FieldMap m;
  m.grid = grid;
  m.lambda0 = system.scene().lambda0;
  const std::vector<Vec2> pts = grid.points();
  try {
    m.values = evaluate_E(system, solution, pts);
  } catch (const SingularityError&) {
    // Some samples sit exactly on a boundary, where E is two-valued.
    m.values.resize(pts.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::size_t skipped = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      try {
        m.values[k] = evaluate_E(system, solution, std::span(&pts[k], 1))[0];
      } catch (const SingularityError&) {
        m.values[k] = CVec2(cplx(nan, nan), cplx(nan, nan));
        ++skipped;
      }
    }
    spdlog::warn("{} field-map samples lie on a boundary and are stored as NaN", skipped);
  }
  return m;
}

FieldMap incident_field_map(const Scene& scene, const FieldGrid& grid) {
  FieldMap m;
  m.grid = grid;
  m.lambda0 = scene.lambda0;
  m.values = incident_field(scene.incident, scene, grid.points());
  return m;
}

namespace {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("field map file is truncated");
  char buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string encode_field_map(const FieldMap& map) {
  if (map.values.size() != static_cast<std::size_t>(map.grid.nx) * map.grid.ny)
    throw Error("field map size does not match its grid");
  std::string out = "TEZF";
  put(out, kFieldMapVersion);
  put(out, map.grid.origin.x());
  put(out, map.grid.origin.y());
  put(out, map.grid.spacing.x());
  put(out, map.grid.spacing.y());
  put(out, map.grid.nx);
  put(out, map.grid.ny);
  put(out, map.lambda0);
  for (const auto& v : map.values) {
    put(out, v[0].real());
    put(out, v[0].imag());
    put(out, v[1].real());
    put(out, v[1].imag());
  }
  return out;
}

FieldMap decode_field_map(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "TEZF") != 0) throw Error("not a TEZF field map");
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kFieldMapVersion) throw Error("unsupported TEZF version " + std::to_string(version));
  FieldMap m;
  m.grid.origin.x() = get<double>(bytes, pos);
  m.grid.origin.y() = get<double>(bytes, pos);
  m.grid.spacing.x() = get<double>(bytes, pos);
  m.grid.spacing.y() = get<double>(bytes, pos);
  m.grid.nx = get<std::uint32_t>(bytes, pos);
  m.grid.ny = get<std::uint32_t>(bytes, pos);
  m.lambda0 = get<double>(bytes, pos);
  const std::size_t n = static_cast<std::size_t>(m.grid.nx) * m.grid.ny;
  if (bytes.size() - pos != n * 4 * sizeof(double)) throw Error("field map payload size mismatch");
  m.values.resize(n);
  for (auto& v : m.values) {
    const double a = get<double>(bytes, pos), b = get<double>(bytes, pos);
    const double c = get<double>(bytes, pos), d = get<double>(bytes, pos);
    v = CVec2(cplx(a, b), cplx(c, d));
  }
  return m;
}

void write_field_map_binary(const std::filesystem::path& path, const FieldMap& map) {
  write_atomic(path, encode_field_map(map));
}

FieldMap read_field_map_binary(const std::filesystem::path& path) {
  return decode_field_map(read_file(path));
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

namespace {

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }
  Csv& operator<<(double v) { return cell(format_double(v)); }
  Csv& operator<<(int v) { return cell(std::to_string(v)); }
  Csv& operator<<(std::size_t v) { return cell(std::to_string(v)); }
  Csv& operator<<(const std::string& v) { return cell(v); }
  Csv& operator<<(const char* v) { return cell(v); }
  Csv& operator<<(cplx v) { return (*this << v.real()) << v.imag(); }
  void end() {
    out_ += '\n';
    fresh_ = true;
  }
  const std::string& str() const { return out_; }

 private:
  Csv& cell(const std::string& s) {
    if (!fresh_) out_ += ',';
    out_ += s;
    fresh_ = false;
    return *this;
  }
  std::string out_;
  bool fresh_ = true;
};

}  // namespace

void write_field_map_csv(const std::filesystem::path& path, const FieldMap& map) {
  std::ostringstream head;
  head << "# lambda0_nm=" << format_double(map.lambda0 / kNm)
       << " origin_nm=" << format_double(map.grid.origin.x() / kNm) << ','
       << format_double(map.grid.origin.y() / kNm)
       << " spacing_nm=" << format_double(map.grid.spacing.x() / kNm) << ','
       << format_double(map.grid.spacing.y() / kNm) << " nx=" << map.grid.nx
       << " ny=" << map.grid.ny << '\n';
  Csv csv{"i", "j", "x_nm", "y_nm", "ex_re_V_per_m", "ex_im_V_per_m", "ey_re_V_per_m",
          "ey_im_V_per_m", "intensity_V2_per_m2"};
  const auto pts = map.grid.points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto& v = map.values[k];
    csv << static_cast<std::size_t>(k % map.grid.nx) << static_cast<std::size_t>(k / map.grid.nx)
        << pts[k].x() / kNm << pts[k].y() / kNm << v[0] << v[1] << v.squaredNorm();
    csv.end();
  }
  write_atomic(path, head.str() + csv.str());
}

std::string line_field_csv(const LineField& field) {
  Csv csv{"x_nm", "y_nm", "weight_nm", "ex_re_V_per_m", "ex_im_V_per_m", "ey_re_V_per_m",
          "ey_im_V_per_m", "intensity_V2_per_m2"};
  for (std::size_t k = 0; k < field.size(); ++k) {
    const auto& v = field.values[k];
    csv << field.nodes[k].x() / kNm << field.nodes[k].y() / kNm << field.weights[k] / kNm << v[0]
        << v[1] << v.squaredNorm();
    csv.end();
  }
  return csv.str();
}

std::string boundary_csv(const BoundaryMesh& mesh, const BoundarySolution& solution,
                         const BoundaryTraces& traces) {
  Csv csv{"atom",         "x_nm",         "y_nm",           "nx",            "ny",
          "weight_nm",    "h_re_A_per_m", "h_im_A_per_m",   "dhdn_re_A_per_m2",
          "dhdn_im_A_per_m2", "en_ext_re_V_per_m", "en_ext_im_V_per_m", "et_re_V_per_m",
          "et_im_V_per_m"};
  for (std::size_t i = 0; i < mesh.panels.size(); ++i) {
    const Panel& p = mesh.panels[i];
    csv << p.atom << p.point.x() / kNm << p.point.y() / kNm << p.normal.x() << p.normal.y()
        << p.length / kNm << solution.h[i] << solution.dh_dn_ext[i] << traces.en_ext[i]
        << traces.et[i];
    csv.end();
  }
  return csv.str();
}

std::string trajectory_csv(const DesignTrajectory& trajectory) {
  Csv csv{"iteration", "cost", "scaled_gradient_norm", "scaled_step", "backtracks",
          "assemblies", "forward_solves", "adjoint_solves"};
  for (const auto& r : trajectory.records) {
    csv << r.iteration << r.cost << r.gradient_norm << r.step << r.backtracks
        << static_cast<std::size_t>(r.counts.assemblies)
        << static_cast<std::size_t>(r.counts.forward_solves)
        << static_cast<std::size_t>(r.counts.adjoint_solves);
    csv.end();
  }
  return csv.str();
}

std::string gradient_csv(const DesignTrajectory& trajectory, const ActiveParams& active) {
  Csv csv{"iteration", "atom", "parameter", "value_si", "gradient_si"};
  for (const auto& r : trajectory.records)
    for (std::size_t k = 0; k < active.size() && k < r.gradient.size(); ++k) {
      const auto [atom, p] = active.entries[k];
      csv << r.iteration << atom << param_name(p) << get_param(r.params[atom], p) << r.gradient[k];
      csv.end();
    }
  return csv.str();
}

std::string design_csv(const Scene& scene) {
  Csv csv{"atom", "theta_rad", "lambda_x", "lambda_y", "xc_nm", "yc_nm"};
  for (std::size_t a = 0; a < scene.atoms.size(); ++a) {
    const AffineParams& p = scene.atoms[a].params;
    csv << a << p.theta << p.lambda_x << p.lambda_y << p.xc / kNm << p.yc / kNm;
    csv.end();
  }
  return csv.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  Csv csv{"sweep", "cost", "value_si", "adjoint_si", "fd_si", "relative_error", "fd_step_si",
          "pass"};
  for (const auto& r : rows) {
    csv << sweep_name(r.kind) << cost_name(r.cost) << r.value << r.adjoint << r.fd << r.rel_error
        << r.best_step << (r.pass ? "true" : "false");
    csv.end();
  }
  return csv.str();
}

std::string oracle_csv(const std::vector<OracleReport>& reports) {
  Csv csv{"case", "metric", "value", "tolerance", "pass", "metadata"};
  for (const auto& r : reports) {
    csv << r.case_id << r.metric << r.value << r.tolerance << (r.pass ? "true" : "false")
        << ('"' + r.metadata + '"');
    csv.end();
  }
  return csv.str();
}

}  // namespace metasurf
