#include "bcml/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace bcml::io {
namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw ConfigError("config: [" + section + "] " + key + ": not a number: '" + v + "'");
  }
}

int to_int(const std::string& section, const std::string& key, const std::string& v) {
  double d = to_double(section, key, v);
  if (d != std::floor(d)) throw ConfigError("config: [" + section + "] " + key + ": not an integer");
  return static_cast<int>(d);
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: [" + section + "] " + key + ": not a boolean: '" + v + "'");
}

void require_positive(const std::string& name, double v) {
  if (!(v > 0.0)) throw ConfigError("config: " + name + " must be positive");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  c.source_text = text;

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  bool manifold_seen = false;

  auto unknown = [&](const std::string& key) {
    throw ConfigError("config: line " + std::to_string(lineno) + ": unknown key '" + key +
                      "' in section [" + section + "]");
  };

  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"manifold", "wave", "bcm", "algebra", "recovery", "solenoidal", "run"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw ConfigError("config: line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      if (section == "manifold") manifold_seen = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + ": empty key or value");

    if (section == "manifold") {
      manifold_seen = true;
      if (key == "kind") c.manifold.kind = val;
      else if (key == "nx") c.manifold.nx = to_int(section, key, val);
      else if (key == "ny") c.manifold.ny = to_int(section, key, val);
      else if (key == "nz") c.manifold.nz = to_int(section, key, val);
      else if (key == "length") c.manifold.length = to_double(section, key, val);
      else if (key == "speed") c.manifold.speed = val;
      else if (key == "conformal") c.manifold.conformal = val;
      else unknown(key);
    } else if (section == "wave") {
      if (key == "T") c.wave.T = to_double(section, key, val);
      else if (key == "T_factor") c.wave.T_factor = to_double(section, key, val);
      else if (key == "dt") c.wave.dt = to_double(section, key, val);
      else if (key == "cfl_safety") c.wave.cfl_safety = to_double(section, key, val);
      else if (key == "control_dt") c.wave.control_dt = to_double(section, key, val);
      else unknown(key);
    } else if (section == "bcm") {
      if (key == "tol_psd") c.bcm.tol_psd = to_double(section, key, val);
      else if (key == "tol_rank") c.bcm.tol_rank = to_double(section, key, val);
      else if (key == "s_count") c.bcm.s_count = to_int(section, key, val);
      else unknown(key);
    } else if (section == "algebra") {
      if (key == "cluster_eps") c.algebra.cluster_eps = to_double(section, key, val);
      else if (key == "boundary_eps") c.algebra.boundary_eps = to_double(section, key, val);
      else if (key == "max_sweeps") c.algebra.max_sweeps = to_int(section, key, val);
      else if (key == "tol_offdiag") c.algebra.tol_offdiag = to_double(section, key, val);
      else if (key == "defect_ceiling") c.algebra.defect_ceiling = to_double(section, key, val);
      else unknown(key);
    } else if (section == "recovery") {
      if (key == "k_neighbors") c.recovery.k_neighbors = to_int(section, key, val);
      else if (key == "cond_cap") c.recovery.cond_cap = to_double(section, key, val);
      else if (key == "knn_edges") c.recovery.knn_edges = to_int(section, key, val);
      else if (key == "radius_factor") c.recovery.radius_factor = to_double(section, key, val);
      else unknown(key);
    } else if (section == "solenoidal") {
      if (key == "sizes") {
        c.solenoidal.sizes.clear();
        std::istringstream ss(val);
        std::string tok;
        while (std::getline(ss, tok, ',')) c.solenoidal.sizes.push_back(to_int(section, key, trim(tok)));
        if (c.solenoidal.sizes.empty()) throw ConfigError("config: solenoidal.sizes empty");
      } else if (key == "s_step") c.solenoidal.s_step = to_double(section, key, val);
      else if (key == "burn_in") c.solenoidal.burn_in = to_int(section, key, val);
      else unknown(key);
    } else if (section == "run") {
      if (key == "out_dir") c.run.out_dir = val;
      else if (key == "seed") c.run.seed = static_cast<std::uint64_t>(std::stoull(val));
      else if (key == "emit_plots") c.run.emit_plots = to_bool(section, key, val);
      else unknown(key);
    } else {
      throw ConfigError("config: line " + std::to_string(lineno) + ": unknown section [" + section + "]");
    }
  }

  if (!manifold_seen) throw ConfigError("config: missing [manifold] section");

  // Structural validation that needs no manifold.
  const auto& m = c.manifold;
  if (m.kind == "interval") {
    if (m.nx < 3) throw ConfigError("config: interval needs nx >= 3");
    require_positive("manifold.length", m.length);
  } else if (m.kind == "rect2d") {
    if (m.nx < 3 || m.ny < 3) throw ConfigError("config: rect2d needs nx, ny >= 3");
  } else if (m.kind == "box3d") {
    if (m.nx < 3 || m.ny < 3 || m.nz < 3) throw ConfigError("config: box3d needs nx, ny, nz >= 3");
  } else {
    throw ConfigError("config: manifold.kind must be interval | rect2d | box3d, got '" + m.kind + "'");
  }

  if (c.wave.T < 0 || c.wave.T_factor < 0) throw ConfigError("config: T, T_factor must be >= 0");
  if ((c.wave.T > 0) == (c.wave.T_factor > 0))
    throw ConfigError("config: give exactly one of wave.T and wave.T_factor");
  require_positive("wave.cfl_safety", c.wave.cfl_safety);
  if (c.wave.dt < 0 || c.wave.control_dt < 0) throw ConfigError("config: wave steps must be >= 0");
  require_positive("bcm.tol_psd", c.bcm.tol_psd);
  require_positive("bcm.tol_rank", c.bcm.tol_rank);
  if (c.bcm.s_count < 2) throw ConfigError("config: bcm.s_count must be >= 2");
  if (c.algebra.max_sweeps < 1) throw ConfigError("config: algebra.max_sweeps must be >= 1");
  require_positive("algebra.tol_offdiag", c.algebra.tol_offdiag);
  require_positive("algebra.defect_ceiling", c.algebra.defect_ceiling);
  if (c.recovery.k_neighbors < 3) throw ConfigError("config: recovery.k_neighbors must be >= 3");
  require_positive("recovery.cond_cap", c.recovery.cond_cap);
  require_positive("recovery.radius_factor", c.recovery.radius_factor);
  for (int s : c.solenoidal.sizes)
    if (s < 3) throw ConfigError("config: solenoidal.sizes entries must be >= 3");
  if (c.solenoidal.burn_in < 1) throw ConfigError("config: solenoidal.burn_in must be >= 1");
  if (c.solenoidal.s_step < 0) throw ConfigError("config: solenoidal.s_step must be >= 0");

  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[manifold]\n"
    << "kind = " << c.manifold.kind << "\n"
    << "nx = " << c.manifold.nx << "\n";
  if (c.manifold.kind != "interval") o << "ny = " << c.manifold.ny << "\n";
  if (c.manifold.kind == "box3d") o << "nz = " << c.manifold.nz << "\n";
  if (c.manifold.kind == "interval")
    o << "length = " << c.manifold.length << "\nspeed = " << c.manifold.speed << "\n";
  if (c.manifold.kind == "rect2d") o << "conformal = " << c.manifold.conformal << "\n";
  o << "\n[wave]\n";
  if (c.wave.T > 0) o << "T = " << c.wave.T << "\n";
  if (c.wave.T_factor > 0) o << "T_factor = " << c.wave.T_factor << "\n";
  if (c.wave.dt > 0) o << "dt = " << c.wave.dt << "\n";
  o << "cfl_safety = " << c.wave.cfl_safety << "\n";
  if (c.wave.control_dt > 0) o << "control_dt = " << c.wave.control_dt << "\n";
  o << "\n[bcm]\n"
    << "tol_psd = " << c.bcm.tol_psd << "\n"
    << "tol_rank = " << c.bcm.tol_rank << "\n"
    << "s_count = " << c.bcm.s_count << "\n";
  o << "\n[algebra]\n";
  if (c.algebra.cluster_eps >= 0) o << "cluster_eps = " << c.algebra.cluster_eps << "\n";
  if (c.algebra.boundary_eps >= 0) o << "boundary_eps = " << c.algebra.boundary_eps << "\n";
  o << "max_sweeps = " << c.algebra.max_sweeps << "\n"
    << "tol_offdiag = " << c.algebra.tol_offdiag << "\n"
    << "defect_ceiling = " << c.algebra.defect_ceiling << "\n";
  o << "\n[recovery]\n"
    << "k_neighbors = " << c.recovery.k_neighbors << "\n"
    << "cond_cap = " << c.recovery.cond_cap << "\n";
  if (c.recovery.knn_edges > 0) o << "knn_edges = " << c.recovery.knn_edges << "\n";
  o << "radius_factor = " << c.recovery.radius_factor << "\n";
  o << "\n[solenoidal]\nsizes = ";
  for (std::size_t i = 0; i < c.solenoidal.sizes.size(); ++i)
    o << (i ? "," : "") << c.solenoidal.sizes[i];
  o << "\n";
  if (c.solenoidal.s_step > 0) o << "s_step = " << c.solenoidal.s_step << "\n";
  o << "burn_in = " << c.solenoidal.burn_in << "\n";
  o << "\n[run]\n"
    << "out_dir = " << c.run.out_dir << "\n"
    << "seed = " << c.run.seed << "\n"
    << "emit_plots = " << (c.run.emit_plots ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace bcml::io
