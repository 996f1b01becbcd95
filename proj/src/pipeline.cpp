#include "bcml/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>

#include "bcml/blob.hpp"
#include "bcml/solenoidal.hpp"
#include "json.hpp"

namespace bcml::pipe {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Manifest floats round-trip exactly; the rebuilt control spaces must match
// the forward ones bit for bit.
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double now_s() {
  using clk = std::chrono::steady_clock;
  return std::chrono::duration<double>(clk::now().time_since_epoch()).count();
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    if constexpr (std::is_same_v<T, double>)
      out << fmt17(v[i]);
    else
      out << v[i];
  }
  return out.str();
}

std::vector<int> parse_ints(const std::string& s) {
  std::istringstream in(s);
  std::vector<int> v;
  int x;
  while (in >> x) v.push_back(x);
  return v;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  return v;
}

double field_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("boundary manifest: missing field " + key);
  return std::stod(it->second);
}

int field_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("boundary manifest: missing field " + key);
  return std::stoi(it->second);
}

wave::ControlSpace space_from(const BoundaryManifest& bm, int n_steps) {
  wave::ControlSpace cs;
  cs.boundary_ids = bm.boundary_ids;
  cs.boundary_weight = bm.boundary_weight;
  cs.T = n_steps * bm.dt;
  cs.dt = bm.dt;
  cs.n_steps = n_steps;
  return cs;
}

double vec_max(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace

wave::ControlSpace BoundaryManifest::control_space_t() const { return space_from(*this, n_steps_t); }
wave::ControlSpace BoundaryManifest::control_space_2t() const {
  return space_from(*this, n_steps_2t);
}

std::vector<double> BoundaryManifest::s_grid() const { return geo::uniform_s_grid(T, s_count); }

double BoundaryManifest::s_step() const { return T / (s_count - 1); }

std::string render_boundary_manifest(const BoundaryManifest& bm) {
  std::ostringstream out;
  out << "# boundary data manifest\n";
  out << "dim = " << bm.dim << '\n';
  out << "T = " << fmt17(bm.T) << '\n';
  out << "dt = " << fmt17(bm.dt) << '\n';
  out << "n_steps_t = " << bm.n_steps_t << '\n';
  out << "n_steps_2t = " << bm.n_steps_2t << '\n';
  out << "s_count = " << bm.s_count << '\n';
  out << "boundary_ids = " << join(bm.boundary_ids) << '\n';
  out << "boundary_weight = " << join(bm.boundary_weight) << '\n';
  for (const auto& p : bm.patches) out << "patch = " << p.name << " : " << join(p.slots) << '\n';
  return out.str();
}

BoundaryManifest parse_boundary_manifest(const std::string& text) {
  BoundaryManifest bm;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("boundary manifest: bad line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "patch") {
      const auto colon = val.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("boundary manifest: bad patch line: " + line);
      bm.patches.push_back({trim(val.substr(0, colon)), parse_ints(val.substr(colon + 1))});
    } else {
      kv[key] = val;
    }
  }
  bm.dim = field_int(kv, "dim");
  bm.T = field_double(kv, "T");
  bm.dt = field_double(kv, "dt");
  bm.n_steps_t = field_int(kv, "n_steps_t");
  bm.n_steps_2t = field_int(kv, "n_steps_2t");
  bm.s_count = field_int(kv, "s_count");
  auto ids = kv.find("boundary_ids");
  auto ws = kv.find("boundary_weight");
  if (ids == kv.end() || ws == kv.end())
    throw std::runtime_error("boundary manifest: missing boundary arrays");
  bm.boundary_ids = parse_ints(ids->second);
  bm.boundary_weight = parse_doubles(ws->second);
  if (bm.boundary_ids.size() != bm.boundary_weight.size())
    throw std::runtime_error("boundary manifest: boundary arrays disagree in length");
  if (bm.patches.empty()) throw std::runtime_error("boundary manifest: no patches");
  return bm;
}

TimeGrid resolve_time_grid(const io::ExperimentConfig& cfg, const geo::DiscreteManifold& m,
                           double diameter) {
  TimeGrid tg;
  const double t_raw = cfg.wave.T > 0 ? cfg.wave.T : cfg.wave.T_factor * diameter;
  if (!(t_raw > 0))
    throw io::ConfigError("wave.T / wave.T_factor: one must be positive");
  const double pde_raw =
      cfg.wave.dt > 0 ? cfg.wave.dt : cfg.wave.cfl_safety * m.min_edge_length();
  const double ctrl_raw = cfg.wave.control_dt > 0 ? cfg.wave.control_dt : pde_raw;
  // The PDE step must divide the control step, and T must land on a control
  // node; snap downward/upward respectively so neither bound is violated.
  tg.control_dt = ctrl_raw;
  tg.pde_dt = ctrl_raw / std::ceil(ctrl_raw / pde_raw - 1e-12);
  tg.T = tg.control_dt * std::ceil(t_raw / tg.control_dt - 1e-12);
  return tg;
}

ForwardResult run_forward(const io::ExperimentConfig& cfg, const ArtifactPaths& out,
                          io::ReportBundle& bundle) {
  fs::create_directories(out.dir);
  ForwardResult fr;
  fr.manifold = geo::build_manifold(geo::ManifoldSpec::from_config(cfg.manifold));
  fr.catalog = geo::patch_catalog(fr.manifold);
  fr.diameter = geo::diameter(fr.manifold);

  const TimeGrid tg = resolve_time_grid(cfg, fr.manifold, fr.diameter);
  fr.T = tg.T;
  if (!(fr.T > fr.diameter))
    throw io::ConfigError("wave.T: the time horizon must exceed the manifold diameter (T = " +
                          io::fmt(fr.T) + ", diam = " + io::fmt(fr.diameter) + ")");

  fr.params.dt = tg.pde_dt;
  fr.params.cfl_safety = cfg.wave.cfl_safety;
  fr.cs_t = wave::make_control_space(fr.manifold, fr.T, tg.control_dt);
  fr.cs_2t = wave::make_control_space(fr.manifold, 2 * fr.T, tg.control_dt);
  wave::validate_wave_params(fr.manifold, fr.cs_2t, fr.params);

  const double t0 = now_s();
  fr.snapshots = wave::control_map(fr.manifold, fr.cs_t, fr.params);
  fr.gram = wave::gram_connecting_oracle(fr.manifold, fr.snapshots);
  const double t1 = now_s();
  fr.r2t = wave::response_matrix(fr.manifold, fr.cs_2t, fr.params);
  const double t2 = now_s();
  std::printf("[forward] snapshots+gram %.1fs, response %.1fs (n_basis_T=%d, n_basis_2T=%d)\n",
              t1 - t0, t2 - t1, fr.cs_t.n_basis(), fr.cs_2t.n_basis());
  std::fflush(stdout);

  // Boundary manifest: the inverse side's entire world.
  fr.manifest.dim = fr.manifold.dim;
  fr.manifest.T = fr.T;
  fr.manifest.dt = tg.control_dt;
  fr.manifest.n_steps_t = fr.cs_t.n_steps;
  fr.manifest.n_steps_2t = fr.cs_2t.n_steps;
  fr.manifest.s_count = cfg.bcm.s_count;
  fr.manifest.boundary_ids = fr.cs_t.boundary_ids;
  fr.manifest.boundary_weight = fr.cs_t.boundary_weight;
  std::map<int, int> slot_of;
  for (std::size_t s = 0; s < fr.cs_t.boundary_ids.size(); ++s)
    slot_of[fr.cs_t.boundary_ids[s]] = static_cast<int>(s);
  for (const auto& p : fr.catalog) {
    BoundaryManifest::Patch mp;
    mp.name = p.name;
    for (int v : p.vertex_ids) mp.slots.push_back(slot_of.at(v));
    fr.manifest.patches.push_back(std::move(mp));
  }

  io::save_matrix(out.response_blob(), fr.r2t);
  io::save_matrix(out.gram_blob(), fr.gram);
  io::write_text_file(out.boundary_manifest(), render_boundary_manifest(fr.manifest));

  for (const auto& p : fr.catalog) {
    const auto tau = geo::eikonal(fr.manifold, p);
    io::write_eikonal_csv(out.dir + "/eikonal_" + p.name + ".csv", fr.manifold, tau);
    if (cfg.run.emit_plots && fr.manifold.dim == 1)
      io::write_pgm(out.dir + "/eikonal_" + p.name + ".pgm",
                    io::plot_curve(tau.value, 320, 200, false));
  }

  bundle.note("forward", "manifold " + cfg.manifold.kind + ", " +
                             std::to_string(fr.manifold.n_vertices()) + " vertices, diameter " +
                             io::fmt(fr.diameter) + ", T " + io::fmt(fr.T) + ", control dt " +
                             io::fmt(tg.control_dt) + ", pde dt " + io::fmt(tg.pde_dt) +
                             ", basis controls " + std::to_string(fr.cs_t.n_basis()));
  return fr;
}

InverseKnobs InverseKnobs::from_config(const io::ExperimentConfig& cfg) {
  return {cfg.bcm, cfg.algebra, cfg.recovery, cfg.run.emit_plots};
}

ReconstructResult run_reconstruct(const ArtifactPaths& in, const InverseKnobs& knobs,
                                  io::ReportBundle& bundle) {
  ReconstructResult rr;
  rr.manifest = parse_boundary_manifest(io::read_text_file(in.boundary_manifest()));
  rr.manifold_dim = rr.manifest.dim;
  const MatrixXd r2t = io::load_matrix(in.response_blob());
  const wave::ControlSpace cs_t = rr.manifest.control_space_t();
  const wave::ControlSpace cs_2t = rr.manifest.control_space_2t();

  const double t0 = now_s();
  rr.connecting = bcm::connecting_from_response(cs_t, cs_2t, r2t);
  io::save_matrix(in.connecting_blob(), rr.connecting.mat);
  rr.model = bcm::sqrt_psd(rr.connecting, knobs.bcm.tol_psd);
  const double t1 = now_s();
  bundle.note("reconstruct",
              "connecting operator: " + std::to_string(rr.connecting.mat.rows()) +
                  " square, asymmetry defect " + io::fmt(rr.connecting.asymmetry_defect) +
                  ", model rank " + std::to_string(rr.model.rank()) + ", clipped mass " +
                  io::fmt(rr.model.clipped_mass));
  if (!rr.model.warning.empty()) bundle.note("reconstruct", "WARNING: " + rr.model.warning);

  const std::vector<double> s_grid = rr.manifest.s_grid();
  std::vector<std::string> names;
  for (const auto& p : rr.manifest.patches) {
    rr.families.push_back(bcm::model_projection_family(rr.model, cs_t, p.name, p.slots, s_grid,
                                                       knobs.bcm.tol_rank));
    rr.eikonals.push_back(alg::eikonal_from_family(rr.families.back()));
    names.push_back(p.name);
  }
  const double t2 = now_s();

  const int np = static_cast<int>(rr.eikonals.size());
  rr.commutation_defects = MatrixXd::Zero(np, np);
  double worst = 0.0;
  for (int i = 0; i < np; ++i)
    for (int j = i + 1; j < np; ++j) {
      const double d = alg::commutation_defect(rr.eikonals[i], rr.eikonals[j]);
      rr.commutation_defects(i, j) = rr.commutation_defects(j, i) = d;
      worst = std::max(worst, d);
    }
  bundle.note("reconstruct", "worst pairwise commutation defect " + io::fmt(worst) +
                                 " (ceiling " + io::fmt(knobs.algebra.defect_ceiling) + ")");
  if (worst > knobs.algebra.defect_ceiling)
    throw std::runtime_error(
        "reconstruct: pairwise commutation defect " + io::fmt(worst) +
        " exceeds algebra.defect_ceiling " + io::fmt(knobs.algebra.defect_ceiling) +
        "; the model eikonals are too far from a commuting family to diagonalize jointly");

  rr.characters = alg::joint_diagonalize(rr.eikonals, knobs.algebra.max_sweeps,
                                         knobs.algebra.tol_offdiag);
  const double t3 = now_s();
  bundle.note("reconstruct",
              "joint diagonalization: off-diagonal energy " + io::fmt(rr.characters.off_initial) +
                  " -> " + io::fmt(rr.characters.off_final) + " in " +
                  std::to_string(rr.characters.sweeps) + " sweeps" +
                  (rr.characters.converged ? "" : " (not converged)"));

  const double step = rr.manifest.s_step();
  rr.cluster_eps = knobs.algebra.cluster_eps >= 0 ? knobs.algebra.cluster_eps : 2.0 * step;
  rr.boundary_eps = knobs.algebra.boundary_eps >= 0 ? knobs.algebra.boundary_eps : step;
  rr.cloud = alg::spectrum_cloud(rr.characters.values, names, rr.cluster_eps, rr.boundary_eps);
  bundle.note("reconstruct", "spectrum cloud: " + std::to_string(rr.cloud.n_points()) +
                                 " points from " + std::to_string(rr.characters.values.rows()) +
                                 " characters (cluster_eps " + io::fmt(rr.cluster_eps) +
                                 ", boundary_eps " + io::fmt(rr.boundary_eps) + ")");

  rr.field = rec::recover_metric_field(rr.cloud, rr.manifold_dim, knobs.recovery.k_neighbors,
                                       knobs.recovery.cond_cap);
  const int knn = knobs.recovery.knn_edges > 0 ? knobs.recovery.knn_edges
                                               : 2 * rr.manifold_dim + 2;
  rr.copy = rec::assemble_copy(rr.cloud, rr.field, knn, knobs.recovery.radius_factor,
                               rr.boundary_eps);
  const double t4 = now_s();
  bundle.note("reconstruct",
              "metric field: " + std::to_string(rr.field.point_ids.size()) + " charted, " +
                  std::to_string(rr.field.unchartable.size()) + " unchartable, " +
                  std::to_string(rr.field.excluded.size()) + " excluded; copy has " +
                  std::to_string(rr.copy.n_points()) + " points, " +
                  std::to_string(rr.copy.edges.size()) + " edges");
  std::printf(
      "[reconstruct] connecting+sqrt %.1fs, families %.1fs, jointdiag %.1fs, recovery %.1fs\n",
      t1 - t0, t2 - t1, t3 - t2, t4 - t3);
  std::fflush(stdout);

  io::write_cloud_csv(in.cloud_csv(), rr.cloud);
  io::write_copy_csv(in.copy_csv(), rr.cloud, rr.copy, rr.field);
  io::save_matrix(in.copy_dist_blob(), rr.copy.dist);
  return rr;
}

Evaluation evaluate_copy(const geo::DiscreteManifold& m,
                         const std::vector<geo::BoundaryPatch>& catalog,
                         const ReconstructResult& rr,
                         const std::function<double(double, double, double)>& true_factor) {
  Evaluation ev;
  const int nv = m.n_vertices();
  const int np = static_cast<int>(catalog.size());
  const int nc = rr.copy.n_points();
  if (rr.copy.tau.cols() != np)
    throw std::invalid_argument("evaluate_copy: catalog does not match copy coordinates");

  MatrixXd truth(nv, np);
  for (int j = 0; j < np; ++j) {
    const auto tau = geo::eikonal(m, catalog[j]);
    for (int v = 0; v < nv; ++v) truth(v, j) = tau.value[v];
  }

  ev.matched_vertex.assign(nc, -1);
  for (int r = 0; r < nc; ++r) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int v = 0; v < nv; ++v) {
      const double gap = (truth.row(v) - rr.copy.tau.row(r)).cwiseAbs().maxCoeff();
      if (gap < best) {
        best = gap;
        arg = v;
      }
    }
    ev.matched_vertex[r] = arg;
    ev.match_sup = std::max(ev.match_sup, best);
  }

  // True pairwise distances between matched vertices: one Dijkstra per
  // distinct matched vertex.
  std::map<int, std::vector<double>> dist_from;
  for (int v : ev.matched_vertex)
    if (!dist_from.count(v))
      dist_from[v] = geo::eikonal(m, {"probe", {v}}).value;

  const double h = m.min_edge_length();
  std::vector<double> rels;
  for (int i = 0; i < nc; ++i)
    for (int j = i + 1; j < nc; ++j) {
      const double d_true = dist_from.at(ev.matched_vertex[i])[ev.matched_vertex[j]];
      const double d_copy = rr.copy.dist(i, j);
      const double abs_err = std::abs(d_copy - d_true);
      ++ev.n_pairs;
      ev.dist_sup_abs = std::max(ev.dist_sup_abs, abs_err);
      // Relative error reads on pairs at least one grid spacing apart;
      // below that the graph metric itself has no resolution.
      if (d_true >= h - 1e-12) {
        const double rel = abs_err / d_true;
        ev.dist_sup_rel = std::max(ev.dist_sup_rel, rel);
        rels.push_back(rel);
      }
    }
  ev.rel_hist = io::build_histogram(rels, 25, 0.0, 0.25);

  // Chart-metric diagonals: eikonal coordinates have unit-norm gradients, so
  // every diagonal of the inverse metric should be 1 regardless of which
  // patches the chart picked.
  std::vector<int> slot(rr.cloud.n_points(), -1);
  for (std::size_t i = 0; i < rr.field.point_ids.size(); ++i)
    slot[rr.field.point_ids[i]] = static_cast<int>(i);
  for (int r = 0; r < nc; ++r) {
    const int cid = rr.copy.cloud_ids[r];
    if (rr.copy.boundary[r] || slot[cid] < 0) continue;
    ++ev.n_interior;
    const auto& g = rr.field.metric[slot[cid]].g;
    double dev = 0.0;
    for (int a = 0; a < g.rows(); ++a) dev = std::max(dev, std::abs(g(a, a) - 1.0));
    ev.diag_worst = std::max(ev.diag_worst, dev);
    if (dev <= 0.1) ++ev.n_diag_ok;
  }

  // Conformal factor per interior point: copy edge length over coordinate
  // distance of the matched vertices, median over incident edges.
  if (true_factor) {
    std::vector<std::vector<double>> ratios(nc);
    for (const auto& e : rr.copy.edges) {
      const auto& a = m.vertices[ev.matched_vertex[e.i]];
      const auto& b = m.vertices[ev.matched_vertex[e.j]];
      const double coord = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
      if (coord <= 0) continue;
      ratios[e.i].push_back(e.length / coord);
      ratios[e.j].push_back(e.length / coord);
    }
    for (int r = 0; r < nc; ++r) {
      if (rr.copy.boundary[r] || ratios[r].empty()) continue;
      auto& v = ratios[r];
      std::sort(v.begin(), v.end());
      const double est = v[v.size() / 2];
      const auto& pos = m.vertices[ev.matched_vertex[r]];
      const double truth_f = true_factor(pos[0], pos[1], pos[2]);
      ++ev.n_factor;
      if (std::abs(est / truth_f - 1.0) <= 0.15) ++ev.n_factor_ok;
    }
  }
  return ev;
}

namespace {

// Exact-cutoff norm identity on the ground-truth side: the operator built
// from the sub-level family must have norm max tau within one grid step.
double cutoff_norm_identity_gap(const geo::DiscreteManifold& m,
                                const std::vector<geo::BoundaryPatch>& catalog,
                                const std::vector<double>& s_grid) {
  double worst = 0.0;
  for (const auto& p : catalog) {
    const auto tau = geo::eikonal(m, p);
    const auto cf = geo::cutoff_family(m, tau, s_grid);
    const auto fam = fam::from_cutoffs(cf, p.name);
    const auto op = alg::eikonal_from_family(fam);
    const double tau_max = *std::max_element(tau.value.begin(), tau.value.end());
    worst = std::max(worst, std::abs(la::spectral_norm(op.mat) - tau_max));
  }
  return worst;
}

// Model projections pushed back to wave states against exact cutoffs, for a
// fixed smooth control on one patch. Returns the relative error at each
// requested s.
std::vector<double> projection_pushforward_errors(const ForwardResult& fwd,
                                                  const ReconstructResult& rr,
                                                  const std::string& patch,
                                                  const std::vector<double>& s_values) {
  const wave::ControlSpace& cs = fwd.cs_t;
  const VectorXd sqw = cs.basis_weights().cwiseSqrt();

  int pidx = -1;
  for (std::size_t i = 0; i < rr.manifest.patches.size(); ++i)
    if (rr.manifest.patches[i].name == patch) pidx = static_cast<int>(i);
  if (pidx < 0) throw std::invalid_argument("pushforward: unknown patch " + patch);

  // Smooth bump in time on every boundary slot of the patch, in hat basis
  // coordinates.
  VectorXd c_hat = VectorXd::Zero(cs.n_basis());
  const double mid = 0.5 * (cs.n_steps - 1 + 2), width = cs.n_steps / 6.0;
  for (int slot : rr.manifest.patches[pidx].slots)
    for (int k = 2; k <= cs.n_steps - 1; ++k)
      c_hat(cs.basis_index(slot, k)) = std::exp(-std::pow((k - mid) / width, 2));

  const VectorXd c_nat = c_hat.cwiseQuotient(sqw);
  const VectorXd w = fwd.snapshots * c_nat;
  const VectorXd m_coord = rr.model.model_images() * c_hat;

  // Wave states of the model basis directions: columns of
  // snapshots * W^{-1/2} * V * diag(1/singular).
  MatrixXd lift = rr.model.basis * rr.model.singular.cwiseInverse().asDiagonal();
  for (int r = 0; r < lift.rows(); ++r) lift.row(r) /= sqw(r);
  const MatrixXd push = fwd.snapshots * lift;

  const auto tau = geo::eikonal(fwd.manifold, fwd.catalog[pidx]);
  VectorXd vw = Eigen::Map<const VectorXd>(fwd.manifold.vertex_weight.data(),
                                           fwd.manifold.n_vertices());
  const auto wnorm = [&](const VectorXd& u) { return std::sqrt(u.cwiseAbs2().dot(vw)); };

  const auto& fam = rr.families[pidx];
  std::vector<double> errs;
  for (double s : s_values) {
    int k_near = 0;
    for (std::size_t k = 0; k < fam.s_grid.size(); ++k)
      if (std::abs(fam.s_grid[k] - s) < std::abs(fam.s_grid[k_near] - s))
        k_near = static_cast<int>(k);
    const MatrixXd proj = fam.projection(k_near);
    const VectorXd pushed = push * (proj * m_coord);
    VectorXd cut = w;
    for (int v = 0; v < cut.size(); ++v)
      if (!(tau.value[v] < fam.s_grid[k_near])) cut(v) = 0.0;
    errs.push_back(wnorm(pushed - cut) / wnorm(w));
  }
  return errs;
}

std::function<double(double, double, double)> factor_from_config(const io::ManifoldConfig& mc) {
  if (mc.kind == "interval") {
    if (mc.speed == "one_over_one_plus_x") return [](double x, double, double) { return 1.0 + x; };
    return [](double, double, double) { return 1.0; };
  }
  if (mc.kind == "rect2d" && mc.conformal.rfind("sinbump:", 0) == 0) {
    const double amp = std::stod(mc.conformal.substr(8));
    return [amp](double x, double y, double) {
      return 1.0 + amp * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
  }
  return [](double, double, double) { return 1.0; };
}

void write_comparison(const ArtifactPaths& out, const io::ExperimentConfig& cfg,
                      const ReconstructResult& rr, const Evaluation& ev, bool emit_plots) {
  json j;
  j["manifold"] = cfg.manifold.kind;
  j["copy_points"] = rr.copy.n_points();
  j["cloud_points"] = rr.cloud.n_points();
  j["match_sup_gap"] = ev.match_sup;
  j["pairs"] = ev.n_pairs;
  j["dist_sup_abs"] = ev.dist_sup_abs;
  j["dist_sup_rel"] = ev.dist_sup_rel;
  j["interior_anchors"] = ev.n_interior;
  j["metric_diag_within_0p1"] = ev.n_diag_ok;
  j["metric_diag_worst"] = ev.diag_worst;
  j["factor_anchors"] = ev.n_factor;
  j["factor_within_15pct"] = ev.n_factor_ok;
  json hist;
  hist["lo"] = ev.rel_hist.lo;
  hist["hi"] = ev.rel_hist.hi;
  hist["counts"] = ev.rel_hist.counts;
  j["rel_error_histogram"] = hist;
  io::write_text_file(out.comparison_json(), j.dump(2) + "\n");

  io::write_histogram_csv(out.dir + "/dist_err_hist.csv", ev.rel_hist);
  if (emit_plots) {
    io::write_pgm(out.dir + "/dist_err_hist.pgm", io::plot_bars(ev.rel_hist, 320, 200));
    if (rr.cloud.n_patches() >= 2 && rr.cloud.n_points() > 0) {
      std::vector<double> xs(rr.cloud.n_points()), ys(rr.cloud.n_points());
      for (int i = 0; i < rr.cloud.n_points(); ++i) {
        xs[i] = rr.cloud.tau(i, 0);
        ys[i] = rr.cloud.tau(i, 1);
      }
      io::write_pgm(out.dir + "/cloud_scatter.pgm", io::plot_scatter(xs, ys, 320, 320));
    }
  }
}

}  // namespace

ChainResult run_chain(const io::ExperimentConfig& cfg, const ArtifactPaths& out,
                      io::ReportBundle& bundle) {
  ChainResult cr;
  bundle.config_echo = io::render_config(cfg);
  io::ContentHasher hasher;
  hasher.feed(cfg.source_text.empty() ? bundle.config_echo : cfg.source_text);
  bundle.input_hash = hasher.hex();

  cr.fwd = run_forward(cfg, out, bundle);
  cr.rec = run_reconstruct(out, InverseKnobs::from_config(cfg), bundle);
  cr.eval = evaluate_copy(cr.fwd.manifold, cr.fwd.catalog, cr.rec,
                          factor_from_config(cfg.manifold));

  // Connecting operator against the forward Gram oracle, in the same hat
  // coordinates; the central data-side identity.
  const auto c_gram = bcm::connecting_from_gram(cr.fwd.cs_t, cr.fwd.gram);
  const double gap = la::spectral_norm(cr.rec.connecting.mat - c_gram.mat) /
                     la::spectral_norm(c_gram.mat);
  bundle.add_check("connecting_oracle_gap",
                   "response-built connecting operator vs forward Gram oracle, relative "
                   "spectral norm",
                   gap, "<", 5e-2);

  bundle.add_check("cutoff_norm_identity",
                   "worst |norm(cutoff eikonal) - max tau| over the patch catalog",
                   cutoff_norm_identity_gap(cr.fwd.manifold, cr.fwd.catalog,
                                            cr.rec.manifest.s_grid()),
                   "<=", cr.rec.manifest.s_step() + 1e-12);

  if (cfg.manifold.kind == "interval") {
    const std::vector<double> s_values = {0.3, 0.5, 0.7};
    const auto errs = projection_pushforward_errors(cr.fwd, cr.rec, "left", s_values);
    for (std::size_t i = 0; i < s_values.size(); ++i)
      bundle.add_check("projection_pushforward_s" + io::fmt(s_values[i]),
                       "model projection pushed to wave states vs exact cutoff, relative",
                       errs[i], "<", 0.1);
    bundle.add_check("copy_distance_sup",
                     "sup pairwise distance error vs 3 grid spacings",
                     cr.eval.dist_sup_abs, "<=", 3.0 * cr.fwd.manifold.min_edge_length());
  }
  if (cfg.manifold.kind == "rect2d") {
    if (cfg.manifold.conformal == "flat") {
      bundle.add_check("copy_distance_rel_sup",
                       "sup relative pairwise distance error (pairs >= one spacing)",
                       cr.eval.dist_sup_rel, "<=", 0.10);
      const double frac =
          cr.eval.n_interior > 0 ? double(cr.eval.n_diag_ok) / cr.eval.n_interior : 0.0;
      bundle.add_check("metric_diag_fraction",
                       "fraction of interior anchors with every inverse-metric diagonal "
                       "within 0.1 of 1",
                       frac, ">=", 0.9);
    } else {
      const double frac =
          cr.eval.n_factor > 0 ? double(cr.eval.n_factor_ok) / cr.eval.n_factor : 0.0;
      bundle.add_check("conformal_factor_fraction",
                       "fraction of interior anchors with recovered conformal factor "
                       "within 15%",
                       frac, ">=", 0.8);
    }
  }
  bundle.note("evaluate", "matching sup gap " + io::fmt(cr.eval.match_sup) + ", " +
                              std::to_string(cr.eval.n_pairs) + " distance pairs, sup abs " +
                              io::fmt(cr.eval.dist_sup_abs) + ", sup rel " +
                              io::fmt(cr.eval.dist_sup_rel));

  write_comparison(out, cfg, cr.rec, cr.eval, cfg.run.emit_plots);
  io::write_text_file(out.manifest(), io::render_manifest(bundle));
  io::write_text_file(out.report(), io::render_report(bundle));
  return cr;
}

std::vector<SolenoidalSizeStats> run_solenoidal(const io::ExperimentConfig& cfg,
                                                const ArtifactPaths& out,
                                                io::ReportBundle& bundle) {
  fs::create_directories(out.dir);
  if (bundle.input_hash.empty()) {
    bundle.config_echo = io::render_config(cfg);
    io::ContentHasher hasher;
    hasher.feed(cfg.source_text.empty() ? bundle.config_echo : cfg.source_text);
    bundle.input_hash = hasher.hex();
  }

  std::vector<SolenoidalSizeStats> stats;
  for (int n : cfg.solenoidal.sizes) {
    SolenoidalSizeStats st;
    st.n = n;
    const std::string tag = std::to_string(n);
    double t0 = now_s();
    const auto cc = sol::build_curl_complex(n, n, n, cfg.bcm.tol_rank);
    st.dim_curl = cc.curl_rank();
    const double t_build = now_s() - t0;

    const auto catalog = geo::patch_catalog(cc.box);
    const geo::BoundaryPatch* pa = nullptr;
    const geo::BoundaryPatch* pb = nullptr;
    for (const auto& p : catalog) {
      if (p.name == "x_lo") pa = &p;
      if (p.name == "y_lo") pb = &p;
    }
    const double step =
        cfg.solenoidal.s_step > 0 ? cfg.solenoidal.s_step : cc.box.grid.h[0] / 4.0;

    t0 = now_s();
    const auto tau_a = geo::eikonal(cc.box, *pa);
    const auto fam_a = sol::solenoidal_family(cc, *pa, sol::saturating_s_grid(tau_a, step),
                                              cfg.bcm.tol_rank);
    const double t_fam = now_s() - t0;
    st.tau_max = vec_max(tau_a.value);
    st.eps_norm = fam_a.jump_weight.size() ? fam_a.jump_weight.maxCoeff() : 0.0;

    t0 = now_s();
    const VectorXd tau_face = sol::field_on_faces(cc, tau_a.value);
    const auto gap_a = sol::compactness_probe(cc, fam_a, tau_face);
    st.eik_mult_tail = gap_a.tail_ratio(0.5);
    const double t_gap = now_s() - t0;
    io::write_singular_csv(out.dir + "/sv_eik_mult_" + tag + ".csv", gap_a);

    t0 = now_s();
    const VectorXd f = sol::sample_on_faces(cc, [](double x, double, double) { return x; });
    const auto gap_f = sol::compactness_probe(cc, f, "multiplier_minus_projected(x1)");
    st.mult_proj_tail = gap_f.tail_ratio(0.5);
    const double t_eff = now_s() - t0;
    io::write_singular_csv(out.dir + "/sv_mult_proj_" + tag + ".csv", gap_f);

    t0 = now_s();
    const auto [fmax, est] = sol::calkin_isometry_probe(cc, f, cfg.solenoidal.burn_in);
    st.calkin_sup = fmax;
    st.calkin_est = est;
    const double t_calkin = now_s() - t0;

    t0 = now_s();
    const auto eik_a = sol::solenoidal_eikonal(fam_a);
    const auto tau_b = geo::eikonal(cc.box, *pb);
    const auto eik_b = sol::solenoidal_eikonal(
        sol::solenoidalFamilyUnused(), cc, *pb, step, cfg.bcm.tol_rank);
    const auto comm = sol::noncommutativity_probe(eik_a, eik_b);
    st.comm_rel_norm = comm.rel_norm;
    st.comm_tail = comm.tail_ratio(0.5);
    const double t_comm = now_s() - t0;
    io::write_singular_csv(out.dir + "/sv_commutator_" + tag + ".csv", comm);

    if (cfg.run.emit_plots) {
      auto curve = [&](const sol::CompactnessReport& rep, const std::string& name) {
        std::vector<double> v(rep.singular.data(), rep.singular.data() + rep.dim());
        io::write_pgm(out.dir + "/sv_" + name + "_" + tag + ".pgm",
                      io::plot_curve(v, 320, 200, true));
      };
      curve(gap_a, "eik_mult");
      curve(gap_f, "mult_proj");
      curve(comm, "commutator");
    }

    std::printf(
        "[solenoidal] n=%d build %.1fs, family %.1fs, eik-mult %.1fs, mult-proj %.1fs, "
        "calkin %.1fs, commutator %.1fs\n",
        n, t_build, t_fam, t_gap, t_eff, t_calkin, t_comm);
    std::fflush(stdout);
    stats.push_back(st);
  }

  // Summary table and refinement-series verdicts.
  std::vector<std::vector<std::string>> rows;
  for (const auto& st : stats)
    rows.push_back({std::to_string(st.n), std::to_string(st.dim_curl), io::fmt(st.eps_norm),
                    io::fmt(st.tau_max), io::fmt(st.eik_mult_tail), io::fmt(st.mult_proj_tail),
                    io::fmt(st.comm_rel_norm), io::fmt(st.comm_tail), io::fmt(st.calkin_est)});
  const std::string table = io::format_table(
      {"n", "dim_curl", "eps_norm", "tau_max", "eik_mult_tail", "mult_proj_tail",
       "comm_rel_norm", "comm_tail", "calkin_est"},
      rows);
  bundle.note("solenoidal", "per-size probe summary:\n" + table);

  for (const auto& st : stats)
    if (st.n == 12)
      bundle.add_check("eps_norm_identity_12",
                       "relative gap between the eikonal family norm and max tau at n=12",
                       std::abs(st.eps_norm - st.tau_max) / st.tau_max, "<", 0.05);

  auto series_decreasing = [&](const std::string& id, const std::string& what,
                               double SolenoidalSizeStats::* member) {
    double worst = 0.0;
    for (std::size_t i = 1; i < stats.size(); ++i)
      worst = std::max(worst, stats[i].*member / std::max(stats[i - 1].*member, 1e-300));
    bundle.add_check(id, what + " (worst consecutive ratio across sizes)", worst, "<", 1.0);
  };
  if (stats.size() >= 2) {
    series_decreasing("eik_mult_tail_decreasing",
                      "eikonal-vs-multiplier half-dim singular tail strictly decreasing",
                      &SolenoidalSizeStats::eik_mult_tail);
    series_decreasing("mult_proj_tail_decreasing",
                      "multiplier-vs-projected half-dim singular tail strictly decreasing",
                      &SolenoidalSizeStats::mult_proj_tail);
    series_decreasing("commutator_tail_decreasing",
                      "commutator half-dim singular tail strictly decreasing",
                      &SolenoidalSizeStats::comm_tail);
    double min_rel = std::numeric_limits<double>::infinity(), over_sup = -1.0, min_gain = 0.0;
    min_gain = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < stats.size(); ++i) {
      min_rel = std::min(min_rel, stats[i].comm_rel_norm);
      over_sup = std::max(over_sup, stats[i].calkin_est - stats[i].calkin_sup);
      if (i) min_gain = std::min(min_gain, stats[i].calkin_est - stats[i - 1].calkin_est);
    }
    bundle.add_check("commutator_rel_norm_min",
                     "smallest commutator norm relative to the factor norms", min_rel, ">",
                     0.01);
    bundle.add_check("calkin_below_sup",
                     "largest excess of the essential-norm estimate over max |f|", over_sup,
                     "<=", 1e-10);
    bundle.add_check("calkin_increasing",
                     "smallest consecutive gain of the essential-norm estimate", min_gain, ">",
                     0.0);
  }

  io::write_text_file(out.dir + "/solenoidal_summary.txt", table);
  return stats;
}

}  // namespace bcml::pipe
