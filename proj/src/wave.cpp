#include "bcml/wave.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bcml::wave {

namespace {

int checked_ratio(double coarse, double fine, const char* what) {
  double q = coarse / fine;
  int r = static_cast<int>(std::lround(q));
  if (r < 1 || std::abs(q - r) > 1e-9 * q) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(fine) +
                                " does not divide " + std::to_string(coarse));
  }
  return r;
}

// One-sided normal difference stencil at a boundary vertex: one term per grid
// axis that leaves the domain there, scaled so corners are not over-counted.
struct TraceStencil {
  std::vector<int> inner;
  std::vector<double> inv_len;
  double norm = 1.0;
};

double edge_length_between(const geo::DiscreteManifold& m, int a, int b) {
  for (int e = m.adj_offset[a]; e < m.adj_offset[a + 1]; ++e) {
    if (m.adj_vertex[e] == b) return m.adj_length[e];
  }
  throw std::logic_error("edge_length_between: vertices not adjacent");
}

std::vector<TraceStencil> build_trace_stencils(const geo::DiscreteManifold& m,
                                               const ControlSpace& cs) {
  const int nx = m.grid.n[0];
  const int ny = m.grid.n[1];
  std::vector<TraceStencil> out(cs.boundary_ids.size());
  for (size_t b = 0; b < cs.boundary_ids.size(); ++b) {
    int v = cs.boundary_ids[b];
    int ci[3] = {v % nx, (v / nx) % ny, v / (nx * ny)};
    TraceStencil st;
    for (int d = 0; d < m.dim; ++d) {
      int lo = ci[d] == 0 ? 1 : (ci[d] == m.grid.n[d] - 1 ? -1 : 0);
      if (lo == 0) continue;
      int cj[3] = {ci[0], ci[1], ci[2]};
      cj[d] += lo;
      int w = m.index(cj[0], cj[1], cj[2]);
      st.inner.push_back(w);
      st.inv_len.push_back(1.0 / edge_length_between(m, v, w));
    }
    if (st.inner.empty()) throw std::logic_error("boundary vertex without exit direction");
    st.norm = 1.0 / std::sqrt(static_cast<double>(st.inner.size()));
    out[b] = std::move(st);
  }
  return out;
}

}  // namespace

VectorXd ControlSpace::basis_to_nodal(const VectorXd& coeff) const {
  if (coeff.size() != n_basis()) throw std::invalid_argument("basis_to_nodal: coeff size");
  VectorXd nodal = VectorXd::Zero(n_nodal());
  nodal.segment(2 * n_boundary(), n_basis()) = coeff;
  return nodal;
}

VectorXd ControlSpace::nodal_to_basis(const VectorXd& nodal) const {
  if (nodal.size() != n_nodal()) throw std::invalid_argument("nodal_to_basis: nodal size");
  return nodal.segment(2 * n_boundary(), n_basis());
}

VectorXd ControlSpace::nodal_weights() const {
  const int nb = n_boundary();
  VectorXd w(n_nodal());
  for (int k = 0; k <= n_steps; ++k) {
    double tw = (k == 0 || k == n_steps) ? 0.5 * dt : dt;
    for (int b = 0; b < nb; ++b) w[nodal_index(b, k)] = tw * boundary_weight[b];
  }
  return w;
}

VectorXd ControlSpace::basis_weights() const {
  return nodal_weights().segment(2 * n_boundary(), n_basis());
}

ControlSpace make_control_space(const geo::DiscreteManifold& m, double T, double dt) {
  if (T <= 0) throw std::invalid_argument("make_control_space: T must be positive");
  if (dt <= 0) throw std::invalid_argument("make_control_space: dt must be positive");
  ControlSpace cs;
  cs.T = T;
  cs.dt = dt;
  cs.n_steps = checked_ratio(T, dt, "control grid");
  if (cs.n_steps < 3) throw std::invalid_argument("make_control_space: fewer than 4 time nodes");
  cs.boundary_ids = m.boundary_ids;
  cs.boundary_weight.reserve(cs.boundary_ids.size());
  for (int v : cs.boundary_ids) cs.boundary_weight.push_back(m.boundary_measure[v]);
  return cs;
}

void validate_wave_params(const geo::DiscreteManifold& m, const ControlSpace& cs,
                          const WaveParams& p) {
  if (p.dt <= 0) throw std::invalid_argument("wave params: dt must be positive");
  checked_ratio(cs.dt, p.dt, "pde step");
  double lim = p.cfl_safety * m.min_edge_length();
  if (p.dt > lim + 1e-12 * lim) {
    throw std::invalid_argument("wave params: dt " + std::to_string(p.dt) +
                                " exceeds stability budget " + std::to_string(lim));
  }
}

WaveResult solve_wave(const geo::DiscreteManifold& m, const ControlSpace& cs,
                      const WaveParams& p, const VectorXd& nodal_control,
                      const WaveOptions& opt) {
  validate_wave_params(m, cs, p);
  if (nodal_control.size() != cs.n_nodal()) {
    throw std::invalid_argument("solve_wave: control size mismatch");
  }
  const int nv = m.n_vertices();
  const int nb = cs.n_boundary();
  const int ratio = checked_ratio(cs.dt, p.dt, "pde step");
  const int total = cs.n_steps * ratio;
  const double dt = p.dt;
  const double dt2 = dt * dt;

  auto stencils = build_trace_stencils(m, cs);

  // control value at PDE step n for boundary slot b (linear between nodes)
  auto bc = [&](int n, int b) {
    int k = n / ratio;
    int rem = n - k * ratio;
    double v0 = nodal_control[cs.nodal_index(b, k)];
    if (rem == 0) return v0;
    double v1 = nodal_control[cs.nodal_index(b, k + 1)];
    double th = static_cast<double>(rem) / ratio;
    return (1.0 - th) * v0 + th * v1;
  };

  WaveResult res;
  if (opt.record_trace) res.trace = VectorXd::Zero(cs.n_nodal());
  if (opt.record_snapshots) res.snapshots.reserve(cs.n_nodes());

  VectorXd u_prev = VectorXd::Zero(nv);
  VectorXd u_cur = VectorXd::Zero(nv);
  VectorXd u_next(nv);
  for (int b = 0; b < nb; ++b) u_prev[cs.boundary_ids[b]] = bc(0, b);

  auto record = [&](int node, const VectorXd& u) {
    if (opt.record_trace) {
      for (int b = 0; b < nb; ++b) {
        const TraceStencil& st = stencils[b];
        double g = u[cs.boundary_ids[b]];
        double acc = 0;
        for (size_t q = 0; q < st.inner.size(); ++q) acc += (g - u[st.inner[q]]) * st.inv_len[q];
        res.trace[cs.nodal_index(b, node)] = st.norm * acc;
      }
    }
    if (opt.record_snapshots) res.snapshots.push_back(u);
  };

  record(0, u_prev);

  auto laplacian_at = [&](const VectorXd& u, int i) {
    double acc = 0;
    for (int e = m.adj_offset[i]; e < m.adj_offset[i + 1]; ++e) {
      acc += m.adj_conductance[e] * (u[m.adj_vertex[e]] - u[i]);
    }
    return acc / m.vertex_weight[i];
  };

  // Taylor half-step off the zero initial velocity, then standard leapfrog.
  for (int i = 0; i < nv; ++i) {
    if (!m.is_boundary[i]) u_cur[i] = u_prev[i] + 0.5 * dt2 * laplacian_at(u_prev, i);
  }
  for (int b = 0; b < nb; ++b) u_cur[cs.boundary_ids[b]] = bc(1, b);
  if (ratio == 1) record(1, u_cur);

  for (int n = 2; n <= total; ++n) {
    for (int i = 0; i < nv; ++i) {
      if (m.is_boundary[i]) continue;
      u_next[i] = 2.0 * u_cur[i] - u_prev[i] + dt2 * laplacian_at(u_cur, i);
    }
    for (int b = 0; b < nb; ++b) u_next[cs.boundary_ids[b]] = bc(n, b);
    u_prev.swap(u_cur);
    u_cur.swap(u_next);
    if (n % ratio == 0) record(n / ratio, u_cur);
  }

  res.final_snapshot = u_cur;
  return res;
}

MatrixXd control_map(const geo::DiscreteManifold& m, const ControlSpace& cs,
                     const WaveParams& p) {
  MatrixXd w(m.n_vertices(), cs.n_basis());
  VectorXd nodal = VectorXd::Zero(cs.n_nodal());
  for (int j = 0; j < cs.n_basis(); ++j) {
    nodal[cs.n_boundary() * 2 + j] = 1.0;
    w.col(j) = solve_wave(m, cs, p, nodal).final_snapshot;
    nodal[cs.n_boundary() * 2 + j] = 0.0;
  }
  return w;
}

MatrixXd response_matrix(const geo::DiscreteManifold& m, const ControlSpace& cs,
                         const WaveParams& p) {
  MatrixXd r(cs.n_nodal(), cs.n_basis());
  VectorXd nodal = VectorXd::Zero(cs.n_nodal());
  WaveOptions opt;
  opt.record_trace = true;
  for (int j = 0; j < cs.n_basis(); ++j) {
    nodal[cs.n_boundary() * 2 + j] = 1.0;
    r.col(j) = solve_wave(m, cs, p, nodal, opt).trace;
    nodal[cs.n_boundary() * 2 + j] = 0.0;
  }
  return r;
}

MatrixXd gram_connecting_oracle(const geo::DiscreteManifold& m, const MatrixXd& snapshots) {
  if (snapshots.rows() != m.n_vertices()) {
    throw std::invalid_argument("gram_connecting_oracle: snapshot row count");
  }
  Eigen::Map<const VectorXd> w(m.vertex_weight.data(), m.n_vertices());
  MatrixXd weighted = w.asDiagonal() * snapshots;
  MatrixXd g = snapshots.transpose() * weighted;
  return 0.5 * (g + g.transpose());
}

double leapfrog_energy(const geo::DiscreteManifold& m, const VectorXd& u_prev,
                       const VectorXd& u_next, double dt) {
  const int nv = m.n_vertices();
  double kin = 0, pot = 0;
  for (int i = 0; i < nv; ++i) {
    double v = (u_next[i] - u_prev[i]) / dt;
    kin += m.vertex_weight[i] * v * v;
    for (int e = m.adj_offset[i]; e < m.adj_offset[i + 1]; ++e) {
      int j = m.adj_vertex[e];
      if (j < i) continue;
      pot += m.adj_conductance[e] * (u_prev[i] - u_prev[j]) * (u_next[i] - u_next[j]);
    }
  }
  return 0.5 * kin + 0.5 * pot;
}

}  // namespace bcml::wave
