#include "bcml/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "bcml/config.hpp"

namespace bcml::geo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EdgeDraft {
  int a, b;
  double length, conductance;
};

void check_sizes(int nx, int ny, int nz, int dim) {
  if (nx < 3 || (dim >= 2 && ny < 3) || (dim >= 3 && nz < 3))
    throw std::invalid_argument("build_manifold: grid sizes must be >= 3 per axis");
}

}  // namespace

ManifoldSpec ManifoldSpec::interval(int n, double length, std::function<double(double)> speed) {
  ManifoldSpec s;
  s.kind = Kind::interval;
  s.nx = n;
  s.length = length;
  s.speed = std::move(speed);
  return s;
}

ManifoldSpec ManifoldSpec::rect2d(int nx, int ny, std::function<double(double, double)> conformal) {
  ManifoldSpec s;
  s.kind = Kind::rect2d;
  s.nx = nx;
  s.ny = ny;
  s.conformal = std::move(conformal);
  return s;
}

ManifoldSpec ManifoldSpec::box3d(int nx, int ny, int nz) {
  ManifoldSpec s;
  s.kind = Kind::box3d;
  s.nx = nx;
  s.ny = ny;
  s.nz = nz;
  return s;
}

ManifoldSpec ManifoldSpec::from_config(const bcml::io::ManifoldConfig& mc) {
  if (mc.kind == "interval") {
    std::function<double(double)> speed;
    if (mc.speed == "unit") speed = {};
    else if (mc.speed == "one_over_one_plus_x") speed = [](double x) { return 1.0 / (1.0 + x); };
    else throw std::invalid_argument("manifold.speed: unknown profile '" + mc.speed + "'");
    return interval(mc.nx, mc.length, std::move(speed));
  }
  if (mc.kind == "rect2d") {
    std::function<double(double, double)> rho;
    if (mc.conformal == "flat") rho = {};
    else if (mc.conformal.rfind("sinbump:", 0) == 0) {
      double amp = std::stod(mc.conformal.substr(8));
      // Amplitude bump in box-normalized coordinates: one arch over the span.
      double lx = mc.nx - 1.0, ly = mc.ny - 1.0;
      rho = [amp, lx, ly](double x, double y) {
        return 1.0 + amp * std::sin(M_PI * x / lx) * std::sin(M_PI * y / ly);
      };
    } else {
      throw std::invalid_argument("manifold.conformal: unknown profile '" + mc.conformal + "'");
    }
    return rect2d(mc.nx, mc.ny, std::move(rho));
  }
  if (mc.kind == "box3d") return box3d(mc.nx, mc.ny, mc.nz);
  throw std::invalid_argument("manifold.kind: '" + mc.kind + "'");
}

double DiscreteManifold::min_edge_length() const {
  double m = kInf;
  for (double l : adj_length) m = std::min(m, l);
  return m;
}

DiscreteManifold build_manifold(const ManifoldSpec& spec) {
  DiscreteManifold m;
  std::vector<EdgeDraft> edges;

  if (spec.kind == ManifoldSpec::Kind::interval) {
    check_sizes(spec.nx, 3, 3, 1);
    if (!(spec.length > 0)) throw std::invalid_argument("build_manifold: interval length must be > 0");
    const int n = spec.nx;
    const double hx = spec.length / (n - 1);
    m.dim = 1;
    m.grid = {1, {n, 1, 1}, {hx, 0, 0}};
    m.vertices.resize(n);
    auto speed = [&](double x) { return spec.speed ? spec.speed(x) : 1.0; };
    for (int i = 0; i < n; ++i) m.vertices[i] = {i * hx, 0, 0};
    // Metric edge length = coordinate step / speed at the midpoint.
    std::vector<double> len(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
      double xm = (i + 0.5) * hx;
      double c = speed(xm);
      if (!(c > 0)) throw std::invalid_argument("build_manifold: speed profile must be positive");
      len[i] = hx / c;
      edges.push_back({i, i + 1, len[i], 1.0 / len[i]});
    }
    m.vertex_weight.assign(n, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
      m.vertex_weight[i] += 0.5 * len[i];
      m.vertex_weight[i + 1] += 0.5 * len[i];
    }
    m.boundary_ids = {0, n - 1};
    // Zero-dimensional boundary carries counting measure.
    m.boundary_measure.assign(n, 0.0);
    m.boundary_measure[0] = m.boundary_measure[n - 1] = 1.0;
  } else if (spec.kind == ManifoldSpec::Kind::rect2d) {
    check_sizes(spec.nx, spec.ny, 3, 2);
    const int nx = spec.nx, ny = spec.ny;
    const double hx = 1.0, hy = 1.0;  // unit-spaced grid, metric via the factor
    m.dim = 2;
    m.grid = {2, {nx, ny, 1}, {hx, hy, 0}};
    m.vertices.resize(static_cast<std::size_t>(nx) * ny);
    auto rho = [&](double x, double y) { return spec.conformal ? spec.conformal(x, y) : 1.0; };
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) m.vertices[m.index(i, j)] = {i * hx, j * hy, 0};
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (i + 1 < nx) {
          double r = rho((i + 0.5) * hx, j * hy);
          if (!(r > 0)) throw std::invalid_argument("build_manifold: conformal factor must be positive");
          // In 2D the conformal factor cancels in the edge conductance.
          edges.push_back({m.index(i, j), m.index(i + 1, j), r * hx, hy / hx});
        }
        if (j + 1 < ny) {
          double r = rho(i * hx, (j + 0.5) * hy);
          if (!(r > 0)) throw std::invalid_argument("build_manifold: conformal factor must be positive");
          edges.push_back({m.index(i, j), m.index(i, j + 1), r * hy, hx / hy});
        }
      }
    m.vertex_weight.resize(m.vertices.size());
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double frac = ((i == 0 || i == nx - 1) ? 0.5 : 1.0) * ((j == 0 || j == ny - 1) ? 0.5 : 1.0);
        double r = rho(i * hx, j * hy);
        m.vertex_weight[m.index(i, j)] = r * r * hx * hy * frac;
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1) m.boundary_ids.push_back(m.index(i, j));
    // Boundary length element: one trapezoid contribution per wall the vertex
    // sits on, so corners pick up half of each incident side.
    m.boundary_measure.assign(m.vertices.size(), 0.0);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double r = rho(i * hx, j * hy);
        double fx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
        double fy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
        double mu = 0;
        if (i == 0 || i == nx - 1) mu += r * hy * fy;
        if (j == 0 || j == ny - 1) mu += r * hx * fx;
        m.boundary_measure[m.index(i, j)] = mu;
      }
  } else {
    check_sizes(spec.nx, spec.ny, spec.nz, 3);
    const int nx = spec.nx, ny = spec.ny, nz = spec.nz;
    // Unit cube.
    const double hx = 1.0 / (nx - 1), hy = 1.0 / (ny - 1), hz = 1.0 / (nz - 1);
    m.dim = 3;
    m.grid = {3, {nx, ny, nz}, {hx, hy, hz}};
    m.vertices.resize(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) m.vertices[m.index(i, j, k)] = {i * hx, j * hy, k * hz};
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          if (i + 1 < nx) edges.push_back({m.index(i, j, k), m.index(i + 1, j, k), hx, hy * hz / hx});
          if (j + 1 < ny) edges.push_back({m.index(i, j, k), m.index(i, j + 1, k), hy, hx * hz / hy});
          if (k + 1 < nz) edges.push_back({m.index(i, j, k), m.index(i, j, k + 1), hz, hx * hy / hz});
        }
    m.vertex_weight.resize(m.vertices.size());
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          double frac = ((i == 0 || i == nx - 1) ? 0.5 : 1.0) * ((j == 0 || j == ny - 1) ? 0.5 : 1.0) *
                        ((k == 0 || k == nz - 1) ? 0.5 : 1.0);
          m.vertex_weight[m.index(i, j, k)] = hx * hy * hz * frac;
        }
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1)
            m.boundary_ids.push_back(m.index(i, j, k));
    m.boundary_measure.assign(m.vertices.size(), 0.0);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          double fx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
          double fy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
          double fz = (k == 0 || k == nz - 1) ? 0.5 : 1.0;
          double mu = 0;
          if (i == 0 || i == nx - 1) mu += hy * hz * fy * fz;
          if (j == 0 || j == ny - 1) mu += hx * hz * fx * fz;
          if (k == 0 || k == nz - 1) mu += hx * hy * fx * fy;
          m.boundary_measure[m.index(i, j, k)] = mu;
        }
  }

  // CSR assembly (undirected edges stored both ways).
  const int nv = m.n_vertices();
  std::vector<int> degree(nv, 0);
  for (const auto& e : edges) {
    ++degree[e.a];
    ++degree[e.b];
  }
  m.adj_offset.assign(nv + 1, 0);
  for (int v = 0; v < nv; ++v) m.adj_offset[v + 1] = m.adj_offset[v] + degree[v];
  m.adj_vertex.resize(m.adj_offset[nv]);
  m.adj_length.resize(m.adj_offset[nv]);
  m.adj_conductance.resize(m.adj_offset[nv]);
  std::vector<int> cursor(m.adj_offset.begin(), m.adj_offset.end() - 1);
  for (const auto& e : edges) {
    m.adj_vertex[cursor[e.a]] = e.b;
    m.adj_length[cursor[e.a]] = e.length;
    m.adj_conductance[cursor[e.a]] = e.conductance;
    ++cursor[e.a];
    m.adj_vertex[cursor[e.b]] = e.a;
    m.adj_length[cursor[e.b]] = e.length;
    m.adj_conductance[cursor[e.b]] = e.conductance;
    ++cursor[e.b];
  }

  m.is_boundary.assign(nv, 0);
  for (int v : m.boundary_ids) m.is_boundary[v] = 1;
  std::sort(m.boundary_ids.begin(), m.boundary_ids.end());
  return m;
}

std::vector<BoundaryPatch> patch_catalog(const DiscreteManifold& m) {
  std::vector<BoundaryPatch> catalog;
  const auto& n = m.grid.n;
  auto sorted = [](BoundaryPatch p) {
    std::sort(p.vertex_ids.begin(), p.vertex_ids.end());
    return p;
  };
  if (m.dim == 1) {
    catalog.push_back({"left", {0}});
    catalog.push_back({"right", {m.index(n[0] - 1)}});
    return catalog;
  }
  if (m.dim == 2) {
    const int nx = n[0], ny = n[1];
    BoundaryPatch left{"left", {}}, right{"right", {}}, bottom{"bottom", {}}, top{"top", {}};
    for (int j = 0; j < ny; ++j) {
      left.vertex_ids.push_back(m.index(0, j));
      right.vertex_ids.push_back(m.index(nx - 1, j));
    }
    for (int i = 0; i < nx; ++i) {
      bottom.vertex_ids.push_back(m.index(i, 0));
      top.vertex_ids.push_back(m.index(i, ny - 1));
    }
    // Half-sides: low half [0, floor((n-1)/2)], high half [ceil((n-1)/2), n-1];
    // for odd side lengths the middle vertex belongs to both halves.
    auto halves = [&](const BoundaryPatch& side, int count) {
      int lo_end = (count - 1) / 2, hi_start = (count - 1 + 1) / 2;
      BoundaryPatch lo{side.name + "_lo", {}}, hi{side.name + "_hi", {}};
      for (int t = 0; t <= lo_end; ++t) lo.vertex_ids.push_back(side.vertex_ids[t]);
      for (int t = hi_start; t < count; ++t) hi.vertex_ids.push_back(side.vertex_ids[t]);
      return std::pair{lo, hi};
    };
    for (auto* side : {&left, &right, &bottom, &top}) catalog.push_back(sorted(*side));
    for (auto* side : {&left, &right}) {
      auto [lo, hi] = halves(*side, ny);
      catalog.push_back(sorted(lo));
      catalog.push_back(sorted(hi));
    }
    for (auto* side : {&bottom, &top}) {
      auto [lo, hi] = halves(*side, nx);
      catalog.push_back(sorted(lo));
      catalog.push_back(sorted(hi));
    }
    return catalog;
  }
  const int nx = n[0], ny = n[1], nz = n[2];
  BoundaryPatch f[6] = {{"x_lo", {}}, {"x_hi", {}}, {"y_lo", {}}, {"y_hi", {}}, {"z_lo", {}}, {"z_hi", {}}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      f[0].vertex_ids.push_back(m.index(0, j, k));
      f[1].vertex_ids.push_back(m.index(nx - 1, j, k));
    }
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      f[2].vertex_ids.push_back(m.index(i, 0, k));
      f[3].vertex_ids.push_back(m.index(i, ny - 1, k));
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      f[4].vertex_ids.push_back(m.index(i, j, 0));
      f[5].vertex_ids.push_back(m.index(i, j, nz - 1));
    }
  for (auto& p : f) catalog.push_back(sorted(p));
  return catalog;
}

EikonalField eikonal(const DiscreteManifold& m, const BoundaryPatch& patch) {
  if (patch.vertex_ids.empty()) throw std::invalid_argument("eikonal: empty patch");
  const int nv = m.n_vertices();
  EikonalField field;
  field.value.assign(nv, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int v : patch.vertex_ids) {
    if (v < 0 || v >= nv) throw std::invalid_argument("eikonal: patch vertex out of range");
    field.value[v] = 0.0;
    heap.push({0.0, v});
  }
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > field.value[v]) continue;
    for (int e = m.adj_offset[v]; e < m.adj_offset[v + 1]; ++e) {
      int u = m.adj_vertex[e];
      double nd = d + m.adj_length[e];
      if (nd < field.value[u]) {
        field.value[u] = nd;
        heap.push({nd, u});
      }
    }
  }
  for (double d : field.value)
    if (!(d < kInf)) throw std::runtime_error("eikonal: manifold graph is disconnected");
  return field;
}

double diameter(const DiscreteManifold& m) {
  // All-pairs via one Dijkstra per vertex; grids here are small enough.
  double diam = 0.0;
  const int nv = m.n_vertices();
  std::vector<double> dist;
  using Item = std::pair<double, int>;
  for (int src = 0; src < nv; ++src) {
    dist.assign(nv, kInf);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v]) continue;
      for (int e = m.adj_offset[v]; e < m.adj_offset[v + 1]; ++e) {
        int u = m.adj_vertex[e];
        double nd = d + m.adj_length[e];
        if (nd < dist[u]) {
          dist[u] = nd;
          heap.push({nd, u});
        }
      }
    }
    for (double d : dist) diam = std::max(diam, d);
  }
  return diam;
}

CutoffFamily cutoff_family(const DiscreteManifold& m, const EikonalField& tau,
                           const std::vector<double>& s_grid) {
  if (tau.value.size() != static_cast<std::size_t>(m.n_vertices()))
    throw std::invalid_argument("cutoff_family: eikonal size mismatch");
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] > s_grid[i - 1]))
      throw std::invalid_argument("cutoff_family: s_grid must be strictly increasing");
  CutoffFamily fam;
  fam.s_grid = s_grid;
  fam.inside.resize(s_grid.size());
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    fam.inside[k].resize(tau.value.size());
    for (std::size_t v = 0; v < tau.value.size(); ++v)
      fam.inside[k][v] = tau.value[v] < s_grid[k] ? 1 : 0;  // strict sub-level set
  }
  return fam;
}

std::vector<double> uniform_s_grid(double s_max, int count) {
  if (count < 2 || !(s_max > 0)) throw std::invalid_argument("uniform_s_grid: bad arguments");
  std::vector<double> s(count);
  for (int i = 0; i < count; ++i) s[i] = s_max * i / (count - 1);
  return s;
}

}  // namespace bcml::geo
