#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bcml::io {
struct ManifoldConfig;
}

// Discrete manifolds as weighted vertex/edge graphs over structured grids,
// with boundary bookkeeping, patch catalogs, graph-metric eikonals and the
// nested sub-level cutoff families built from them.
namespace bcml::geo {

struct GridInfo {
  int dim = 1;
  std::array<int, 3> n = {0, 1, 1};       // vertices per axis
  std::array<double, 3> h = {0, 0, 0};    // coordinate spacing per axis
};

struct ManifoldSpec {
  enum class Kind { interval, rect2d, box3d };
  Kind kind = Kind::interval;
  int nx = 0, ny = 0, nz = 0;
  double length = 1.0;                            // interval extent
  std::function<double(double)> speed;            // interval: propagation speed c(x)
  std::function<double(double, double)> conformal;  // rect2d: metric factor rho(x, y)

  static ManifoldSpec interval(int n, double length, std::function<double(double)> speed = {});
  static ManifoldSpec rect2d(int nx, int ny, std::function<double(double, double)> conformal = {});
  static ManifoldSpec box3d(int nx, int ny, int nz);
  // Builds a spec from config text fields (named speed/conformal profiles).
  static ManifoldSpec from_config(const bcml::io::ManifoldConfig& mc);
};

struct DiscreteManifold {
  int dim = 1;
  GridInfo grid;
  std::vector<std::array<double, 3>> vertices;  // coordinates, unused axes zero

  // CSR adjacency; lengths are metric edge lengths, conductances weight the
  // discrete wave operator.
  std::vector<int> adj_offset;
  std::vector<int> adj_vertex;
  std::vector<double> adj_length;
  std::vector<double> adj_conductance;

  std::vector<int> boundary_ids;            // ascending vertex ids
  std::vector<std::uint8_t> is_boundary;
  std::vector<double> vertex_weight;        // metric volume element per vertex
  std::vector<double> boundary_measure;     // surface area element, zero on interior

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int index(int i, int j = 0, int k = 0) const {
    return (k * grid.n[1] + j) * grid.n[0] + i;
  }
  double min_edge_length() const;
};

DiscreteManifold build_manifold(const ManifoldSpec& spec);

struct BoundaryPatch {
  std::string name;
  std::vector<int> vertex_ids;  // ascending
};

// Full patch catalog: interval -> both endpoints; rect2d -> 4 sides plus each
// half-side; box3d -> 6 faces. Order is fixed and documented by name.
std::vector<BoundaryPatch> patch_catalog(const DiscreteManifold& m);

struct EikonalField {
  std::vector<double> value;  // graph distance to the patch per vertex
};

EikonalField eikonal(const DiscreteManifold& m, const BoundaryPatch& patch);

// Max over vertex pairs of the graph distance.
double diameter(const DiscreteManifold& m);

struct CutoffFamily {
  std::vector<double> s_grid;                       // ascending
  std::vector<std::vector<std::uint8_t>> inside;    // [s][vertex], tau < s strictly
};

CutoffFamily cutoff_family(const DiscreteManifold& m, const EikonalField& tau,
                           const std::vector<double>& s_grid);

std::vector<double> uniform_s_grid(double s_max, int count);

}  // namespace bcml::geo
