#pragma once

#include <Eigen/Dense>

#include "bcml/geometry.hpp"

// Forward acoustic side: boundary control spaces on a time grid, the leapfrog
// wave solver with Dirichlet boundary control and zero Cauchy data, the
// control-to-final-state map, the Neumann response matrix and the direct
// Gram oracle for the connecting operator.
namespace bcml::wave {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Controls live on boundary_vertices x time nodes {k*dt : k=0..K}. The basis
// consists of nodal hats at interior time nodes 2 <= k <= K-1, so every basis
// control vanishes at t = 0, t = dt and t = T. Keeping the final node out of
// the basis makes odd reflection about t = T exact on the spanned space (the
// final-node hat has no nontrivial antisymmetric image). Full nodal vectors
// are used for trace output and the time calculus.
struct ControlSpace {
  std::vector<int> boundary_ids;
  std::vector<double> boundary_weight;
  double T = 0;
  double dt = 0;   // node spacing
  int n_steps = 0; // K; nodes are 0..K

  int n_boundary() const { return static_cast<int>(boundary_ids.size()); }
  int n_nodes() const { return n_steps + 1; }
  int n_nodal() const { return n_boundary() * n_nodes(); }
  int n_basis() const { return n_boundary() * (n_steps - 2); }

  int nodal_index(int b, int k) const { return k * n_boundary() + b; }
  int basis_index(int b, int k) const { return (k - 2) * n_boundary() + b; }

  VectorXd basis_to_nodal(const VectorXd& coeff) const;
  VectorXd nodal_to_basis(const VectorXd& nodal) const;

  // Quadrature weights (boundary measure x dt) on the full nodal grid.
  VectorXd nodal_weights() const;
  VectorXd basis_weights() const;
};

ControlSpace make_control_space(const geo::DiscreteManifold& m, double T, double dt);

struct WaveParams {
  double dt = 0;            // PDE step; must divide the control node spacing
  double cfl_safety = 0.5;  // dt is rejected above cfl_safety * min edge length
};

void validate_wave_params(const geo::DiscreteManifold& m, const ControlSpace& cs,
                          const WaveParams& p);

struct WaveResult {
  VectorXd final_snapshot;   // u(., T_end) over all vertices
  VectorXd trace;            // Neumann trace on the control nodal grid (optional)
  std::vector<VectorXd> snapshots;  // at control nodes (optional)
};

struct WaveOptions {
  bool record_trace = false;
  bool record_snapshots = false;
};

// Solves u_tt = Laplace u with zero Cauchy data and Dirichlet control given by
// nodal values on the control grid (linear in time between nodes).
WaveResult solve_wave(const geo::DiscreteManifold& m, const ControlSpace& cs,
                      const WaveParams& p, const VectorXd& nodal_control,
                      const WaveOptions& opt = {});

// Final snapshots of all basis controls: vertices x n_basis.
MatrixXd control_map(const geo::DiscreteManifold& m, const ControlSpace& cs, const WaveParams& p);

// Response matrix: Neumann-trace nodal coefficients (rows, n_nodal) per basis
// control (columns, n_basis). One-sided normal differences, first order.
MatrixXd response_matrix(const geo::DiscreteManifold& m, const ControlSpace& cs,
                         const WaveParams& p);

// Direct connecting-operator bilinear form: G[i][j] = (u^i(.,T), u^j(.,T))
// in the metric vertex weights, over basis controls of `cs`.
MatrixXd gram_connecting_oracle(const geo::DiscreteManifold& m, const MatrixXd& snapshots);

// Conserved leapfrog energy of a state pair once the control is switched off.
double leapfrog_energy(const geo::DiscreteManifold& m, const VectorXd& u_prev,
                       const VectorXd& u_next, double dt);

}  // namespace bcml::wave
