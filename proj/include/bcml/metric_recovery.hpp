#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "bcml/eikonal_algebra.hpp"

// From a spectrum cloud to a metric point cloud: local charts whose
// coordinates are n of the per-patch values, gradients of every patch value
// in those coordinates, the inverse metric solved pointwise from the unit
// gradient-norm equations, and a distance-carrying copy assembled from the
// local metrics.
namespace bcml::rec {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Chart {
  int anchor = -1;                 // cloud point id
  std::vector<int> members;        // neighborhood point ids, anchor first
  std::vector<int> coord_patches;  // catalog indices of the n coordinates
  MatrixXd coords;                 // members x n coordinate values
  VectorXd weights;                // member multiplicities
  double cond = 0;                 // conditioning of coordinate gradients
  bool valid = false;
};

// Selects dim coordinate patches greedily, at each step minimizing the
// condition number of the stacked gradient rows at the anchor (estimated in
// a local principal frame); ties prefer the better-scaled candidate, then
// catalog order. valid=false when no selection meets cond_cap.
Chart build_chart(const alg::SpectrumCloud& cloud, int anchor, int k_neighbors, int dim,
                  double cond_cap);

// Gradient of one per-member value vector at the anchor: weighted affine
// least squares in chart coordinates, Gaussian weights with bandwidth twice
// the median member distance, scaled by member multiplicity. Throws when the
// neighborhood is degenerate for an affine fit.
VectorXd estimate_gradients(const Chart& chart, const VectorXd& values);

struct MetricSolve {
  MatrixXd g;           // inverse metric in chart coordinates, symmetric
  double residual = 0;  // rms misfit of the unit-norm equations
  bool positive_definite = false;
};

// Least-squares fit of the n(n+1)/2 inverse-metric entries to the equations
// g^ij d_i d_j = 1, one row per patch gradient d. Returns nothing when the
// system is rank deficient; indefinite solutions come back flagged.
std::optional<MetricSolve> solve_metric(const MatrixXd& gradients);

struct MetricTensorField {
  std::vector<int> point_ids;       // accepted cloud points
  std::vector<Chart> charts;        // aligned with point_ids
  std::vector<MetricSolve> metric;  // aligned with point_ids
  std::vector<int> unchartable;     // no coordinate subset met the cap
  std::vector<int> excluded;        // degenerate gradient fit or metric solve
};

MetricTensorField recover_metric_field(const alg::SpectrumCloud& cloud, int dim, int k_neighbors,
                                       double cond_cap);

struct CopyEdge {
  int i = 0, j = 0;  // rows into the copy tables, i < j
  double length = 0;
};

struct CopyManifold {
  std::vector<int> cloud_ids;  // copy row -> cloud point
  MatrixXd tau;                // per-patch coordinates of the copy points
  std::vector<std::uint8_t> boundary;
  std::vector<std::vector<int>> patch_incidence;  // patch ids per copy row
  std::vector<CopyEdge> edges;
  MatrixXd dist;  // all-pairs graph distance

  int n_points() const { return static_cast<int>(cloud_ids.size()); }
};

// Metric graph over the points with positive-definite solves: each point
// links to its knn_edges nearest neighbors by symmetrized local-metric
// length, long edges are pruned at radius_factor times the median nearest
// spacing, and distances are graph shortest paths. Fails when fewer than
// half the cloud points survive or the graph is disconnected.
CopyManifold assemble_copy(const alg::SpectrumCloud& cloud, const MetricTensorField& field,
                           int knn_edges, double radius_factor, double boundary_eps);

}  // namespace bcml::rec
