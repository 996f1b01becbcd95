#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bcml/geometry.hpp"

// Nested projection families over an s-grid, stored as one orthonormal column
// block per family: the first rank_at_s[k] columns span the range of the
// projection at s_grid[k]. Exact sub-level cutoffs and model projections both
// reduce to this shape, so the Stieltjes machinery downstream handles them
// uniformly without ever materializing per-s matrices.
namespace bcml::fam {

using Eigen::MatrixXd;

struct SpectralFamily {
  std::string patch;
  std::vector<double> s_grid;   // ascending, uniform
  MatrixXd q;                   // ambient_dim x total_rank, orthonormal
  std::vector<int> rank_at_s;   // nondecreasing; back() == q.cols()

  int ambient_dim() const { return static_cast<int>(q.rows()); }
  int total_rank() const { return static_cast<int>(q.cols()); }

  // Materializes the projection matrix at one grid index (tests, small runs).
  MatrixXd projection(int s_index) const;

  // Checks grid ordering, rank monotonicity and basis orthonormality;
  // throws std::runtime_error naming the first violated property.
  void validate() const;
};

// Lifts an exact sub-level cutoff family to a SpectralFamily: columns are the
// vertex indicator directions ordered by first inclusion (ties by vertex id).
// Rejects non-monotone input (a vertex leaving the sub-level set).
SpectralFamily from_cutoffs(const geo::CutoffFamily& cf, const std::string& patch);

}  // namespace bcml::fam
