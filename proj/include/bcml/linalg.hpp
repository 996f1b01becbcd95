#pragma once

#include <Eigen/Dense>

// Dense linear-algebra kernels shared by the pipeline modules. The heavy
// symmetric eigendecompositions and singular-value computations go through
// LAPACKE when available (BCML_USE_LAPACKE); otherwise Eigen's built-in
// solvers are used. All routines are deterministic for fixed inputs.
namespace bcml::la {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eigendecomposition of a symmetric matrix. On return `a` holds the
// eigenvectors (one per column) and the result holds ascending eigenvalues.
VectorXd sym_eig_inplace(MatrixXd& a);

// Singular values in descending order (values only, no vectors).
VectorXd singular_values(const MatrixXd& a);

// Largest singular value. Exact (via singular_values) when
// min(rows, cols) <= exact_limit, otherwise a fixed-iteration power method
// on A^T A with a deterministic start vector.
double spectral_norm(const MatrixXd& a, int exact_limit = 1200);

double frobenius_relative_asymmetry(const MatrixXd& a);

// Incremental orthonormal basis with block Gram-Schmidt and a second
// reorthogonalization pass. Columns are accepted when the residual keeps at
// least `tol_rel` of the candidate's original norm and clears the absolute
// floor `tol_abs` (for spaces where candidate norms carry meaning, e.g.
// singular-value-scaled images). Accepted columns are appended to Q in input
// order; Q stays orthonormal to machine precision.
class IncrementalBasis {
 public:
  IncrementalBasis(int dim, int max_rank);

  // Processes a block of candidate columns; returns how many were accepted.
  int add_block(const MatrixXd& cols, double tol_rel, double tol_abs = 0.0);

  int rank() const { return rank_; }
  int dim() const { return dim_; }
  // View of the accepted basis (dim x rank).
  Eigen::Ref<const MatrixXd> basis() const { return storage_.leftCols(rank_); }

 private:
  int dim_;
  int rank_ = 0;
  MatrixXd storage_;
};

}  // namespace bcml::la
