#include "bcml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef BCML_USE_LAPACKE
#include <lapacke.h>
#endif

namespace bcml::la {

VectorXd sym_eig_inplace(MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: matrix not square");
  const int n = static_cast<int>(a.rows());
  VectorXd w(n);
  if (n == 0) return w;
#ifdef BCML_USE_LAPACKE
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
  if (info != 0) throw std::runtime_error("sym_eig: dsyevd failed, info=" + std::to_string(info));
#else
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig: eigensolver failed");
  w = es.eigenvalues();
  a = es.eigenvectors();
#endif
  return w;
}

VectorXd singular_values(const MatrixXd& a) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  const int k = std::min(m, n);
  VectorXd s(k);
  if (k == 0) return s;
#ifdef BCML_USE_LAPACKE
  MatrixXd work = a;  // dgesdd overwrites
  lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', m, n, work.data(), m,
                                   s.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw std::runtime_error("singular_values: dgesdd failed, info=" + std::to_string(info));
#else
  Eigen::BDCSVD<MatrixXd> svd(a);
  s = svd.singularValues();
#endif
  return s;
}

double spectral_norm(const MatrixXd& a, int exact_limit) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  if (std::min(a.rows(), a.cols()) <= exact_limit) {
    VectorXd s = singular_values(a);
    return s.size() ? s(0) : 0.0;
  }
  // Power iteration on A^T A with a fixed start; adequate for the relative
  // defect diagnostics where this path is used.
  VectorXd v = VectorXd::LinSpaced(a.cols(), 1.0, 2.0).normalized();
  double norm = 0.0;
  for (int it = 0; it < 60; ++it) {
    VectorXd w = a * v;
    v = a.transpose() * w;
    double nv = v.norm();
    if (nv == 0.0) return 0.0;
    v /= nv;
    norm = std::sqrt(nv);
  }
  return norm;
}

double frobenius_relative_asymmetry(const MatrixXd& a) {
  double denom = a.norm();
  if (denom == 0.0) return 0.0;
  return (a - a.transpose()).norm() / denom;
}

IncrementalBasis::IncrementalBasis(int dim, int max_rank)
    : dim_(dim), storage_(dim, std::min(dim, max_rank)) {}

int IncrementalBasis::add_block(const MatrixXd& cols, double tol_rel, double tol_abs) {
  if (cols.rows() != dim_) throw std::invalid_argument("IncrementalBasis: column dim mismatch");
  const int b = static_cast<int>(cols.cols());
  if (b == 0) return 0;
  MatrixXd r = cols;
  VectorXd orig_norm(b);
  for (int j = 0; j < b; ++j) orig_norm(j) = r.col(j).norm();

  // Two projection passes against the accepted basis.
  for (int pass = 0; pass < 2; ++pass) {
    if (rank_ > 0) {
      auto q = storage_.leftCols(rank_);
      MatrixXd coef = q.transpose() * r;
      r.noalias() -= q * coef;
    }
  }
  int accepted = 0;
  for (int j = 0; j < b; ++j) {
    // Orthogonalize against columns accepted earlier in this same block.
    for (int pass = 0; pass < 2; ++pass) {
      if (accepted > 0) {
        auto qb = storage_.middleCols(rank_ - accepted, accepted);
        r.col(j).noalias() -= qb * (qb.transpose() * r.col(j)).eval();
      }
    }
    double rn = r.col(j).norm();
    if (orig_norm(j) > 0.0 && rn > tol_rel * orig_norm(j) && rn > tol_abs) {
      if (rank_ >= storage_.cols()) throw std::runtime_error("IncrementalBasis: rank overflow");
      storage_.col(rank_) = r.col(j) / rn;
      ++rank_;
      ++accepted;
    }
  }
  return accepted;
}

}  // namespace bcml::la
