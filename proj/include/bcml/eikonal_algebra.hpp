#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bcml/family.hpp"

// Operator eikonals built from nested projection families, commutation
// diagnostics, joint approximate diagonalization of the commuting family
// (each joint eigenvector is a numerical character), and the clustering of
// the resulting value tuples into a point cloud with per-patch coordinates.
namespace bcml::alg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct OperatorEikonal {
  std::string patch;
  MatrixXd mat;  // symmetric
};

// Quadrature for the operator Stieltjes integral of s against the family.
// Each rank increment detected on (s_{k-1}, s_k] is weighted by s_k
// (right_jump) or s_{k-1} (left_jump). right_jump reproduces families with
// jumps exactly on grid points exactly and is the primary form; by Abel
// summation it equals s_max Q(s_max) minus the left-endpoint quadrature of
// the integral of Q ds. The two forms differ by exactly
// (s_k - s_{k-1}) (Q(s_max) - Q(s_0)) on uniform grids.
enum class EikonalQuadrature { right_jump, left_jump };

OperatorEikonal eikonal_from_family(const fam::SpectralFamily& f,
                                    EikonalQuadrature quad = EikonalQuadrature::right_jump);

// ||AB - BA|| / (||A|| ||B||), spectral norms; zero when either factor is zero.
double commutation_defect(const OperatorEikonal& a, const OperatorEikonal& b);

struct JointDiagResult {
  MatrixXd basis;          // orthonormal, one numerical character per column
  MatrixXd values;         // dim x n_ops; values(j, m) = basis_j' op_m basis_j
  double off_initial = 0;  // summed squared off-diagonal energy before sweeps
  double off_final = 0;
  int sweeps = 0;
  bool converged = false;  // reached tol_offdiag or a stationary sweep
};

// Jacobi-type joint approximate diagonalization over the summed off-diagonal
// objective, with the closed-form two-matrix rotation angle. Deterministic
// fixed sweep order; the objective is monotonically nonincreasing, so the
// final iterate is the best one. Non-convergence within max_sweeps returns
// that iterate with the residual in off_final.
JointDiagResult joint_diagonalize(const std::vector<OperatorEikonal>& ops, int max_sweeps,
                                  double tol_offdiag);

struct SpectrumCloud {
  std::vector<std::string> patch_names;
  MatrixXd tau;                        // n_points x n_patches, cluster means
  VectorXd weight;                     // cluster multiplicities
  std::vector<std::uint8_t> boundary;  // min coordinate below boundary_eps
  std::vector<int> cluster_of;         // input character index -> cloud point

  int n_points() const { return static_cast<int>(tau.rows()); }
  int n_patches() const { return static_cast<int>(tau.cols()); }
};

// Single-linkage clustering of the value tuples in the sup metric with
// strictly-closer-than-eps linking (eps = 0 merges nothing). Points are
// ordered by their smallest member index; coordinates are plain member
// means and weights are member counts.
SpectrumCloud spectrum_cloud(const MatrixXd& values, const std::vector<std::string>& patch_names,
                             double cluster_eps, double boundary_eps);

}  // namespace bcml::alg
