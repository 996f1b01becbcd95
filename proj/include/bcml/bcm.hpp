#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bcml/family.hpp"
#include "bcml/wave.hpp"

// Data side of the boundary control pipeline: everything here consumes only
// the boundary response matrix (or the forward Gram oracle, for validation)
// plus boundary bookkeeping, never the interior manifold. Operators are kept
// in weight-normalized ("hat") coordinates f_hat = M^{1/2} f, which turns all
// the weighted adjoints into plain transposes, so the connecting operator is
// an ordinary symmetric matrix and its square root an ordinary eigenproblem.
namespace bcml::bcm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Odd reflection of a [0,T] nodal control about t = T onto the [0,2T] grid.
// The reflection fixed point t = T carries the value zero, so the output
// satisfies out(2T - t_k) = -out(t_k) at every node.
VectorXd odd_extension(const wave::ControlSpace& cs_t, const wave::ControlSpace& cs_2t,
                       const VectorXd& nodal_t);

// Cumulative trapezoid antiderivative per boundary slot, zero at t = 0.
VectorXd time_integrate(const wave::ControlSpace& cs, const VectorXd& nodal);

struct ConnectingOperator {
  MatrixXd mat;                  // hat coordinates, symmetric, n_basis(T) square
  double asymmetry_defect = 0;   // ||raw - raw^T|| / ||raw||, spectral, pre-symmetrization
  std::string provenance;        // "response" or "gram"
};

// Assembles the connecting operator from the boundary response on [0,2T]:
// one half of (extend-oddly, respond, integrate in time, restrict) as a
// bilinear form on [0,T] basis controls. Everything is applied column-wise;
// the response matrix is the only large input.
ConnectingOperator connecting_from_response(const wave::ControlSpace& cs_t,
                                            const wave::ControlSpace& cs_2t,
                                            const MatrixXd& r2t);

// Wraps the forward Gram matrix (final-state inner products of basis
// controls) into the same hat coordinates. Validation path only.
ConnectingOperator connecting_from_gram(const wave::ControlSpace& cs_t, const MatrixXd& gram);

// Spectral square root of the connecting operator with its negative and
// near-null part clipped at tol_psd * lambda_max. Columns of `basis` are the
// retained eigenvectors in descending eigenvalue order; `singular` holds the
// square roots. These are exactly the singular data of the control-to-state
// modulus, and diag(singular) * basis^T maps a hat control to its
// coordinates in the abstract model space.
struct ModelSpace {
  MatrixXd basis;
  VectorXd singular;
  double clipped_mass = 0;   // |clipped spectrum| / |full spectrum|, L1
  std::string warning;       // set when the clipped mass is implausibly large

  int rank() const { return static_cast<int>(singular.size()); }
  MatrixXd sqrt_matrix() const;   // modulus in hat coordinates (small cases)
  MatrixXd model_images() const;  // rank x n_basis: model coordinates of every basis control
};

ModelSpace sqrt_psd(const ConnectingOperator& c, double tol_psd);

// Basis indices of the controls supported on patch x [T - s, T]: slot in the
// patch and hat support inside the window, i.e. (k-1)*dt >= T - s.
struct SubspaceSelector {
  std::string patch;
  double s = 0;
  std::vector<int> indices;
};

SubspaceSelector delayed_selector(const wave::ControlSpace& cs, const std::string& patch,
                                  const std::vector<int>& boundary_slots, double s);

// Model-space projections onto the images of the delayed subspaces, one
// nested family per patch over the s grid. Columns are accepted into the
// running orthonormal basis when their residual exceeds tol_rank times the
// top singular value.
fam::SpectralFamily model_projection_family(const ModelSpace& ms, const wave::ControlSpace& cs,
                                            const std::string& patch,
                                            const std::vector<int>& boundary_slots,
                                            const std::vector<double>& s_grid, double tol_rank);

}  // namespace bcml::bcm
