#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bcml/eikonal_algebra.hpp"
#include "bcml/family.hpp"
#include "bcml/geometry.hpp"

// Staggered vector-calculus lab on the unit box. The differential operators
// are pure integer incidence matrices (vertex potentials -> edge
// circulations -> face fluxes -> cell integrals), so the exactness
// identities curl*grad = 0 and div*curl = 0 cancel in integers; the metric
// lives entirely in diagonal inner-product weights per level. Face fields
// are handled in hat coordinates (flux times sqrt of face weight), where the
// weighted inner product is Euclidean and pointwise multiplication by a
// scalar sample stays diagonal.
namespace bcml::sol {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseD = Eigen::SparseMatrix<double>;

struct CurlComplex {
  geo::DiscreteManifold box;  // vertex grid; supplies the graph metric

  SparseD grad;  // n_edges x n_vertices, entries +-1
  SparseD curl;  // n_faces x n_edges
  SparseD div;   // n_cells x n_faces

  // Diagonal inner-product weights: vertex = dual volume, edge/face = dual
  // volume over squared length/area (circulation and flux coordinates),
  // cell = inverse volume (integral coordinates).
  VectorXd vertex_weight, edge_weight, face_weight, cell_weight;

  std::vector<std::array<int, 2>> edge_ends;  // endpoint vertex ids
  MatrixXd face_center;                       // n_faces x 3

  // Orthonormal basis (hat coordinates) of the closure of the curl range;
  // every solenoidal object below is expressed in these columns.
  MatrixXd basis;

  int n_vertices() const { return static_cast<int>(grad.cols()); }
  int n_edges() const { return static_cast<int>(grad.rows()); }
  int n_faces() const { return static_cast<int>(curl.rows()); }
  int n_cells() const { return static_cast<int>(div.rows()); }
  int curl_rank() const { return static_cast<int>(basis.cols()); }
};

// Assembles the complex on an nx x ny x nz vertex grid over the unit box and
// orthonormalizes the curl range. Throws when an axis has fewer than 3
// vertices (no interior circulation, trivial curl space).
CurlComplex build_curl_complex(int nx, int ny, int nz, double tol_rank = 1e-6);

// Decomposition bookkeeping for the face space: the dual-gradient image
// (potentials on cells, zero outside the box), the curl range, and whatever
// is left. ortho_defect is the largest inner product between the two bases.
struct HelmholtzCheck {
  int n_faces = 0;
  int dim_potential = 0;
  int dim_curl = 0;
  int dim_harmonic = 0;  // n_faces - dim_potential - dim_curl
  double ortho_defect = 0.0;
};

HelmholtzCheck helmholtz_split_check(const CurlComplex& cc, double tol_rank = 1e-6);

struct CurlSubspaceBasis {
  std::string patch;
  double s = 0.0;
  MatrixXd basis;  // hat coordinates, orthonormal columns

  int dim() const { return static_cast<int>(basis.cols()); }
};

// Curls generated inside the sub-level neighborhood: every edge whose both
// endpoints have tau < s contributes its curl column. The span can reach
// outside the neighborhood; only the generators are localized.
CurlSubspaceBasis curl_subspace(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                double s, double tol_rank = 1e-6);

// Nested projection family of the subspaces above over an ascending s grid.
// `family.q` holds the columns in curl-range coordinates (cc.basis), so the
// family plugs directly into the Stieltjes machinery; `face_q` keeps the
// same columns in hat face coordinates for the multiplication probes;
// `jump_weight[c]` is the grid value at which column c first appeared.
struct SolenoidalFamily {
  fam::SpectralFamily family;
  MatrixXd face_q;
  VectorXd jump_weight;
};

SolenoidalFamily solenoidal_family(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                   const std::vector<double>& s_grid, double tol_rank = 1e-6);

using SolenoidalEikonal = alg::OperatorEikonal;

SolenoidalEikonal solenoidal_eikonal(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                     const std::vector<double>& s_grid, double tol_rank = 1e-6);
SolenoidalEikonal solenoidal_eikonal(const SolenoidalFamily& fam);

// Full singular-value picture of one probed operator. Tail ratios at fixed
// fractions of the dimension are the refinement-series observable: a genuine
// norm-limit of finite-rank pieces shows up as tails sinking under grid
// refinement, which is the only finite-dimensional shadow of compactness we
// can measure.
struct CompactnessReport {
  std::string label;
  VectorXd singular;     // descending
  double rel_norm = 0.0; // commutator probes: norm over product of factor norms

  int dim() const { return static_cast<int>(singular.size()); }
  double norm() const { return singular.size() ? singular(0) : 0.0; }
  // sigma_k / sigma_1 with k 1-indexed and clamped to [1, dim].
  double tail_ratio_at(int k) const;
  // k = max(1, floor(frac * dim)).
  double tail_ratio(double frac) const;
};

// Commutator of two eikonals given in the same coordinates: reports its
// singular values and the norm relative to the product of the factor norms.
CompactnessReport noncommutativity_probe(const SolenoidalEikonal& a, const SolenoidalEikonal& b);

// Difference between the solenoidal eikonal and pointwise multiplication by
// tau on face fields, restricted to the curl range. Requires a saturated
// family (final rank equals the curl rank); tau_face from tau_on_faces.
CompactnessReport compactness_probe(const CurlComplex& cc, const SolenoidalFamily& fam,
                                    const VectorXd& tau_face);

// Difference between multiplying by f and multiplying-then-projecting back
// onto the curl range. The defect maps the curl range into its orthogonal
// complement (the dual-gradient block), so it is reported as that block:
// same nonzero singular values, and the tail fractions are taken against the
// block's own minor dimension instead of being padded with structural zeros.
CompactnessReport compactness_probe(const CurlComplex& cc, const VectorXd& f_face,
                                    const std::string& label = "multiplier_minus_projected");

// (max |f| over face samples, k-th singular value of the multiply-project
// operator on the curl range). The second entry estimates the essential
// norm: it can only approach the first from below, and should climb toward
// it as the grid refines.
std::pair<double, double> calkin_isometry_probe(const CurlComplex& cc, const VectorXd& f_face,
                                                int burn_in = 10);

VectorXd sample_on_faces(const CurlComplex& cc,
                         const std::function<double(double, double, double)>& f);

// Vertex field averaged onto face centers (mean of the four corner values).
VectorXd field_on_faces(const CurlComplex& cc, const std::vector<double>& vertex_value);

// Uniform grid from 0 past the largest tau value by two steps, so the family
// always saturates.
std::vector<double> saturating_s_grid(const geo::EikonalField& tau, double step);

}  // namespace bcml::sol
