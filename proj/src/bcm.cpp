#include "bcml/bcm.hpp"

#include <cmath>
#include <stdexcept>

#include "bcml/linalg.hpp"

namespace bcml::bcm {

namespace {

void check_grid_pair(const wave::ControlSpace& cs_t, const wave::ControlSpace& cs_2t) {
  if (cs_t.n_boundary() != cs_2t.n_boundary())
    throw std::invalid_argument("control spaces disagree on boundary size");
  if (cs_2t.n_steps != 2 * cs_t.n_steps)
    throw std::invalid_argument("doubled control grid must have twice the steps");
  if (std::abs(cs_t.dt - cs_2t.dt) > 1e-9 * cs_t.dt)
    throw std::invalid_argument("control spaces disagree on node spacing");
}

// Hat basis functions live on [(k-1)dt, (k+1)dt], so the control vanishes
// outside [T-s, T] exactly when (k-1)dt clears T-s.
bool hat_in_window(const wave::ControlSpace& cs, int k, double s) {
  return (k - 1) * cs.dt >= cs.T - s - 1e-12;
}

}  // namespace

VectorXd odd_extension(const wave::ControlSpace& cs_t, const wave::ControlSpace& cs_2t,
                       const VectorXd& nodal_t) {
  check_grid_pair(cs_t, cs_2t);
  if (nodal_t.size() != cs_t.n_nodal())
    throw std::invalid_argument("odd extension: nodal size mismatch");
  const int nb = cs_t.n_boundary();
  const int big_k = cs_t.n_steps;
  VectorXd out = VectorXd::Zero(cs_2t.n_nodal());
  for (int k = 0; k < big_k; ++k) {
    for (int b = 0; b < nb; ++b) {
      const double v = nodal_t[cs_t.nodal_index(b, k)];
      out[cs_2t.nodal_index(b, k)] = v;
      out[cs_2t.nodal_index(b, 2 * big_k - k)] = -v;
    }
  }
  // t = T is the reflection fixed point; antisymmetry pins it to zero.
  return out;
}

VectorXd time_integrate(const wave::ControlSpace& cs, const VectorXd& nodal) {
  if (nodal.size() != cs.n_nodal())
    throw std::invalid_argument("time integration: nodal size mismatch");
  const int nb = cs.n_boundary();
  VectorXd out(cs.n_nodal());
  for (int b = 0; b < nb; ++b) {
    double acc = 0;
    out[cs.nodal_index(b, 0)] = 0;
    for (int k = 1; k <= cs.n_steps; ++k) {
      acc += 0.5 * cs.dt *
             (nodal[cs.nodal_index(b, k - 1)] + nodal[cs.nodal_index(b, k)]);
      out[cs.nodal_index(b, k)] = acc;
    }
  }
  return out;
}

ConnectingOperator connecting_from_response(const wave::ControlSpace& cs_t,
                                            const wave::ControlSpace& cs_2t,
                                            const MatrixXd& r2t) {
  check_grid_pair(cs_t, cs_2t);
  if (r2t.rows() != cs_2t.n_nodal() || r2t.cols() != cs_2t.n_basis())
    throw std::invalid_argument("response matrix shape mismatch");

  const int nb = cs_t.n_boundary();
  const int big_k = cs_t.n_steps;
  const int n_t = cs_t.n_basis();
  const VectorXd m1 = cs_t.basis_weights();
  const VectorXd m2n = cs_2t.nodal_weights();
  const VectorXd inv_sqrt_m1 = m1.cwiseSqrt().cwiseInverse();

  MatrixXd raw = MatrixXd::Zero(n_t, n_t);
  VectorXd z(cs_2t.n_nodal());
  for (int k = 2; k < big_k; ++k) {
    for (int b = 0; b < nb; ++b) {
      const int j = cs_t.basis_index(b, k);
      // Odd extension of the unit hat: +hat(k) - hat(2K-k) on the doubled grid.
      z = r2t.col(cs_2t.basis_index(b, k)) - r2t.col(cs_2t.basis_index(b, 2 * big_k - k));
      z = time_integrate(cs_2t, z);
      z.array() *= m2n.array();
      // Pair against the odd extension of every hat on the T side.
      for (int kk = 2; kk < big_k; ++kk) {
        for (int bb = 0; bb < nb; ++bb) {
          const double v = z[cs_2t.nodal_index(bb, kk)] -
                           z[cs_2t.nodal_index(bb, 2 * big_k - kk)];
          raw(cs_t.basis_index(bb, kk), j) =
              0.5 * v * inv_sqrt_m1[cs_t.basis_index(bb, kk)] * inv_sqrt_m1[j];
        }
      }
    }
  }

  ConnectingOperator c;
  const double norm_raw = la::spectral_norm(raw);
  c.asymmetry_defect =
      norm_raw > 0 ? la::spectral_norm(raw - raw.transpose()) / norm_raw : 0.0;
  c.mat = 0.5 * (raw + raw.transpose());
  c.provenance = "response";
  return c;
}

ConnectingOperator connecting_from_gram(const wave::ControlSpace& cs_t, const MatrixXd& gram) {
  if (gram.rows() != cs_t.n_basis() || gram.cols() != cs_t.n_basis())
    throw std::invalid_argument("gram matrix shape mismatch");
  const VectorXd inv_sqrt_m1 = cs_t.basis_weights().cwiseSqrt().cwiseInverse();
  MatrixXd raw = inv_sqrt_m1.asDiagonal() * gram * inv_sqrt_m1.asDiagonal();
  ConnectingOperator c;
  c.asymmetry_defect = la::frobenius_relative_asymmetry(raw);
  c.mat = 0.5 * (raw + raw.transpose());
  c.provenance = "gram";
  return c;
}

MatrixXd ModelSpace::sqrt_matrix() const {
  return basis * singular.asDiagonal() * basis.transpose();
}

MatrixXd ModelSpace::model_images() const {
  return singular.asDiagonal() * basis.transpose();
}

ModelSpace sqrt_psd(const ConnectingOperator& c, double tol_psd) {
  if (c.mat.rows() != c.mat.cols())
    throw std::invalid_argument("square root needs a square operator");
  if (!(tol_psd > 0)) throw std::invalid_argument("tol_psd must be positive");
  const int n = static_cast<int>(c.mat.rows());
  MatrixXd vec = c.mat;
  const VectorXd lam = la::sym_eig_inplace(vec);  // ascending

  const double lam_max = n > 0 ? lam[n - 1] : 0.0;
  const double cut = tol_psd * lam_max;
  int keep = 0;
  if (lam_max > 0)
    for (int i = 0; i < n; ++i)
      if (lam[i] > cut) ++keep;

  ModelSpace ms;
  ms.basis.resize(n, keep);
  ms.singular.resize(keep);
  double mass_all = 0, mass_kept = 0;
  for (int i = 0; i < n; ++i) mass_all += std::abs(lam[i]);
  for (int c_out = 0; c_out < keep; ++c_out) {
    const int i = n - 1 - c_out;  // descending order
    ms.basis.col(c_out) = vec.col(i);
    ms.singular[c_out] = std::sqrt(lam[i]);
    mass_kept += lam[i];
  }
  ms.clipped_mass = mass_all > 0 ? (mass_all - mass_kept) / mass_all : 0.0;
  if (ms.clipped_mass > 0.25) {
    ms.warning = "clipped spectral mass " + std::to_string(ms.clipped_mass) +
                 " exceeds 0.25; operator is far from positive";
  }
  return ms;
}

SubspaceSelector delayed_selector(const wave::ControlSpace& cs, const std::string& patch,
                                  const std::vector<int>& boundary_slots, double s) {
  SubspaceSelector sel;
  sel.patch = patch;
  sel.s = s;
  for (int slot : boundary_slots)
    if (slot < 0 || slot >= cs.n_boundary())
      throw std::invalid_argument("boundary slot out of range");
  for (int k = 2; k < cs.n_steps; ++k) {
    if (!hat_in_window(cs, k, s)) continue;
    for (int b : boundary_slots) sel.indices.push_back(cs.basis_index(b, k));
  }
  return sel;
}

fam::SpectralFamily model_projection_family(const ModelSpace& ms, const wave::ControlSpace& cs,
                                            const std::string& patch,
                                            const std::vector<int>& boundary_slots,
                                            const std::vector<double>& s_grid, double tol_rank) {
  if (s_grid.empty()) throw std::invalid_argument("projection family: empty s grid");
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] > s_grid[i - 1]))
      throw std::invalid_argument("projection family: s grid not ascending");

  const int r = ms.rank();
  const MatrixXd img = ms.model_images();  // rank x n_basis
  const double sigma_max = r > 0 ? ms.singular[0] : 0.0;
  la::IncrementalBasis ib(r, r);

  fam::SpectralFamily f;
  f.patch = patch;
  f.s_grid = s_grid;
  std::vector<char> admitted(cs.n_steps + 1, 0);
  for (double s : s_grid) {
    for (int k = 2; k < cs.n_steps; ++k) {
      if (admitted[k] || !hat_in_window(cs, k, s)) continue;
      admitted[k] = 1;
      MatrixXd block(r, static_cast<int>(boundary_slots.size()));
      int c = 0;
      for (int b : boundary_slots) block.col(c++) = img.col(cs.basis_index(b, k));
      ib.add_block(block, 0.0, tol_rank * sigma_max);
    }
    f.rank_at_s.push_back(ib.rank());
  }
  f.q = ib.basis();
  return f;
}

}  // namespace bcml::bcm
