#include "bcml/eikonal_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bcml/linalg.hpp"

namespace bcml::alg {

namespace {

// Path-halving union-find over cluster representatives.
int uf_find(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

double off_diagonal_energy(const std::vector<MatrixXd>& mats) {
  double off = 0;
  for (const auto& a : mats) off += a.squaredNorm() - a.diagonal().squaredNorm();
  return off;
}

}  // namespace

OperatorEikonal eikonal_from_family(const fam::SpectralFamily& f, EikonalQuadrature quad) {
  f.validate();
  const int d = f.ambient_dim();
  const int r = f.total_rank();
  const int n_s = static_cast<int>(f.s_grid.size());

  OperatorEikonal out;
  out.patch = f.patch;
  if (r == 0) {
    out.mat = MatrixXd::Zero(d, d);
    return out;
  }

  // Weight each basis column by the grid value bracketing its first
  // inclusion in the family.
  VectorXd w(r);
  int k = 0;
  for (int c = 0; c < r; ++c) {
    while (k < n_s && f.rank_at_s[k] <= c) ++k;
    if (k >= n_s) throw std::runtime_error("operator eikonal: rank table never reaches column");
    const int kj = (quad == EikonalQuadrature::right_jump) ? k : std::max(k - 1, 0);
    w(c) = f.s_grid[static_cast<std::size_t>(kj)];
  }

  MatrixXd m = f.q.leftCols(r) * w.asDiagonal() * f.q.leftCols(r).transpose();
  out.mat = 0.5 * (m + m.transpose());
  return out;
}

double commutation_defect(const OperatorEikonal& a, const OperatorEikonal& b) {
  if (a.mat.rows() != b.mat.rows() || a.mat.cols() != b.mat.cols())
    throw std::invalid_argument("commutation defect: operators act on different spaces");
  const double na = la::spectral_norm(a.mat);
  const double nb = la::spectral_norm(b.mat);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const MatrixXd com = a.mat * b.mat - b.mat * a.mat;
  return la::spectral_norm(com) / (na * nb);
}

JointDiagResult joint_diagonalize(const std::vector<OperatorEikonal>& ops, int max_sweeps,
                                  double tol_offdiag) {
  if (ops.empty()) throw std::invalid_argument("joint diagonalization: empty operator list");
  const int d = static_cast<int>(ops.front().mat.rows());
  std::vector<MatrixXd> a;
  a.reserve(ops.size());
  for (const auto& op : ops) {
    if (op.mat.rows() != d || op.mat.cols() != d)
      throw std::invalid_argument("joint diagonalization: operator sizes differ");
    a.push_back(0.5 * (op.mat + op.mat.transpose()));
  }
  const int n_ops = static_cast<int>(a.size());

  JointDiagResult res;
  res.basis = MatrixXd::Identity(d, d);
  res.off_initial = off_diagonal_energy(a);
  res.off_final = res.off_initial;
  res.converged = res.off_initial <= tol_offdiag;

  VectorXd tp(d), tq(d);
  for (int sweep = 0; sweep < max_sweeps && !res.converged; ++sweep) {
    double max_abs_sin = 0;
    for (int p = 0; p < d - 1; ++p) {
      for (int q = p + 1; q < d; ++q) {
        // Closed-form rotation: align (cos 2t, sin 2t) with the principal
        // eigenvector of the 2x2 Gram matrix of (a_pp - a_qq, 2 a_pq).
        double g11 = 0, g12 = 0, g22 = 0;
        for (const auto& m : a) {
          const double h1 = m(p, p) - m(q, q);
          const double h2 = 2.0 * m(p, q);
          g11 += h1 * h1;
          g12 += h1 * h2;
          g22 += h2 * h2;
        }
        const double lam = 0.5 * ((g11 + g22) + std::hypot(g11 - g22, 2.0 * g12));
        double x = lam - g22, y = g12;
        const double alt_x = g12, alt_y = lam - g11;
        if (alt_x * alt_x + alt_y * alt_y > x * x + y * y) {
          x = alt_x;
          y = alt_y;
        }
        const double nv = std::hypot(x, y);
        if (nv == 0.0) continue;  // objective flat in this plane
        x /= nv;
        y /= nv;
        if (x < 0) {
          x = -x;
          y = -y;
        }
        // cos 2t = x and sin 2t = -y align the rotated difference vector
        // with the principal axis; for one matrix this annihilates a_pq.
        const double c = std::sqrt(0.5 * (x + 1.0));
        const double s = -y / (2.0 * c);
        if (std::abs(s) <= 1e-15) continue;
        max_abs_sin = std::max(max_abs_sin, std::abs(s));

        for (auto& m : a) {
          tp = m.col(p);
          tq = m.col(q);
          m.col(p) = c * tp - s * tq;
          m.col(q) = s * tp + c * tq;
          tp = m.row(p);
          tq = m.row(q);
          m.row(p) = c * tp.transpose() - s * tq.transpose();
          m.row(q) = s * tp.transpose() + c * tq.transpose();
        }
        tp = res.basis.col(p);
        tq = res.basis.col(q);
        res.basis.col(p) = c * tp - s * tq;
        res.basis.col(q) = s * tp + c * tq;
      }
    }
    res.sweeps = sweep + 1;
    res.off_final = off_diagonal_energy(a);
    if (res.off_final <= tol_offdiag || max_abs_sin < 1e-13) res.converged = true;
  }

  res.values.resize(d, n_ops);
  for (int m = 0; m < n_ops; ++m) res.values.col(m) = a[static_cast<std::size_t>(m)].diagonal();
  return res;
}

SpectrumCloud spectrum_cloud(const MatrixXd& values, const std::vector<std::string>& patch_names,
                             double cluster_eps, double boundary_eps) {
  const int n = static_cast<int>(values.rows());
  const int m = static_cast<int>(values.cols());
  if (static_cast<int>(patch_names.size()) != m)
    throw std::invalid_argument("spectrum cloud: patch name count mismatch");
  if (cluster_eps < 0 || boundary_eps < 0)
    throw std::invalid_argument("spectrum cloud: negative tolerance");

  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dist = (values.row(i) - values.row(j)).lpNorm<Eigen::Infinity>();
      if (dist < cluster_eps) {
        const int ri = uf_find(parent, i);
        const int rj = uf_find(parent, j);
        if (ri != rj) parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
      }
    }
  }

  SpectrumCloud cloud;
  cloud.patch_names = patch_names;
  cloud.cluster_of.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> root_to_id(static_cast<std::size_t>(n), -1);
  int n_points = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf_find(parent, i);
    if (root_to_id[static_cast<std::size_t>(r)] < 0) root_to_id[static_cast<std::size_t>(r)] = n_points++;
    cloud.cluster_of[static_cast<std::size_t>(i)] = root_to_id[static_cast<std::size_t>(r)];
  }

  cloud.tau = MatrixXd::Zero(n_points, m);
  cloud.weight = VectorXd::Zero(n_points);
  for (int i = 0; i < n; ++i) {
    const int cid = cloud.cluster_of[static_cast<std::size_t>(i)];
    cloud.tau.row(cid) += values.row(i);
    cloud.weight(cid) += 1.0;
  }
  cloud.boundary.resize(static_cast<std::size_t>(n_points));
  for (int cid = 0; cid < n_points; ++cid) {
    cloud.tau.row(cid) /= cloud.weight(cid);
    cloud.boundary[static_cast<std::size_t>(cid)] =
        cloud.tau.row(cid).minCoeff() < boundary_eps ? 1 : 0;
  }
  return cloud;
}

}  // namespace bcml::alg
