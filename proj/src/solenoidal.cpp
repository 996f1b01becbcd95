#include "bcml/solenoidal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

#include "bcml/linalg.hpp"

namespace bcml::sol {

namespace {

// Index bookkeeping for the staggered grid: edges and faces grouped by axis,
// x group first, lexicographic (i fastest) within a group.
struct Layout {
  int nx, ny, nz;
  int nex, ney, nez, nfx, nfy, nfz;

  explicit Layout(const std::array<int, 3>& n) : nx(n[0]), ny(n[1]), nz(n[2]) {
    nex = (nx - 1) * ny * nz;
    ney = nx * (ny - 1) * nz;
    nez = nx * ny * (nz - 1);
    nfx = nx * (ny - 1) * (nz - 1);
    nfy = (nx - 1) * ny * (nz - 1);
    nfz = (nx - 1) * (ny - 1) * nz;
  }
  int n_edges() const { return nex + ney + nez; }
  int n_faces() const { return nfx + nfy + nfz; }
  int n_cells() const { return (nx - 1) * (ny - 1) * (nz - 1); }

  int vid(int i, int j, int k) const { return (k * ny + j) * nx + i; }
  int xe(int i, int j, int k) const { return (k * ny + j) * (nx - 1) + i; }
  int ye(int i, int j, int k) const { return nex + (k * (ny - 1) + j) * nx + i; }
  int ze(int i, int j, int k) const { return nex + ney + (k * ny + j) * nx + i; }
  int xf(int i, int j, int k) const { return (k * (ny - 1) + j) * nx + i; }
  int yf(int i, int j, int k) const { return nfx + (k * ny + j) * (nx - 1) + i; }
  int zf(int i, int j, int k) const { return nfx + nfy + (k * (ny - 1) + j) * (nx - 1) + i; }
  int cell(int i, int j, int k) const { return (k * (ny - 1) + j) * (nx - 1) + i; }
};

// Candidate block width for the incremental bases: wide enough for level-3
// BLAS projections, narrow enough that the within-block reorthogonalization
// stays a small fraction of the work.
constexpr int kGsBlock = 256;

// Feeds hat-coordinate curl columns of the listed edges into the basis.
void add_curl_columns(la::IncrementalBasis& ib, const SparseD& curl, const VectorXd& sqrt_w,
                      const std::vector<int>& edges, double tol_rank) {
  const int nf = static_cast<int>(curl.rows());
  for (std::size_t at = 0; at < edges.size(); at += kGsBlock) {
    const int b = static_cast<int>(std::min<std::size_t>(kGsBlock, edges.size() - at));
    MatrixXd block = MatrixXd::Zero(nf, b);
    for (int c = 0; c < b; ++c) {
      const int e = edges[at + c];
      for (SparseD::InnerIterator it(curl, e); it; ++it)
        block(static_cast<int>(it.row()), c) = it.value() * sqrt_w(it.row());
    }
    ib.add_block(block, tol_rank);
  }
}

// Orthonormal hat-coordinate basis of the dual-gradient block: the weighted
// adjoint image of the divergence, one generator per cell potential.
MatrixXd dual_gradient_basis(const CurlComplex& cc, double tol_rank) {
  const int nf = cc.n_faces(), nc = cc.n_cells();
  const VectorXd isw = cc.face_weight.cwiseSqrt().cwiseInverse();
  SparseD dt = cc.div.transpose();
  la::IncrementalBasis ib(nf, std::min(nf, nc));
  for (int at = 0; at < nc; at += kGsBlock) {
    const int b = std::min(kGsBlock, nc - at);
    MatrixXd block = MatrixXd::Zero(nf, b);
    for (int c = 0; c < b; ++c)
      for (SparseD::InnerIterator it(dt, at + c); it; ++it)
        block(static_cast<int>(it.row()), c) = it.value() * isw(it.row());
    ib.add_block(block, tol_rank);
  }
  return ib.basis();
}

}  // namespace

CurlComplex build_curl_complex(int nx, int ny, int nz, double tol_rank) {
  if (nx < 3 || ny < 3 || nz < 3)
    throw std::invalid_argument("curl complex: need at least 3 vertices per axis");

  CurlComplex cc;
  cc.box = geo::build_manifold(geo::ManifoldSpec::box3d(nx, ny, nz));
  const Layout L(cc.box.grid.n);
  const double hx = cc.box.grid.h[0], hy = cc.box.grid.h[1], hz = cc.box.grid.h[2];
  auto fx = [&](int i) { return (i == 0 || i == nx - 1) ? 0.5 : 1.0; };
  auto fy = [&](int j) { return (j == 0 || j == ny - 1) ? 0.5 : 1.0; };
  auto fz = [&](int k) { return (k == 0 || k == nz - 1) ? 0.5 : 1.0; };

  const int nv = nx * ny * nz;
  const int ne = L.n_edges(), nf = L.n_faces(), nc = L.n_cells();
  std::vector<Eigen::Triplet<double>> tg, tc, td;
  tg.reserve(2 * static_cast<std::size_t>(ne));
  tc.reserve(4 * static_cast<std::size_t>(nf));
  td.reserve(6 * static_cast<std::size_t>(nc));
  cc.edge_ends.resize(ne);
  cc.edge_weight.resize(ne);
  cc.face_weight.resize(nf);
  cc.face_center.resize(nf, 3);

  // Edges carry circulations: +1 at the head vertex, -1 at the tail. The
  // weight is the dual volume over the squared length.
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        const int e = L.xe(i, j, k);
        tg.emplace_back(e, L.vid(i + 1, j, k), 1.0);
        tg.emplace_back(e, L.vid(i, j, k), -1.0);
        cc.edge_ends[e] = {L.vid(i, j, k), L.vid(i + 1, j, k)};
        cc.edge_weight(e) = hy * fy(j) * hz * fz(k) / hx;
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int e = L.ye(i, j, k);
        tg.emplace_back(e, L.vid(i, j + 1, k), 1.0);
        tg.emplace_back(e, L.vid(i, j, k), -1.0);
        cc.edge_ends[e] = {L.vid(i, j, k), L.vid(i, j + 1, k)};
        cc.edge_weight(e) = hx * fx(i) * hz * fz(k) / hy;
      }
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int e = L.ze(i, j, k);
        tg.emplace_back(e, L.vid(i, j, k + 1), 1.0);
        tg.emplace_back(e, L.vid(i, j, k), -1.0);
        cc.edge_ends[e] = {L.vid(i, j, k), L.vid(i, j, k + 1)};
        cc.edge_weight(e) = hx * fx(i) * hy * fy(j) / hz;
      }

  // Faces carry fluxes; each row is the signed circulation loop around the
  // face, oriented by the right-hand rule about the positive axis normal.
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int f = L.xf(i, j, k);
        tc.emplace_back(f, L.ye(i, j, k), 1.0);
        tc.emplace_back(f, L.ze(i, j + 1, k), 1.0);
        tc.emplace_back(f, L.ye(i, j, k + 1), -1.0);
        tc.emplace_back(f, L.ze(i, j, k), -1.0);
        cc.face_center.row(f) << i * hx, (j + 0.5) * hy, (k + 0.5) * hz;
        cc.face_weight(f) = hx * fx(i) / (hy * hz);
      }
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        const int f = L.yf(i, j, k);
        tc.emplace_back(f, L.ze(i, j, k), 1.0);
        tc.emplace_back(f, L.xe(i, j, k + 1), 1.0);
        tc.emplace_back(f, L.ze(i + 1, j, k), -1.0);
        tc.emplace_back(f, L.xe(i, j, k), -1.0);
        cc.face_center.row(f) << (i + 0.5) * hx, j * hy, (k + 0.5) * hz;
        cc.face_weight(f) = hy * fy(j) / (hx * hz);
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        const int f = L.zf(i, j, k);
        tc.emplace_back(f, L.xe(i, j, k), 1.0);
        tc.emplace_back(f, L.ye(i + 1, j, k), 1.0);
        tc.emplace_back(f, L.xe(i, j + 1, k), -1.0);
        tc.emplace_back(f, L.ye(i, j, k), -1.0);
        cc.face_center.row(f) << (i + 0.5) * hx, (j + 0.5) * hy, k * hz;
        cc.face_weight(f) = hz * fz(k) / (hx * hy);
      }

  // Cells integrate the outward flux.
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        const int c = L.cell(i, j, k);
        td.emplace_back(c, L.xf(i + 1, j, k), 1.0);
        td.emplace_back(c, L.xf(i, j, k), -1.0);
        td.emplace_back(c, L.yf(i, j + 1, k), 1.0);
        td.emplace_back(c, L.yf(i, j, k), -1.0);
        td.emplace_back(c, L.zf(i, j, k + 1), 1.0);
        td.emplace_back(c, L.zf(i, j, k), -1.0);
      }

  cc.grad.resize(ne, nv);
  cc.grad.setFromTriplets(tg.begin(), tg.end());
  cc.curl.resize(nf, ne);
  cc.curl.setFromTriplets(tc.begin(), tc.end());
  cc.div.resize(nc, nf);
  cc.div.setFromTriplets(td.begin(), td.end());
  cc.vertex_weight = Eigen::Map<const VectorXd>(cc.box.vertex_weight.data(), nv);
  cc.cell_weight = VectorXd::Constant(nc, 1.0 / (hx * hy * hz));

  // Orthonormalize the curl range. Independent loops in the edge graph bound
  // the rank; exceeding the bound would mean the orthogonalization accepted
  // a dependent column, which deserves the loud overflow failure.
  la::IncrementalBasis ib(nf, ne - nv + 1);
  const VectorXd sw = cc.face_weight.cwiseSqrt();
  std::vector<int> all(ne);
  std::iota(all.begin(), all.end(), 0);
  add_curl_columns(ib, cc.curl, sw, all, tol_rank);
  cc.basis = ib.basis();
  return cc;
}

HelmholtzCheck helmholtz_split_check(const CurlComplex& cc, double tol_rank) {
  HelmholtzCheck out;
  out.n_faces = cc.n_faces();
  out.dim_curl = cc.curl_rank();
  const MatrixXd g = dual_gradient_basis(cc, tol_rank);
  out.dim_potential = static_cast<int>(g.cols());
  out.dim_harmonic = out.n_faces - out.dim_potential - out.dim_curl;
  if (out.dim_potential > 0 && out.dim_curl > 0)
    out.ortho_defect = (g.transpose() * cc.basis).cwiseAbs().maxCoeff();
  return out;
}

CurlSubspaceBasis curl_subspace(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                double s, double tol_rank) {
  if (!(s > 0)) throw std::invalid_argument("curl subspace: s must be positive");
  const geo::EikonalField tau = geo::eikonal(cc.box, sigma);
  std::vector<int> inside;
  for (int e = 0; e < cc.n_edges(); ++e) {
    const auto& ends = cc.edge_ends[e];
    if (tau.value[ends[0]] < s && tau.value[ends[1]] < s) inside.push_back(e);
  }
  la::IncrementalBasis ib(cc.n_faces(), cc.curl_rank());
  add_curl_columns(ib, cc.curl, cc.face_weight.cwiseSqrt(), inside, tol_rank);
  return {sigma.name, s, MatrixXd(ib.basis())};
}

SolenoidalFamily solenoidal_family(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                   const std::vector<double>& s_grid, double tol_rank) {
  if (s_grid.empty()) throw std::invalid_argument("solenoidal family: empty s grid");
  for (std::size_t k = 1; k < s_grid.size(); ++k)
    if (!(s_grid[k] > s_grid[k - 1]))
      throw std::invalid_argument("solenoidal family: s grid not ascending");

  const geo::EikonalField tau = geo::eikonal(cc.box, sigma);
  const int ne = cc.n_edges();
  std::vector<double> enter(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& ends = cc.edge_ends[e];
    enter[e] = std::max(tau.value[ends[0]], tau.value[ends[1]]);
  }
  std::vector<int> order(ne);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return enter[a] < enter[b]; });

  la::IncrementalBasis ib(cc.n_faces(), cc.curl_rank());
  const VectorXd sw = cc.face_weight.cwiseSqrt();
  std::vector<int> rank_at;
  std::vector<double> jumps;
  std::vector<int> shell;
  std::size_t next = 0;
  for (double s : s_grid) {
    shell.clear();
    while (next < order.size() && enter[order[next]] < s) shell.push_back(order[next++]);
    const int before = ib.rank();
    add_curl_columns(ib, cc.curl, sw, shell, tol_rank);
    jumps.insert(jumps.end(), static_cast<std::size_t>(ib.rank() - before), s);
    rank_at.push_back(ib.rank());
  }

  SolenoidalFamily out;
  out.face_q = ib.basis();
  out.jump_weight = Eigen::Map<const VectorXd>(jumps.data(), static_cast<Eigen::Index>(jumps.size()));
  out.family.patch = sigma.name;
  out.family.s_grid = s_grid;
  out.family.rank_at_s = std::move(rank_at);
  out.family.q.noalias() = cc.basis.transpose() * out.face_q;
  return out;
}

SolenoidalEikonal solenoidal_eikonal(const SolenoidalFamily& fam) {
  return alg::eikonal_from_family(fam.family);
}

SolenoidalEikonal solenoidal_eikonal(const CurlComplex& cc, const geo::BoundaryPatch& sigma,
                                     const std::vector<double>& s_grid, double tol_rank) {
  return solenoidal_eikonal(solenoidal_family(cc, sigma, s_grid, tol_rank));
}

double CompactnessReport::tail_ratio_at(int k) const {
  const int d = dim();
  if (d == 0) return 0.0;
  k = std::clamp(k, 1, d);
  const double top = singular(0);
  if (!(top > 0)) return 0.0;
  return singular(k - 1) / top;
}

double CompactnessReport::tail_ratio(double frac) const {
  return tail_ratio_at(std::max(1, static_cast<int>(std::floor(frac * dim()))));
}

CompactnessReport noncommutativity_probe(const SolenoidalEikonal& a, const SolenoidalEikonal& b) {
  if (a.mat.rows() != a.mat.cols() || a.mat.rows() != b.mat.rows() ||
      b.mat.rows() != b.mat.cols())
    throw std::invalid_argument("noncommutativity probe: operators must be square and same size");
  // Materialize both products the same way so equal operators cancel
  // bitwise instead of leaving fused-accumulation rounding residue.
  const MatrixXd ab = a.mat * b.mat;
  const MatrixXd ba = b.mat * a.mat;
  const MatrixXd comm = ab - ba;

  CompactnessReport rep;
  rep.label = "commutator(" + a.patch + "," + b.patch + ")";
  rep.singular = la::singular_values(comm);
  const double na = la::spectral_norm(a.mat);
  const double nb = la::spectral_norm(b.mat);
  rep.rel_norm = (na > 0 && nb > 0 && rep.singular.size()) ? rep.singular(0) / (na * nb) : 0.0;
  return rep;
}

CompactnessReport compactness_probe(const CurlComplex& cc, const SolenoidalFamily& fam,
                                    const VectorXd& tau_face) {
  if (fam.face_q.cols() != cc.curl_rank())
    throw std::runtime_error("compactness probe: family does not span the curl range");
  if (tau_face.size() != cc.n_faces())
    throw std::invalid_argument("compactness probe: face sample size mismatch");

  // In the family's own column order the eikonal is diagonal with the jump
  // weights, so the difference against the multiplication operator needs no
  // basis change: rotating the domain by the (orthogonal) coordinate matrix
  // leaves singular values alone.
  MatrixXd d = fam.face_q * fam.jump_weight.asDiagonal();
  for (int c = 0; c < d.cols(); ++c)
    d.col(c).noalias() -= tau_face.cwiseProduct(fam.face_q.col(c));

  CompactnessReport rep;
  rep.label = "eikonal_minus_multiplier(" + fam.family.patch + ")";
  rep.singular = la::singular_values(d);
  return rep;
}

CompactnessReport compactness_probe(const CurlComplex& cc, const VectorXd& f_face,
                                    const std::string& label) {
  if (f_face.size() != cc.n_faces())
    throw std::invalid_argument("compactness probe: face sample size mismatch");
  MatrixXd m(cc.n_faces(), cc.curl_rank());
  for (int c = 0; c < m.cols(); ++c)
    m.col(c).noalias() = f_face.cwiseProduct(cc.basis.col(c));
  // Corestrict to the dual-gradient block: multiplying-then-projecting-back
  // differs from multiplying exactly by the part landing in the complement,
  // so this block carries every nonzero singular value while its minor
  // dimension stays free of the structural zero padding a full-face-space
  // residual would report.
  const MatrixXd g = dual_gradient_basis(cc, 1e-6);
  MatrixXd block;
  block.noalias() = g.transpose() * m;

  CompactnessReport rep;
  rep.label = label;
  rep.singular = la::singular_values(block);
  return rep;
}

std::pair<double, double> calkin_isometry_probe(const CurlComplex& cc, const VectorXd& f_face,
                                                int burn_in) {
  if (f_face.size() != cc.n_faces())
    throw std::invalid_argument("calkin probe: face sample size mismatch");
  if (burn_in < 1) throw std::invalid_argument("calkin probe: burn-in must be at least 1");
  MatrixXd m(cc.n_faces(), cc.curl_rank());
  for (int c = 0; c < m.cols(); ++c)
    m.col(c).noalias() = f_face.cwiseProduct(cc.basis.col(c));
  MatrixXd y;
  y.noalias() = cc.basis.transpose() * m;
  const VectorXd s = la::singular_values(y);
  const double fmax = f_face.size() ? f_face.cwiseAbs().maxCoeff() : 0.0;
  if (s.size() == 0) return {fmax, 0.0};
  const int k = std::min<int>(burn_in, static_cast<int>(s.size()));
  return {fmax, s(k - 1)};
}

VectorXd sample_on_faces(const CurlComplex& cc,
                         const std::function<double(double, double, double)>& f) {
  VectorXd out(cc.n_faces());
  for (int i = 0; i < cc.n_faces(); ++i)
    out(i) = f(cc.face_center(i, 0), cc.face_center(i, 1), cc.face_center(i, 2));
  return out;
}

VectorXd field_on_faces(const CurlComplex& cc, const std::vector<double>& vertex_value) {
  if (static_cast<int>(vertex_value.size()) != cc.n_vertices())
    throw std::invalid_argument("field_on_faces: vertex sample size mismatch");
  const Layout L(cc.box.grid.n);
  VectorXd out(cc.n_faces());
  auto mean4 = [&](int a, int b, int c, int d) {
    return 0.25 * (vertex_value[a] + vertex_value[b] + vertex_value[c] + vertex_value[d]);
  };
  for (int k = 0; k + 1 < L.nz; ++k)
    for (int j = 0; j + 1 < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i)
        out(L.xf(i, j, k)) = mean4(L.vid(i, j, k), L.vid(i, j + 1, k), L.vid(i, j, k + 1),
                                   L.vid(i, j + 1, k + 1));
  for (int k = 0; k + 1 < L.nz; ++k)
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i + 1 < L.nx; ++i)
        out(L.yf(i, j, k)) = mean4(L.vid(i, j, k), L.vid(i + 1, j, k), L.vid(i, j, k + 1),
                                   L.vid(i + 1, j, k + 1));
  for (int k = 0; k < L.nz; ++k)
    for (int j = 0; j + 1 < L.ny; ++j)
      for (int i = 0; i + 1 < L.nx; ++i)
        out(L.zf(i, j, k)) = mean4(L.vid(i, j, k), L.vid(i + 1, j, k), L.vid(i, j + 1, k),
                                   L.vid(i + 1, j + 1, k));
  return out;
}

std::vector<double> saturating_s_grid(const geo::EikonalField& tau, double step) {
  if (!(step > 0)) throw std::invalid_argument("s grid: step must be positive");
  double mx = 0.0;
  for (double v : tau.value) mx = std::max(mx, v);
  const int m = std::max(1, static_cast<int>(std::ceil(mx / step)));
  return geo::uniform_s_grid(step * (m + 2), m + 3);
}

}  // namespace bcml::sol
