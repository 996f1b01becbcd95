#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "bcml/geometry.hpp"
#include "bcml/linalg.hpp"
#include "bcml/solenoidal.hpp"

using bcml::sol::CurlComplex;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace geo = bcml::geo;
namespace la = bcml::la;
namespace sol = bcml::sol;

namespace {

const geo::BoundaryPatch& find_patch(const std::vector<geo::BoundaryPatch>& cat,
                                     const std::string& name) {
  for (const auto& p : cat)
    if (p.name == name) return p;
  REQUIRE_MESSAGE(false, "patch not found: ", name);
  static geo::BoundaryPatch dummy;
  return dummy;
}

int dense_rank(const MatrixXd& a, double rel_tol = 1e-10) {
  const VectorXd s = la::singular_values(a);
  if (s.size() == 0 || !(s(0) > 0)) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

}  // namespace

TEST_CASE("curl complex satisfies the exactness identities exactly") {
  for (auto dims : {std::array<int, 3>{3, 3, 3}, {4, 3, 5}, {5, 4, 4}}) {
    const CurlComplex cc = sol::build_curl_complex(dims[0], dims[1], dims[2]);
    const MatrixXd cg = MatrixXd(cc.curl) * MatrixXd(cc.grad);
    const MatrixXd dc = MatrixXd(cc.div) * MatrixXd(cc.curl);
    CHECK(cg.cwiseAbs().maxCoeff() == 0.0);
    CHECK(dc.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(sol::build_curl_complex(2, 4, 4), std::invalid_argument);
}

TEST_CASE("discrete operators reproduce polynomial calculus") {
  // Asymmetric grid so every index map is exercised.
  const CurlComplex cc = sol::build_curl_complex(4, 5, 6);
  const int nv = cc.n_vertices(), ne = cc.n_edges(), nf = cc.n_faces(), ncell = cc.n_cells();

  // Gradient circulations of an affine potential.
  VectorXd phi(nv);
  for (int v = 0; v < nv; ++v) {
    const auto& x = cc.box.vertices[v];
    phi(v) = x[0] + 2.0 * x[1] + 3.0 * x[2];
  }
  const VectorXd gphi = cc.grad * phi;
  for (int e = 0; e < ne; ++e) {
    const auto& a = cc.box.vertices[cc.edge_ends[e][0]];
    const auto& b = cc.box.vertices[cc.edge_ends[e][1]];
    const double want = (b[0] - a[0]) + 2.0 * (b[1] - a[1]) + 3.0 * (b[2] - a[2]);
    CHECK(std::abs(gphi(e) - want) <= 1e-14);
  }

  // Circulations of the field (0, 0, x y); its curl is (x, -y, 0). Fluxes of
  // that curl through grid faces are exact integrals, so the comparison pins
  // both the loop orientations and the index layout.
  VectorXd circ = VectorXd::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& a = cc.box.vertices[cc.edge_ends[e][0]];
    const auto& b = cc.box.vertices[cc.edge_ends[e][1]];
    if (a[0] == b[0] && a[1] == b[1])  // z edge
      circ(e) = a[0] * a[1] * (b[2] - a[2]);
  }
  const VectorXd flux = cc.curl * circ;
  const double hx = cc.box.grid.h[0], hy = cc.box.grid.h[1], hz = cc.box.grid.h[2];
  for (int f = 0; f < nf; ++f) {
    const double cx = cc.face_center(f, 0), cy = cc.face_center(f, 1);
    double want = 0.0;
    // Face type from the center: an x face sits on a vertex plane in x.
    const double rx = std::abs(std::round(cx / hx) * hx - cx);
    const double ry = std::abs(std::round(cy / hy) * hy - cy);
    if (rx <= 1e-12)
      want = cx * hy * hz;  // integral of x over the face
    else if (ry <= 1e-12)
      want = -cy * hx * hz;  // integral of -y
    else
      want = 0.0;
    CHECK(std::abs(flux(f) - want) <= 1e-14);
  }

  // Outward flux integrals of (x, y, z): divergence 3 over each cell.
  VectorXd u(nf);
  for (int f = 0; f < nf; ++f) {
    const double cx = cc.face_center(f, 0), cy = cc.face_center(f, 1);
    const double rx = std::abs(std::round(cx / hx) * hx - cx);
    const double ry = std::abs(std::round(cy / hy) * hy - cy);
    if (rx <= 1e-12)
      u(f) = cx * hy * hz;
    else if (ry <= 1e-12)
      u(f) = cy * hx * hz;
    else
      u(f) = cc.face_center(f, 2) * hx * hy;
  }
  const VectorXd div_u = cc.div * u;
  for (int c = 0; c < ncell; ++c) CHECK(std::abs(div_u(c) - 3.0 * hx * hy * hz) <= 1e-14);
}

TEST_CASE("curl range rank matches the dense oracle and the loop count") {
  for (auto dims : {std::array<int, 3>{3, 3, 3}, {4, 3, 5}, {4, 4, 4}}) {
    const CurlComplex cc = sol::build_curl_complex(dims[0], dims[1], dims[2]);
    const int oracle = dense_rank(MatrixXd(cc.curl));
    CHECK(cc.curl_rank() == oracle);
    CHECK(cc.curl_rank() == cc.n_edges() - cc.n_vertices() + 1);
    // Rank-nullity on the face side.
    const int ker_ct = cc.n_faces() - dense_rank(MatrixXd(cc.curl).transpose());
    CHECK(cc.curl_rank() + ker_ct == cc.n_faces());
    // Basis columns orthonormal and inside the weighted curl range.
    const MatrixXd gram = cc.basis.transpose() * cc.basis;
    CHECK((gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("face space splits into potentials, curls and nothing else") {
  for (auto dims : {std::array<int, 3>{4, 4, 4}, {4, 5, 4}}) {
    const CurlComplex cc = sol::build_curl_complex(dims[0], dims[1], dims[2]);
    const auto hc = sol::helmholtz_split_check(cc);
    CHECK(hc.n_faces == cc.n_faces());
    CHECK(hc.dim_potential == cc.n_cells());
    CHECK(hc.dim_curl == cc.curl_rank());
    CHECK(hc.dim_harmonic == 0);
    CHECK(hc.ortho_defect <= 1e-10);
  }
}

TEST_CASE("curl subspaces grow with s, saturate, and stay nested") {
  const CurlComplex cc = sol::build_curl_complex(5, 5, 5);
  const auto cat = geo::patch_catalog(cc.box);
  const auto& sigma = find_patch(cat, "x_lo");
  const double h = cc.box.grid.h[0];

  // Thin slab: only the 2 * 4 * 5 wall edges generate. Each contributes an
  // independent curl: a gradient supported on wall edges alone would need a
  // potential that is constant off the wall and hence constant everywhere.
  const auto thin = sol::curl_subspace(cc, sigma, 0.5 * h);
  CHECK(thin.dim() == 40);

  const auto half = sol::curl_subspace(cc, sigma, 0.5);
  const auto full = sol::curl_subspace(cc, sigma, 4.0);
  CHECK(full.dim() == cc.curl_rank());
  CHECK(thin.dim() < half.dim());
  CHECK(half.dim() < full.dim());

  // Nestedness via projection residual.
  auto contained = [](const MatrixXd& small, const MatrixXd& big) {
    const MatrixXd resid = small - big * (big.transpose() * small);
    return resid.cwiseAbs().maxCoeff();
  };
  CHECK(contained(thin.basis, half.basis) <= 1e-10);
  CHECK(contained(half.basis, full.basis) <= 1e-10);

  CHECK_THROWS_AS(sol::curl_subspace(cc, sigma, 0.0), std::invalid_argument);

  // A patch so small its neighborhood holds no full edge: legal, dimension 0.
  geo::BoundaryPatch corner{"corner", {0}};
  CHECK(sol::curl_subspace(cc, corner, 0.5 * h).dim() == 0);
}

TEST_CASE("solenoidal family saturates and reproduces the stepwise integral") {
  const CurlComplex cc = sol::build_curl_complex(4, 4, 4);
  const auto cat = geo::patch_catalog(cc.box);
  const auto& sigma = find_patch(cat, "x_lo");
  const auto tau = geo::eikonal(cc.box, sigma);
  const auto s_grid = sol::saturating_s_grid(tau, cc.box.grid.h[0] / 4.0);

  const auto fam = sol::solenoidal_family(cc, sigma, s_grid);
  fam.family.validate();
  CHECK(fam.family.total_rank() == cc.curl_rank());
  CHECK(fam.family.rank_at_s.front() == 0);
  CHECK(fam.jump_weight.size() == cc.curl_rank());
  CHECK(fam.jump_weight.minCoeff() > 0.0);

  // Face-space columns stay inside the curl range.
  const MatrixXd resid = fam.face_q - cc.basis * (cc.basis.transpose() * fam.face_q);
  CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10);

  // Final projection is the identity on the curl range.
  const int last = static_cast<int>(s_grid.size()) - 1;
  const MatrixXd p_last = fam.family.projection(last);
  CHECK((p_last - MatrixXd::Identity(p_last.rows(), p_last.cols())).cwiseAbs().maxCoeff() <=
        1e-12);

  // Independent oracle: sum the materialized projection increments.
  const auto eik = sol::solenoidal_eikonal(fam);
  MatrixXd stepwise = MatrixXd::Zero(p_last.rows(), p_last.cols());
  MatrixXd prev = MatrixXd::Zero(p_last.rows(), p_last.cols());
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const MatrixXd pk = fam.family.projection(static_cast<int>(k));
    stepwise += s_grid[k] * (pk - prev);
    prev = pk;
  }
  CHECK((eik.mat - stepwise).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("solenoidal eikonal is symmetric with spectrum matching the distance field") {
  const CurlComplex cc = sol::build_curl_complex(6, 6, 6);
  const auto cat = geo::patch_catalog(cc.box);
  const auto& sigma = find_patch(cat, "y_lo");
  const auto tau = geo::eikonal(cc.box, sigma);
  const double step = cc.box.grid.h[1] / 4.0;
  const auto s_grid = sol::saturating_s_grid(tau, step);

  const auto eik = sol::solenoidal_eikonal(cc, sigma, s_grid);
  CHECK(la::frobenius_relative_asymmetry(eik.mat) <= 1e-10);

  double tau_max = 0.0;
  for (double v : tau.value) tau_max = std::max(tau_max, v);

  MatrixXd work = eik.mat;
  const VectorXd eig = la::sym_eig_inplace(work);
  CHECK(eig.minCoeff() >= -step);
  CHECK(eig.maxCoeff() <= tau_max + step + 1e-12);
  // The norm sits in the first grid interval past the farthest vertex.
  CHECK(eig.maxCoeff() >= tau_max - 1e-12);
}

TEST_CASE("adjacent-face eikonals genuinely fail to commute; equal ones do not") {
  const CurlComplex cc = sol::build_curl_complex(6, 6, 6);
  const auto cat = geo::patch_catalog(cc.box);
  const auto& pa = find_patch(cat, "x_lo");
  const auto& pb = find_patch(cat, "y_lo");
  const double step = cc.box.grid.h[0] / 4.0;
  const auto ga = sol::saturating_s_grid(geo::eikonal(cc.box, pa), step);
  const auto gb = sol::saturating_s_grid(geo::eikonal(cc.box, pb), step);

  const auto ea = sol::solenoidal_eikonal(cc, pa, ga);
  const auto eb = sol::solenoidal_eikonal(cc, pb, gb);

  const auto cross = sol::noncommutativity_probe(ea, eb);
  CHECK(cross.rel_norm > 0.01);
  CHECK(cross.dim() == cc.curl_rank());

  const auto self = sol::noncommutativity_probe(ea, ea);
  CHECK(self.rel_norm == 0.0);
  CHECK(self.norm() <= 1e-14);

  // Contrast: diagonal operators (exact scalar cutoff eikonals lifted to a
  // diagonal) commute exactly in floating point as well.
  bcml::alg::OperatorEikonal da{"d1", VectorXd::LinSpaced(40, 0.0, 1.0).asDiagonal()};
  bcml::alg::OperatorEikonal db{"d2", VectorXd::LinSpaced(40, 1.0, 3.0).asDiagonal()};
  const auto diag_probe = sol::noncommutativity_probe(da, db);
  CHECK(diag_probe.norm() == 0.0);
  CHECK(diag_probe.rel_norm == 0.0);

  bcml::alg::OperatorEikonal bad{"bad", MatrixXd::Zero(3, 4)};
  CHECK_THROWS_AS(sol::noncommutativity_probe(da, bad), std::invalid_argument);
}

TEST_CASE("multiplication probes: constants vanish, distance gap stays bounded") {
  const CurlComplex cc = sol::build_curl_complex(5, 5, 5);
  const auto cat = geo::patch_catalog(cc.box);
  const auto& sigma = find_patch(cat, "z_hi");
  const auto tau = geo::eikonal(cc.box, sigma);
  const double step = cc.box.grid.h[2] / 4.0;
  const auto s_grid = sol::saturating_s_grid(tau, step);
  const auto fam = sol::solenoidal_family(cc, sigma, s_grid);

  const VectorXd tau_face = sol::field_on_faces(cc, tau.value);
  const auto gap = sol::compactness_probe(cc, fam, tau_face);
  CHECK(gap.dim() == cc.curl_rank());
  CHECK(gap.norm() > 0.0);
  CHECK(gap.norm() <= 2.0 * (1.0 + step) + 1e-12);
  CHECK(gap.tail_ratio(0.5) < 1.0);
  CHECK(gap.label == "eikonal_minus_multiplier(z_hi)");

  // Multiplying by a constant commutes with the projection exactly.
  const VectorXd ones = VectorXd::Constant(cc.n_faces(), 3.25);
  const auto const_gap = sol::compactness_probe(cc, ones);
  CHECK(const_gap.norm() <= 1e-12);

  const VectorXd f = sol::sample_on_faces(
      cc, [](double x, double y, double) { return x * x + 0.5 * y; });
  const auto fgap = sol::compactness_probe(cc, f, "multiplier_minus_projected(poly)");
  CHECK(fgap.dim() == cc.n_cells());  // dual-gradient block minor dimension
  CHECK(fgap.norm() > 0.0);
  CHECK(fgap.norm() <= f.cwiseAbs().maxCoeff() + 1e-12);
  CHECK(fgap.label == "multiplier_minus_projected(poly)");

  VectorXd wrong(3);
  CHECK_THROWS_AS(sol::compactness_probe(cc, fam, wrong), std::invalid_argument);
}

TEST_CASE("essential norm estimate brackets the sup norm") {
  const CurlComplex cc = sol::build_curl_complex(6, 6, 6);

  // Constant functions act as that constant on the whole curl range.
  const VectorXd c = VectorXd::Constant(cc.n_faces(), -2.5);
  for (int k : {1, 5, 20}) {
    const auto [fmax, est] = sol::calkin_isometry_probe(cc, c, k);
    CHECK(fmax == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(std::abs(est - 2.5) <= 1e-12);
  }

  const VectorXd x1 = sol::sample_on_faces(cc, [](double x, double, double) { return x; });
  const auto [fmax, est] = sol::calkin_isometry_probe(cc, x1, 10);
  CHECK(fmax == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(est <= fmax + 1e-8);
  CHECK(est > 0.5);

  CHECK_THROWS_AS(sol::calkin_isometry_probe(cc, x1, 0), std::invalid_argument);
}

TEST_CASE("face sampling agrees with corner averaging for affine fields") {
  const CurlComplex cc = sol::build_curl_complex(4, 5, 3);
  std::vector<double> vert(cc.n_vertices());
  for (int v = 0; v < cc.n_vertices(); ++v) {
    const auto& x = cc.box.vertices[v];
    vert[v] = 2.0 * x[0] - x[1] + 3.0 * x[2] + 0.25;
  }
  const VectorXd averaged = sol::field_on_faces(cc, vert);
  const VectorXd sampled = sol::sample_on_faces(
      cc, [](double x, double y, double z) { return 2.0 * x - y + 3.0 * z + 0.25; });
  CHECK((averaged - sampled).cwiseAbs().maxCoeff() <= 1e-13);

  const geo::EikonalField tau{std::vector<double>(cc.n_vertices(), 0.5)};
  const auto grid = sol::saturating_s_grid(tau, 0.1);
  CHECK(grid.size() == 8);
  CHECK(grid.back() == doctest::Approx(0.7));
  CHECK_THROWS_AS(sol::saturating_s_grid(tau, 0.0), std::invalid_argument);
}
