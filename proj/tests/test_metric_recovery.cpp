#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bcml/metric_recovery.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace alg = bcml::alg;
namespace rec = bcml::rec;

namespace {

// Interval [0,1] sampled uniformly; coordinates are the exact distances to
// the two endpoints.
alg::SpectrumCloud interval_cloud(int n) {
  alg::SpectrumCloud c;
  c.patch_names = {"left", "right"};
  c.tau.resize(n, 2);
  c.weight = VectorXd::Ones(n);
  c.boundary.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / (n - 1);
    c.tau(i, 0) = x;
    c.tau(i, 1) = 1.0 - x;
  }
  c.boundary.front() = 1;
  c.boundary.back() = 1;
  return c;
}

double seg_dist(double x, double y, double px, double lo, double hi, bool vertical) {
  // Distance from (x, y) to the segment {px} x [lo, hi] (vertical) or
  // [lo, hi] x {px} (horizontal).
  const double along = vertical ? y : x;
  const double across = vertical ? x - px : y - px;
  const double t = std::clamp(along, lo, hi);
  return std::hypot(across, along - t);
}

// Unit square sampled on an nx * nx grid; 12 patches: 4 full sides plus both
// halves of each side. All values are exact Euclidean distances.
struct SquareCloud {
  alg::SpectrumCloud cloud;
  int nx = 0;
  double h = 0;
  int id(int ix, int iy) const { return iy * nx + ix; }
};

SquareCloud square_cloud(int nx) {
  SquareCloud sq;
  sq.nx = nx;
  sq.h = 1.0 / (nx - 1);
  auto& c = sq.cloud;
  c.patch_names = {"left",    "right",    "bottom",    "top",    "left_lo",   "left_hi",
                   "right_lo", "right_hi", "bottom_lo", "bottom_hi", "top_lo", "top_hi"};
  const int n = nx * nx;
  c.tau.resize(n, 12);
  c.weight = VectorXd::Ones(n);
  c.boundary.assign(static_cast<std::size_t>(n), 0);
  for (int iy = 0; iy < nx; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double x = ix * sq.h, y = iy * sq.h;
      const int i = sq.id(ix, iy);
      c.tau(i, 0) = x;
      c.tau(i, 1) = 1.0 - x;
      c.tau(i, 2) = y;
      c.tau(i, 3) = 1.0 - y;
      c.tau(i, 4) = seg_dist(x, y, 0.0, 0.0, 0.5, true);
      c.tau(i, 5) = seg_dist(x, y, 0.0, 0.5, 1.0, true);
      c.tau(i, 6) = seg_dist(x, y, 1.0, 0.0, 0.5, true);
      c.tau(i, 7) = seg_dist(x, y, 1.0, 0.5, 1.0, true);
      c.tau(i, 8) = seg_dist(x, y, 0.0, 0.0, 0.5, false);
      c.tau(i, 9) = seg_dist(x, y, 0.0, 0.5, 1.0, false);
      c.tau(i, 10) = seg_dist(x, y, 1.0, 0.0, 0.5, false);
      c.tau(i, 11) = seg_dist(x, y, 1.0, 0.5, 1.0, false);
      if (ix == 0 || iy == 0 || ix == nx - 1 || iy == nx - 1)
        c.boundary[static_cast<std::size_t>(i)] = 1;
    }
  }
  return sq;
}

}  // namespace

TEST_CASE("1D charts use the distance coordinate and break ties by catalog order") {
  auto c = interval_cloud(9);

  SUBCASE("single-patch catalog") {
    alg::SpectrumCloud one = c;
    one.patch_names = {"left"};
    one.tau = MatrixXd(c.tau.col(0));
    const auto chart = rec::build_chart(one, 4, 5, 1, 25.0);
    REQUIRE(chart.valid);
    CHECK(chart.coord_patches == std::vector<int>{0});
    CHECK(chart.cond == doctest::Approx(1.0));
    CHECK(chart.members.front() == 4);
    // Chart coordinates are the left distances of the members.
    for (std::size_t i = 0; i < chart.members.size(); ++i)
      CHECK(chart.coords(static_cast<long>(i), 0) ==
            doctest::Approx(one.tau(chart.members[i], 0)));
  }
  SUBCASE("two candidates tie, first catalog id wins") {
    const auto chart = rec::build_chart(c, 4, 5, 1, 25.0);
    REQUIRE(chart.valid);
    CHECK(chart.coord_patches == std::vector<int>{0});
  }
  SUBCASE("preconditions rejected") {
    CHECK_THROWS_AS(rec::build_chart(c, -1, 5, 1, 25.0), std::invalid_argument);
    CHECK_THROWS_AS(rec::build_chart(c, 4, 100, 1, 25.0), std::invalid_argument);
    CHECK_THROWS_AS(rec::build_chart(c, 4, 5, 3, 25.0), std::invalid_argument);
  }
}

TEST_CASE("gradient estimates are exact on affine data") {
  auto c = interval_cloud(9);
  const auto chart = rec::build_chart(c, 4, 5, 1, 25.0);
  REQUIRE(chart.valid);

  const int k = static_cast<int>(chart.members.size());
  VectorXd own(k), affine(k);
  for (int i = 0; i < k; ++i) {
    const double x = c.tau(chart.members[static_cast<std::size_t>(i)], 0);
    own(i) = x;
    affine(i) = 7.0 - 3.25 * x;
  }
  CHECK(rec::estimate_gradients(chart, own)(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec::estimate_gradients(chart, affine)(0) == doctest::Approx(-3.25).epsilon(1e-12));

  SUBCASE("degenerate neighborhood is an error naming the anchor") {
    rec::Chart flat = chart;
    flat.coords.setZero();
    CHECK_THROWS_WITH_AS(rec::estimate_gradients(flat, own),
                         doctest::Contains("anchor 4"), std::runtime_error);
  }
}

TEST_CASE("metric solve recovers planted tensors and flags failures") {
  SUBCASE("1D unit gradient in either direction") {
    MatrixXd g(2, 1);
    g << 1.0, -1.0;
    const auto m = rec::solve_metric(g);
    REQUIRE(m.has_value());
    CHECK(m->g(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m->residual == doctest::Approx(0.0));
    CHECK(m->positive_definite);
  }
  SUBCASE("planted positive definite tensor") {
    MatrixXd gt(2, 2);
    gt << 1.5, 0.4, 0.4, 0.8;
    const std::vector<std::pair<double, double>> dirs = {
        {1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}};
    MatrixXd rows(static_cast<long>(dirs.size()), 2);
    for (std::size_t r = 0; r < dirs.size(); ++r) {
      Eigen::Vector2d u(dirs[r].first, dirs[r].second);
      rows.row(static_cast<long>(r)) = (u / std::sqrt(u.dot(gt * u))).transpose();
    }
    const auto m = rec::solve_metric(rows);
    REQUIRE(m.has_value());
    CHECK((m->g - gt).norm() < 1e-10);
    CHECK(m->positive_definite);
    CHECK(m->residual < 1e-12);
  }
  SUBCASE("indefinite solution is flagged, not hidden") {
    MatrixXd gt(2, 2);
    gt << 2.0, 0.0, 0.0, -1.0;
    const std::vector<std::pair<double, double>> dirs = {{1, 0}, {1, 0.5}, {1, -0.5}, {1, 0.9}};
    MatrixXd rows(static_cast<long>(dirs.size()), 2);
    for (std::size_t r = 0; r < dirs.size(); ++r) {
      Eigen::Vector2d u(dirs[r].first, dirs[r].second);
      rows.row(static_cast<long>(r)) = (u / std::sqrt(u.dot(gt * u))).transpose();
    }
    const auto m = rec::solve_metric(rows);
    REQUIRE(m.has_value());
    CHECK((m->g - gt).norm() < 1e-8);
    CHECK_FALSE(m->positive_definite);
  }
  SUBCASE("parallel gradients are rank deficient") {
    MatrixXd rows(4, 2);
    for (int r = 0; r < 4; ++r) rows.row(r) << 1.0, 0.0;
    CHECK_FALSE(rec::solve_metric(rows).has_value());
  }
}

TEST_CASE("flat square charts pick perpendicular sides with unit conditioning") {
  const auto sq = square_cloud(11);
  const int anchor = sq.id(5, 5);
  const auto chart = rec::build_chart(sq.cloud, anchor, 12, 2, 25.0);
  REQUIRE(chart.valid);
  CHECK(chart.coord_patches == std::vector<int>{0, 2});  // left and bottom
  CHECK(std::abs(chart.cond - 1.0) <= 0.2);

  // Chart coordinates equal (x, y), so side gradients are unit vectors.
  const int k = static_cast<int>(chart.members.size());
  VectorXd vals(k);
  auto patch_values = [&](int p) {
    for (int i = 0; i < k; ++i) vals(i) = sq.cloud.tau(chart.members[static_cast<std::size_t>(i)], p);
    return vals;
  };
  const Eigen::Vector2d gl = rec::estimate_gradients(chart, patch_values(0));
  const Eigen::Vector2d gr = rec::estimate_gradients(chart, patch_values(1));
  const Eigen::Vector2d gb = rec::estimate_gradients(chart, patch_values(2));
  CHECK((gl - Eigen::Vector2d(1, 0)).norm() < 1e-10);
  CHECK((gr - Eigen::Vector2d(-1, 0)).norm() < 1e-10);
  CHECK((gb - Eigen::Vector2d(0, 1)).norm() < 1e-10);

  SUBCASE("curved half-side gradient matches the analytic direction") {
    const int a2 = sq.id(3, 7);  // (0.3, 0.7), upper shadow of the lower-left half side
    const auto ch2 = rec::build_chart(sq.cloud, a2, 12, 2, 25.0);
    REQUIRE(ch2.valid);
    const int k2 = static_cast<int>(ch2.members.size());
    VectorXd v2(k2);
    for (int i = 0; i < k2; ++i) v2(i) = sq.cloud.tau(ch2.members[static_cast<std::size_t>(i)], 4);
    const Eigen::Vector2d got = rec::estimate_gradients(ch2, v2);
    const Eigen::Vector2d want = Eigen::Vector2d(0.3, 0.2).normalized();
    CHECK((got - want).norm() < 0.1);
  }
}

TEST_CASE("flat square metric field is the identity away from the boundary") {
  const auto sq = square_cloud(11);
  const auto field = rec::recover_metric_field(sq.cloud, 2, 12, 25.0);
  CHECK(field.unchartable.empty());
  CHECK(field.excluded.empty());
  REQUIRE(static_cast<int>(field.point_ids.size()) == sq.nx * sq.nx);

  int n_interior = 0;
  for (std::size_t r = 0; r < field.point_ids.size(); ++r) {
    const int id = field.point_ids[r];
    const double x = sq.cloud.tau(id, 0), y = sq.cloud.tau(id, 2);
    if (std::min({x, 1 - x, y, 1 - y}) < 0.25) continue;
    ++n_interior;
    CHECK(field.metric[r].positive_definite);
    CHECK((field.metric[r].g - MatrixXd::Identity(2, 2)).norm() <= 0.1);
    // Coordinate patches have unit gradients, so their diagonal entries sit
    // at one up to the recorded residual scale.
    CHECK(std::abs(field.metric[r].g(0, 0) - 1.0) <= 0.05);
    CHECK(std::abs(field.metric[r].g(1, 1) - 1.0) <= 0.05);
  }
  CHECK(n_interior >= 25);
}

TEST_CASE("interval cloud assembles into an isometric copy") {
  const int n = 21;
  const double h = 1.0 / (n - 1);
  const auto c = interval_cloud(n);
  const auto field = rec::recover_metric_field(c, 1, 5, 25.0);
  REQUIRE(static_cast<int>(field.point_ids.size()) == n);

  const auto copy = rec::assemble_copy(c, field, 0, 1.5, 1.5 * h);
  REQUIRE(copy.n_points() == n);

  int n_boundary = 0;
  for (int i = 0; i < n; ++i) n_boundary += copy.boundary[static_cast<std::size_t>(i)];
  CHECK(n_boundary == 2);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double want = std::abs(c.tau(copy.cloud_ids[static_cast<std::size_t>(i)], 0) -
                                   c.tau(copy.cloud_ids[static_cast<std::size_t>(j)], 0));
      CHECK(std::abs(copy.dist(i, j) - want) <= 3 * h);
    }
  }

  SUBCASE("boundary incidence names the endpoint patches") {
    for (int i = 0; i < n; ++i) {
      const auto& inc = copy.patch_incidence[static_cast<std::size_t>(i)];
      if (!copy.boundary[static_cast<std::size_t>(i)]) {
        CHECK(inc.empty());
      } else {
        REQUIRE(inc.size() == 1);
        const double x = copy.tau(i, 0);
        CHECK(inc[0] == (x < 0.5 ? 0 : 1));
      }
    }
  }
}

TEST_CASE("flat square copy reproduces distances and diameter") {
  const auto sq = square_cloud(11);
  const auto field = rec::recover_metric_field(sq.cloud, 2, 12, 25.0);
  // Eight neighbors keep every grid diagonal even when metric noise reorders
  // equal-length candidates.
  const auto copy = rec::assemble_copy(sq.cloud, field, 8, 1.8, 0.5 * sq.h);
  REQUIRE(copy.n_points() == sq.nx * sq.nx);

  const double diam = copy.dist.maxCoeff();
  CHECK(std::abs(diam - std::sqrt(2.0)) <= 0.1 * std::sqrt(2.0));

  // Sampled pairs: the eight-neighbor graph overshoots oblique distances by
  // up to 8%, and boundary-area metric noise adds a couple percent each way.
  for (int i = 0; i < copy.n_points(); i += 7) {
    for (int j = 0; j < copy.n_points(); j += 11) {
      const double dx = copy.tau(i, 0) - copy.tau(j, 0);
      const double dy = copy.tau(i, 2) - copy.tau(j, 2);
      const double want = std::hypot(dx, dy);
      if (want < 0.5) continue;
      CHECK(copy.dist(i, j) <= want * 1.12);
      CHECK(copy.dist(i, j) >= want * 0.97);
    }
  }

  SUBCASE("boundary labels and incidence survive the copy") {
    for (int i = 0; i < copy.n_points(); ++i) {
      const bool on_edge =
          sq.cloud.boundary[static_cast<std::size_t>(copy.cloud_ids[static_cast<std::size_t>(i)])] != 0;
      CHECK(static_cast<bool>(copy.boundary[static_cast<std::size_t>(i)]) == on_edge);
      CHECK(copy.patch_incidence[static_cast<std::size_t>(i)].empty() == !on_edge);
    }
  }
}

TEST_CASE("degenerate tuple variation is reported unchartable") {
  // Tuples vary along one direction only; a 2D chart cannot exist.
  auto c = interval_cloud(12);
  const auto chart = rec::build_chart(c, 6, 6, 2, 25.0);
  CHECK_FALSE(chart.valid);

  const auto field = rec::recover_metric_field(c, 2, 6, 25.0);
  CHECK(field.point_ids.empty());
  CHECK(static_cast<int>(field.unchartable.size()) == 12);
  CHECK_THROWS_AS(rec::assemble_copy(c, field, 0, 1.5, 0.05), std::runtime_error);
}

TEST_CASE("far-apart clusters fail assembly with a disconnected graph") {
  alg::SpectrumCloud c;
  c.patch_names = {"left", "right"};
  const std::vector<double> xs = {0.0, 0.05, 0.1, 0.15, 5.0, 5.05, 5.1, 5.15};
  const int n = static_cast<int>(xs.size());
  c.tau.resize(n, 2);
  c.weight = VectorXd::Ones(n);
  c.boundary.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    c.tau(i, 0) = xs[static_cast<std::size_t>(i)];
    c.tau(i, 1) = 5.15 - xs[static_cast<std::size_t>(i)];
  }
  const auto field = rec::recover_metric_field(c, 1, 4, 25.0);
  REQUIRE(static_cast<int>(field.point_ids.size()) == n);
  CHECK_THROWS_WITH_AS(rec::assemble_copy(c, field, 0, 1.5, 0.01),
                       doctest::Contains("disconnected"), std::runtime_error);
}
