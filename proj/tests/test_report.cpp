#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcml/geometry.hpp"
#include "bcml/report.hpp"

namespace io = bcml::io;
namespace geo = bcml::geo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("bcml_report_" + std::to_string(std::rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("check relations evaluate and info always passes") {
  CHECK(io::check_passes(1.0, "<", 2.0));
  CHECK_FALSE(io::check_passes(2.0, "<", 2.0));
  CHECK(io::check_passes(2.0, "<=", 2.0));
  CHECK(io::check_passes(3.0, ">", 2.0));
  CHECK(io::check_passes(2.0, ">=", 2.0));
  CHECK(io::check_passes(2.0, "==", 2.0));
  CHECK(io::check_passes(999.0, "info", 0.0));
  CHECK_THROWS_AS(io::check_passes(1.0, "~", 2.0), std::invalid_argument);

  io::ReportBundle b;
  b.add_check("a", "first", 1.0, "<", 2.0);
  CHECK(b.all_pass());
  b.add_check("b", "second", 3.0, "<", 2.0);
  CHECK_FALSE(b.all_pass());
  CHECK(b.checks[1].pass == false);
}

TEST_CASE("content hash pins bytes and changes with them") {
  io::ContentHasher a, b, c;
  a.feed("manifold = interval\n");
  b.feed("manifold = interval\n");
  c.feed("manifold = intervam\n");
  CHECK(a.hex() == b.hex());
  CHECK(a.hex() != c.hex());
  CHECK(a.hex().size() == 8);

  // Chained feeds depend on order.
  io::ContentHasher ab, ba;
  ab.feed("x");
  ab.feed("y");
  ba.feed("y");
  ba.feed("x");
  CHECK(ab.hex() != ba.hex());
}

TEST_CASE("report and manifest render deterministically") {
  io::ReportBundle b;
  b.config_echo = "[manifold]\nkind = interval\n";
  b.input_hash = "deadbeef";
  b.add_check("gap", "relative spectral gap", 0.031, "<", 0.05);
  b.add_check("rank", "saturation rank", 63.0, ">=", 63.0);
  b.note("forward", "synthesized 126 controls");

  const std::string rep = io::render_report(b);
  CHECK(rep.find("gap") != std::string::npos);
  CHECK(rep.find("0.031") != std::string::npos);
  CHECK(rep.find("pass") != std::string::npos);
  CHECK(rep.find("PASS (2/2 checks)") != std::string::npos);
  CHECK(rep.find("[forward] synthesized 126 controls") != std::string::npos);
  CHECK(rep == io::render_report(b));

  const std::string man = io::render_manifest(b);
  CHECK(man.find("deadbeef") != std::string::npos);
  CHECK(man.find("kind = interval") != std::string::npos);

  b.add_check("bad", "deliberately failing", 1.0, "<", 0.5);
  CHECK(io::render_report(b).find("FAIL") != std::string::npos);
}

TEST_CASE("table formatting pads columns and rejects ragged rows") {
  const std::string t = io::format_table({"id", "value"}, {{"a", "1"}, {"longer", "2.5"}});
  CHECK(t.find("id") != std::string::npos);
  CHECK(t.find("longer  2.5") != std::string::npos);
  CHECK_THROWS_AS(io::format_table({"one"}, {{"a", "b"}}), std::invalid_argument);
}

TEST_CASE("eikonal csv lists one row per vertex with dim-matched columns") {
  TempDir td;
  const auto m = geo::build_manifold(geo::ManifoldSpec::interval(5, 1.0));
  const auto cat = geo::patch_catalog(m);
  const auto tau = geo::eikonal(m, cat[0]);
  const std::string path = td.file("tau.csv");
  io::write_eikonal_csv(path, m, tau);
  const std::string text = io::read_text_file(path);
  CHECK(text.rfind("vertex_id,x,tau\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);  // header + 5 vertices
  CHECK(text.find("4,1,1\n") != std::string::npos);        // far endpoint at distance 1

  geo::EikonalField wrong;
  wrong.value = {0.0};
  CHECK_THROWS_AS(io::write_eikonal_csv(path, m, wrong), std::invalid_argument);
}

TEST_CASE("empty cloud gives a header-only csv") {
  TempDir td;
  bcml::alg::SpectrumCloud cloud;
  cloud.patch_names = {"left", "right"};
  cloud.tau.resize(0, 2);
  cloud.weight.resize(0);
  const std::string path = td.file("cloud.csv");
  io::write_cloud_csv(path, cloud);
  CHECK(io::read_text_file(path) == "point_id,boundary_flag,weight,tau_left,tau_right\n");
}

TEST_CASE("cloud csv round-trips values through fixed formatting") {
  TempDir td;
  bcml::alg::SpectrumCloud cloud;
  cloud.patch_names = {"a"};
  cloud.tau.resize(2, 1);
  cloud.tau << 0.25, 0.75;
  cloud.weight.resize(2);
  cloud.weight << 1, 3;
  cloud.boundary = {1, 0};
  const std::string path = td.file("cloud.csv");
  io::write_cloud_csv(path, cloud);
  const std::string text = io::read_text_file(path);
  CHECK(text == "point_id,boundary_flag,weight,tau_a\n0,1,1,0.25\n1,0,3,0.75\n");
  io::write_cloud_csv(path, cloud);
  CHECK(io::read_text_file(path) == text);
}

TEST_CASE("histogram clamps outliers into the end bins") {
  const auto h = io::build_histogram({-1.0, 0.05, 0.15, 0.15, 0.95, 2.0}, 10, 0.0, 1.0);
  CHECK(h.counts.size() == 10);
  CHECK(h.total() == 6);
  CHECK(h.counts[0] == 2);   // -1 clamps down, 0.05 lands here
  CHECK(h.counts[1] == 2);
  CHECK(h.counts[9] == 2);   // 0.95 lands here, 2.0 clamps up
  CHECK_THROWS_AS(io::build_histogram({}, 0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(io::build_histogram({}, 4, 1.0, 1.0), std::invalid_argument);

  TempDir td;
  const std::string path = td.file("hist.csv");
  io::write_histogram_csv(path, h);
  const std::string text = io::read_text_file(path);
  CHECK(text.rfind("bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(text.find("0,0.1,2") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}

TEST_CASE("singular value csv carries ratios against the top value") {
  TempDir td;
  bcml::sol::CompactnessReport rep;
  rep.label = "probe";
  rep.singular.resize(3);
  rep.singular << 4.0, 2.0, 1.0;
  const std::string path = td.file("sv.csv");
  io::write_singular_csv(path, rep);
  CHECK(io::read_text_file(path) == "k,sigma,sigma_over_sigma1\n1,4,1\n2,2,0.5\n3,1,0.25\n");

  bcml::sol::CompactnessReport empty;
  io::write_singular_csv(path, empty);
  CHECK(io::read_text_file(path) == "k,sigma,sigma_over_sigma1\n");
}

TEST_CASE("copy csv joins cloud coordinates with per-point metric entries") {
  TempDir td;
  bcml::alg::SpectrumCloud cloud;
  cloud.patch_names = {"l", "r"};
  cloud.tau.resize(2, 2);
  cloud.tau << 0.0, 1.0, 1.0, 0.0;
  cloud.weight = Eigen::VectorXd::Ones(2);
  cloud.boundary = {1, 1};

  bcml::rec::MetricTensorField field;
  field.point_ids = {1};
  bcml::rec::Chart ch;
  ch.anchor = 1;
  ch.coord_patches = {0};
  field.charts.push_back(ch);
  bcml::rec::MetricSolve ms;
  ms.g.resize(1, 1);
  ms.g << 1.25;
  field.metric.push_back(ms);

  bcml::rec::CopyManifold copy;
  copy.cloud_ids = {1};
  copy.tau.resize(1, 2);
  copy.tau << 1.0, 0.0;
  copy.boundary = {1};

  const std::string path = td.file("copy.csv");
  io::write_copy_csv(path, cloud, copy, field);
  CHECK(io::read_text_file(path) ==
        "point_id,cloud_id,boundary_flag,tau_l,tau_r,coord_patch_0,inv_metric_00\n"
        "0,1,1,1,0,0,1.25\n");
}

TEST_CASE("pgm rasters carry the header and stay in range") {
  TempDir td;
  io::Raster r(32, 16);
  r.disc(5, 5, 2, 0);
  r.line(0, 0, 31, 15, 100);
  r.set(-5, 2, 0);  // silently ignored
  r.set(5, 99, 0);
  const std::string path = td.file("plot.pgm");
  io::write_pgm(path, r);
  const std::string bytes = io::read_text_file(path);
  const std::string header = "P5\n32 16\n255\n";
  CHECK(bytes.rfind(header, 0) == 0);
  CHECK(bytes.size() == header.size() + 32 * 16);
  CHECK_THROWS_AS(io::Raster(0, 4), std::invalid_argument);
}

TEST_CASE("plots handle plain, degenerate, and log-scaled inputs") {
  const auto sc = io::plot_scatter({0.0, 1.0, 0.5}, {0.0, 1.0, 0.2}, 64, 64);
  CHECK(sc.w == 64);
  // Some pixels darkened.
  int dark = 0;
  for (auto p : sc.pix) dark += p != 255;
  CHECK(dark > 0);
  CHECK_THROWS_AS(io::plot_scatter({0.0}, {}, 8, 8), std::invalid_argument);

  // Constant series must not divide by a zero extent.
  const auto flat = io::plot_curve({2.0, 2.0, 2.0}, 32, 32, false);
  CHECK(flat.pix.size() == 32 * 32);
  const auto lg = io::plot_curve({1.0, 1e-4, 0.0}, 32, 32, true);
  CHECK(lg.pix.size() == 32 * 32);
  const auto single = io::plot_curve({1.0}, 32, 32, false);
  CHECK(single.pix.size() == 32 * 32);

  const auto bars = io::plot_bars(io::build_histogram({0.1, 0.2, 0.2}, 4, 0.0, 1.0), 40, 20);
  int shaded = 0;
  for (auto p : bars.pix) shaded += p != 255;
  CHECK(shaded > 0);
}
