#include "bcml/report.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bcml::io {

bool check_passes(double measured, const std::string& relation, double threshold) {
  if (relation == "<") return measured < threshold;
  if (relation == "<=") return measured <= threshold;
  if (relation == ">") return measured > threshold;
  if (relation == ">=") return measured >= threshold;
  if (relation == "==") return measured == threshold;
  if (relation == "info") return true;
  throw std::invalid_argument("check relation must be <, <=, >, >=, == or info: " + relation);
}

bool ReportBundle::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckRow& c) { return c.pass; });
}

CheckRow& ReportBundle::add_check(const std::string& id, const std::string& detail,
                                  double measured, const std::string& relation,
                                  double threshold) {
  checks.push_back({id, detail, measured, relation, threshold,
                    check_passes(measured, relation, threshold)});
  return checks.back();
}

void ReportBundle::note(const std::string& stage, const std::string& text) {
  notes.push_back({stage, text});
}

void ContentHasher::feed(const std::string& bytes) {
  if (!any_) crc_ = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  any_ = true;
  crc_ = static_cast<std::uint32_t>(
      crc32(crc_, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void ContentHasher::feed_file(const std::string& path) { feed(read_text_file(path)); }

std::string ContentHasher::hex() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc_);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  const std::size_t nc = header.size();
  std::vector<std::size_t> width(nc);
  for (std::size_t c = 0; c < nc; ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    if (r.size() != nc) throw std::invalid_argument("table row width mismatch");
    for (std::size_t c = 0; c < nc; ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < nc; ++c) {
      out << r[c];
      if (c + 1 < nc) out << std::string(width[c] - r[c].size() + 2, ' ');
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < nc; ++c) total += width[c] + (c + 1 < nc ? 2 : 0);
  out << std::string(total, '-') << '\n';
  for (const auto& r : rows) emit(r);
  return out.str();
}

std::string render_manifest(const ReportBundle& b) {
  std::ostringstream out;
  out << "# run manifest\n";
  out << "input_hash = " << b.input_hash << "\n\n";
  out << "## effective config\n" << b.config_echo;
  if (!b.config_echo.empty() && b.config_echo.back() != '\n') out << '\n';
  return out.str();
}

std::string render_report(const ReportBundle& b) {
  std::ostringstream out;
  out << "# run report\n";
  out << "input_hash = " << b.input_hash << "\n\n";

  out << "## checks\n";
  std::vector<std::vector<std::string>> rows;
  int passed = 0;
  for (const auto& c : b.checks) {
    rows.push_back({c.id, fmt(c.measured), c.relation, fmt(c.threshold),
                    c.pass ? "pass" : "FAIL", c.detail});
    if (c.pass) ++passed;
  }
  out << format_table({"id", "measured", "relation", "threshold", "verdict", "detail"}, rows);
  out << "\nsummary: " << (b.all_pass() ? "PASS" : "FAIL") << " (" << passed << "/"
      << b.checks.size() << " checks)\n";

  if (!b.notes.empty()) {
    out << "\n## notes\n";
    for (const auto& n : b.notes) {
      out << "[" << n.stage << "] " << n.text;
      if (n.text.empty() || n.text.back() != '\n') out << '\n';
    }
  }
  return out.str();
}

void write_eikonal_csv(const std::string& path, const geo::DiscreteManifold& m,
                       const geo::EikonalField& tau) {
  if (static_cast<int>(tau.value.size()) != m.n_vertices())
    throw std::invalid_argument("eikonal csv: field size does not match manifold");
  static const char* axis[3] = {"x", "y", "z"};
  std::ostringstream out;
  out << "vertex_id";
  for (int a = 0; a < m.dim; ++a) out << ',' << axis[a];
  out << ",tau\n";
  for (int v = 0; v < m.n_vertices(); ++v) {
    out << v;
    for (int a = 0; a < m.dim; ++a) out << ',' << fmt(m.vertices[v][a]);
    out << ',' << fmt(tau.value[v]) << '\n';
  }
  write_text_file(path, out.str());
}

void write_cloud_csv(const std::string& path, const alg::SpectrumCloud& cloud) {
  std::ostringstream out;
  out << "point_id,boundary_flag,weight";
  for (const auto& p : cloud.patch_names) out << ",tau_" << p;
  out << '\n';
  for (int i = 0; i < cloud.n_points(); ++i) {
    out << i << ',' << int(cloud.boundary[i]) << ',' << fmt(cloud.weight(i));
    for (int j = 0; j < cloud.n_patches(); ++j) out << ',' << fmt(cloud.tau(i, j));
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_copy_csv(const std::string& path, const alg::SpectrumCloud& cloud,
                    const rec::CopyManifold& copy, const rec::MetricTensorField& field) {
  // Chart-coordinate dimension; uniform across accepted points by contract.
  int dim = 0;
  for (const auto& ch : field.charts) dim = std::max(dim, int(ch.coord_patches.size()));
  std::ostringstream out;
  out << "point_id,cloud_id,boundary_flag";
  for (const auto& p : cloud.patch_names) out << ",tau_" << p;
  for (int a = 0; a < dim; ++a) out << ",coord_patch_" << a;
  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) out << ",inv_metric_" << a << b;
  out << '\n';

  // cloud id -> metric field slot
  std::vector<int> slot(cloud.n_points(), -1);
  for (std::size_t i = 0; i < field.point_ids.size(); ++i) slot[field.point_ids[i]] = int(i);

  for (int r = 0; r < copy.n_points(); ++r) {
    const int cid = copy.cloud_ids[r];
    out << r << ',' << cid << ',' << int(copy.boundary[r]);
    for (int j = 0; j < copy.tau.cols(); ++j) out << ',' << fmt(copy.tau(r, j));
    const int s = slot[cid];
    for (int a = 0; a < dim; ++a) {
      out << ',';
      if (s >= 0 && a < int(field.charts[s].coord_patches.size()))
        out << field.charts[s].coord_patches[a];
    }
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b) {
        out << ',';
        if (s >= 0 && field.metric[s].g.rows() > a && field.metric[s].g.cols() > b)
          out << fmt(field.metric[s].g(a, b));
      }
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_singular_csv(const std::string& path, const sol::CompactnessReport& rep) {
  std::ostringstream out;
  out << "k,sigma,sigma_over_sigma1\n";
  const double top = rep.norm();
  for (int k = 0; k < rep.dim(); ++k)
    out << (k + 1) << ',' << fmt(rep.singular(k)) << ','
        << fmt(top > 0 ? rep.singular(k) / top : 0.0) << '\n';
  write_text_file(path, out.str());
}

int Histogram::total() const {
  int t = 0;
  for (int c : counts) t += c;
  return t;
}

Histogram build_histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  if (!(hi > lo)) throw std::invalid_argument("histogram: range must have hi > lo");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const int bins = static_cast<int>(h.counts.size());
  for (int b = 0; b < bins; ++b) {
    const double w = (h.hi - h.lo) / bins;
    out << fmt(h.lo + b * w) << ',' << fmt(h.lo + (b + 1) * w) << ',' << h.counts[b] << '\n';
  }
  write_text_file(path, out.str());
}

Raster::Raster(int width, int height) : w(width), h(height) {
  if (w < 1 || h < 1) throw std::invalid_argument("raster: empty canvas");
  pix.assign(static_cast<std::size_t>(w) * h, 255);
}

void Raster::set(int x, int y, std::uint8_t shade) {
  if (x < 0 || y < 0 || x >= w || y >= h) return;
  pix[static_cast<std::size_t>(y) * w + x] = shade;
}

void Raster::disc(int x, int y, int r, std::uint8_t shade) {
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) set(x + dx, y + dy, shade);
}

void Raster::line(int x0, int y0, int x1, int y1, std::uint8_t shade) {
  // Bresenham over the integer grid.
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, shade);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void write_pgm(const std::string& path, const Raster& r) {
  std::ostringstream out;
  out << "P5\n" << r.w << ' ' << r.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pix.data()), static_cast<std::streamsize>(r.pix.size()));
  write_text_file(path, out.str());
}

namespace {

struct Extent {
  double lo = 0.0, hi = 1.0;
};

// 5% padded range; constant data gets a unit window around it.
Extent padded_extent(const std::vector<double>& v) {
  if (v.empty()) return {};
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  double lo = *mn, hi = *mx;
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

int to_px(double v, const Extent& e, int n) {
  return static_cast<int>(std::lround((v - e.lo) / (e.hi - e.lo) * (n - 1)));
}

}  // namespace

Raster plot_scatter(const std::vector<double>& xs, const std::vector<double>& ys, int w, int h) {
  if (xs.size() != ys.size()) throw std::invalid_argument("scatter: size mismatch");
  Raster r(w, h);
  const Extent ex = padded_extent(xs), ey = padded_extent(ys);
  for (std::size_t i = 0; i < xs.size(); ++i)
    r.disc(to_px(xs[i], ex, w), h - 1 - to_px(ys[i], ey, h), 1, 0);
  return r;
}

Raster plot_curve(const std::vector<double>& ys, int w, int h, bool log_y) {
  Raster r(w, h);
  if (ys.empty()) return r;
  std::vector<double> v = ys;
  if (log_y) {
    // Floor at 1e-300 keeps exact zeros plottable at the bottom edge.
    for (double& y : v) y = std::log10(std::max(y, 1e-300));
    const double top = *std::max_element(v.begin(), v.end());
    for (double& y : v) y = std::max(y, top - 16.0);
  }
  const Extent ey = padded_extent(v);
  const Extent ex{0.0, double(std::max<std::size_t>(v.size() - 1, 1))};
  int px = to_px(0.0, ex, w), py = h - 1 - to_px(v[0], ey, h);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const int qx = to_px(double(i), ex, w), qy = h - 1 - to_px(v[i], ey, h);
    r.line(px, py, qx, qy, 0);
    px = qx;
    py = qy;
  }
  if (v.size() == 1) r.disc(px, py, 1, 0);
  return r;
}

Raster plot_bars(const Histogram& hist, int w, int h) {
  Raster r(w, h);
  const int bins = static_cast<int>(hist.counts.size());
  if (bins == 0) return r;
  const int peak = std::max(1, *std::max_element(hist.counts.begin(), hist.counts.end()));
  for (int b = 0; b < bins; ++b) {
    const int x0 = b * w / bins, x1 = std::max(x0, (b + 1) * w / bins - 2);
    const int top = h - 1 - (hist.counts[b] * (h - 1)) / peak;
    for (int x = x0; x <= x1; ++x)
      for (int y = top; y < h; ++y) r.set(x, y, 80);
  }
  return r;
}

}  // namespace bcml::io
