#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcml/eikonal_algebra.hpp"
#include "bcml/geometry.hpp"
#include "bcml/metric_recovery.hpp"
#include "bcml/solenoidal.hpp"

// Run artifacts: CSV tables, structured-text reports, and plain PGM rasters.
// Everything renders through fixed iteration orders and fixed float
// formatting, so rerunning with the same config writes byte-identical files;
// nothing here reads the clock or the environment.
namespace bcml::io {

// One check line: a measured value against a threshold under a relation.
// relation is one of < <= > >= ==; "info" rows carry no verdict weight.
struct CheckRow {
  std::string id;
  std::string detail;
  double measured = 0.0;
  std::string relation;
  double threshold = 0.0;
  bool pass = false;
};

struct StageNote {
  std::string stage;
  std::string text;
};

struct ReportBundle {
  std::string config_echo;
  std::string input_hash;  // content hash of config text + consumed blobs
  std::vector<StageNote> notes;
  std::vector<CheckRow> checks;

  bool all_pass() const;
  CheckRow& add_check(const std::string& id, const std::string& detail, double measured,
                      const std::string& relation, double threshold);
  void note(const std::string& stage, const std::string& text);
};

// Evaluates measured <relation> threshold; "info" rows always pass.
bool check_passes(double measured, const std::string& relation, double threshold);

// Content hash used to pin run inputs in the manifest: CRC32 chained over
// byte strings, reported as 8 hex digits. Matches the checksum family the
// blob container uses, so one implementation covers both.
class ContentHasher {
 public:
  void feed(const std::string& bytes);
  void feed_file(const std::string& path);  // throws on unreadable path
  std::string hex() const;

 private:
  std::uint32_t crc_ = 0;
  bool any_ = false;
};

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// Fixed-width text table; every cell already formatted by the caller.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

// Deterministic float formatting shared by all writers ("%.12g").
std::string fmt(double v);

std::string render_manifest(const ReportBundle& b);
std::string render_report(const ReportBundle& b);

// CSV writers. Each writes the header row even when no data rows follow.
void write_eikonal_csv(const std::string& path, const geo::DiscreteManifold& m,
                       const geo::EikonalField& tau);
void write_cloud_csv(const std::string& path, const alg::SpectrumCloud& cloud);
void write_copy_csv(const std::string& path, const alg::SpectrumCloud& cloud,
                    const rec::CopyManifold& copy, const rec::MetricTensorField& field);
void write_singular_csv(const std::string& path, const sol::CompactnessReport& rep);

struct Histogram {
  double lo = 0.0, hi = 0.0;  // value range covered by the bins
  std::vector<int> counts;    // values outside the range clamp to end bins

  int total() const;
};

Histogram build_histogram(const std::vector<double>& values, int bins, double lo, double hi);
void write_histogram_csv(const std::string& path, const Histogram& h);

// 8-bit grayscale canvas, 255 = white background, written as binary PGM.
struct Raster {
  int w = 0, h = 0;
  std::vector<std::uint8_t> pix;

  Raster(int width, int height);
  void set(int x, int y, std::uint8_t shade);  // ignores out-of-range
  void disc(int x, int y, int r, std::uint8_t shade);
  void line(int x0, int y0, int x1, int y1, std::uint8_t shade);
};

void write_pgm(const std::string& path, const Raster& r);

// Plot primitives used for the emitted rasters: scatter of point pairs,
// index-vs-value polyline (optionally log10 on the value axis), and a bar
// chart for histograms. Extents are padded by 5% and degenerate (constant)
// data centers on the canvas.
Raster plot_scatter(const std::vector<double>& xs, const std::vector<double>& ys, int w, int h);
Raster plot_curve(const std::vector<double>& ys, int w, int h, bool log_y);
Raster plot_bars(const Histogram& hist, int w, int h);

}  // namespace bcml::io
