#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Experiment configuration: flat sectioned key=value text. Unknown keys are
// rejected so typos fail loudly. Numeric validation (tolerances positive,
// grid sizes >= 3, ...) happens at parse time; constraints that need the
// manifold (T > diameter) are checked when a pipeline starts.
namespace bcml::io {

struct ManifoldConfig {
  std::string kind;                 // interval | rect2d | box3d
  int nx = 0, ny = 0, nz = 0;
  double length = 1.0;              // interval only
  std::string speed = "unit";       // interval: unit | one_over_one_plus_x
  std::string conformal = "flat";   // rect2d: flat | sinbump:<amplitude>
};

struct WaveConfig {
  double T = 0.0;          // absolute final time; 0 means "use T_factor"
  double T_factor = 0.0;   // T = T_factor * diameter; 0 means "use T"
  double dt = 0.0;         // PDE step; 0 means "auto": cfl_safety * min edge
  double cfl_safety = 0.5;
  double control_dt = 0.0; // control-grid node spacing; 0 means "= dt"
};

struct BcmConfig {
  double tol_psd = 1e-8;
  double tol_rank = 1e-6;
  int s_count = 49;        // s-grid points on [0, T], inclusive
};

struct AlgebraConfig {
  double cluster_eps = -1.0;    // <0: default 2 * s-grid step
  double boundary_eps = -1.0;   // <0: default 1 * s-grid step
  int max_sweeps = 100;
  double tol_offdiag = 1e-10;
  double defect_ceiling = 0.35; // abort if pairwise commutation defects exceed
};

struct RecoveryConfig {
  int k_neighbors = 12;        // chart neighborhood size
  double cond_cap = 25.0;      // chart rejected above this condition number
  int knn_edges = 0;           // copy graph k; 0 means default 2*dim+2
  double radius_factor = 1.8;  // edge prune radius x median NN spacing
};

struct SolenoidalConfig {
  std::vector<int> sizes = {8, 12, 16};
  double s_step = 0.0;  // 0: default h/4 per grid
  int burn_in = 10;     // singular-value index for the essential-norm proxy
};

struct RunConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 20260814;
  bool emit_plots = true;
};

struct ExperimentConfig {
  ManifoldConfig manifold;
  WaveConfig wave;
  BcmConfig bcm;
  AlgebraConfig algebra;
  RecoveryConfig recovery;
  SolenoidalConfig solenoidal;
  RunConfig run;
  std::string source_text;  // verbatim config contents, echoed into manifests
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Serializes the effective configuration (defaults resolved) as config text.
std::string render_config(const ExperimentConfig& c);

}  // namespace bcml::io
