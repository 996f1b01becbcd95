#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "bcml/bcm.hpp"
#include "bcml/config.hpp"
#include "bcml/eikonal_algebra.hpp"
#include "bcml/geometry.hpp"
#include "bcml/metric_recovery.hpp"
#include "bcml/report.hpp"
#include "bcml/wave.hpp"

// Stage orchestration. The forward stage owns the manifold and synthesizes
// the boundary data; the reconstruction stage is deliberately cut off from
// it: its inputs are a boundary manifest plus the persisted response blob,
// and its functions never see a manifold or a ManifoldConfig, so the inverse
// side cannot cheat even by accident. Evaluation rebuilds the ground truth
// and grades the recovered copy against it.
namespace bcml::pipe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Boundary-only description of a synthesized data set: everything the
// inverse side is entitled to (time horizon, control grid, boundary measure,
// patch catalog as boundary slots, the dimension the boundary bounds) and
// nothing about the interior.
struct BoundaryManifest {
  int dim = 0;              // manifold dimension; boundary knowledge plus one
  double T = 0.0;
  double dt = 0.0;          // control node spacing
  int n_steps_t = 0;        // control nodes on [0,T] are 0..n_steps_t
  int n_steps_2t = 0;
  std::vector<int> boundary_ids;        // opaque labels on the inverse side
  std::vector<double> boundary_weight;  // boundary measure per slot
  struct Patch {
    std::string name;
    std::vector<int> slots;  // indices into boundary_ids
  };
  std::vector<Patch> patches;
  int s_count = 0;

  wave::ControlSpace control_space_t() const;
  wave::ControlSpace control_space_2t() const;
  std::vector<double> s_grid() const;  // uniform on [0, T], s_count points
  double s_step() const;
};

std::string render_boundary_manifest(const BoundaryManifest& bm);
BoundaryManifest parse_boundary_manifest(const std::string& text);

// Artifact names inside an output directory, shared by every stage.
struct ArtifactPaths {
  std::string dir;
  std::string boundary_manifest() const { return dir + "/boundary_manifest.txt"; }
  std::string response_blob() const { return dir + "/response_2t.blob"; }
  std::string gram_blob() const { return dir + "/gram_t.blob"; }
  std::string connecting_blob() const { return dir + "/connecting.blob"; }
  std::string copy_dist_blob() const { return dir + "/copy_dist.blob"; }
  std::string cloud_csv() const { return dir + "/cloud.csv"; }
  std::string copy_csv() const { return dir + "/copy.csv"; }
  std::string comparison_json() const { return dir + "/comparison.json"; }
  std::string manifest() const { return dir + "/manifest.txt"; }
  std::string report() const { return dir + "/report.txt"; }
};

struct ForwardResult {
  geo::DiscreteManifold manifold;
  std::vector<geo::BoundaryPatch> catalog;
  wave::ControlSpace cs_t, cs_2t;
  wave::WaveParams params;
  double diameter = 0.0;
  double T = 0.0;
  MatrixXd snapshots;  // vertices x n_basis(T), the forward-side W matrix
  MatrixXd r2t;        // persisted; the only data crossing to the inverse side
  MatrixXd gram;       // oracle path, persisted for verification reports
  BoundaryManifest manifest;
};

// Builds the manifold, validates T > diameter and the CFL bound before any
// solve, synthesizes response and Gram data, and persists blob + manifest +
// ground-truth eikonal CSVs under out.dir.
ForwardResult run_forward(const io::ExperimentConfig& cfg, const ArtifactPaths& out,
                          io::ReportBundle& bundle);

// Knobs the inverse side may read: tolerance and clustering sections only.
struct InverseKnobs {
  io::BcmConfig bcm;
  io::AlgebraConfig algebra;
  io::RecoveryConfig recovery;
  bool emit_plots = true;

  static InverseKnobs from_config(const io::ExperimentConfig& cfg);
};

struct ReconstructResult {
  BoundaryManifest manifest;
  bcm::ConnectingOperator connecting;
  bcm::ModelSpace model;
  std::vector<fam::SpectralFamily> families;       // one per patch
  std::vector<alg::OperatorEikonal> eikonals;      // one per patch
  MatrixXd commutation_defects;                    // pairwise, symmetric
  alg::JointDiagResult characters;
  alg::SpectrumCloud cloud;
  rec::MetricTensorField field;
  rec::CopyManifold copy;
  int manifold_dim = 0;      // deduced from the patch catalog shape
  double cluster_eps = 0.0;  // resolved values actually used
  double boundary_eps = 0.0;
};

// Runs the whole inverse side from the persisted artifacts in `in`:
// response blob + boundary manifest are loaded from disk; nothing else is
// read. Writes connecting blob, cloud/copy CSVs and the copy distance blob.
ReconstructResult run_reconstruct(const ArtifactPaths& in, const InverseKnobs& knobs,
                                  io::ReportBundle& bundle);

// Ground-truth grading of a recovered copy.
struct Evaluation {
  std::vector<int> matched_vertex;  // copy row -> manifold vertex id
  double match_sup = 0.0;           // sup-norm coordinate gap of the matching
  int n_pairs = 0;
  double dist_sup_abs = 0.0;        // max |d_copy - d_true| over pairs
  double dist_sup_rel = 0.0;        // max relative error, pairs with d_true > h
  io::Histogram rel_hist;           // relative distance errors
  // Chart-metric diagnostics at interior, charted points.
  int n_interior = 0;
  int n_diag_ok = 0;                // every diagonal entry within 0.1 of 1
  double diag_worst = 0.0;
  // Conformal factor from copy edge lengths against matched positions.
  int n_factor = 0;
  int n_factor_ok = 0;              // within 15% of the true factor
};

// Matches copy points to manifold vertices by nearest eikonal tuple in the
// sup norm, then compares all pairwise copy distances with graph distances,
// chart-metric diagonals with the unit-gradient identity, and per-point
// conformal factors (copy edge length over matched coordinate distance)
// with `true_factor` evaluated at the matched vertex.
Evaluation evaluate_copy(const geo::DiscreteManifold& m,
                         const std::vector<geo::BoundaryPatch>& catalog,
                         const ReconstructResult& rr,
                         const std::function<double(double, double, double)>& true_factor);

// Full scalar chain in one process: forward, reconstruct (through the same
// persisted artifacts), evaluate, then report + manifest + plots under
// out.dir. Criterion rows the run owns are added to the bundle.
struct ChainResult {
  ForwardResult fwd;
  ReconstructResult rec;
  Evaluation eval;
};

ChainResult run_chain(const io::ExperimentConfig& cfg, const ArtifactPaths& out,
                      io::ReportBundle& bundle);

// Per-size measurements of the solenoidal lab, plus the refinement-series
// verdict rows appended to the bundle.
struct SolenoidalSizeStats {
  int n = 0;
  int dim_curl = 0;
  double eps_norm = 0.0;
  double tau_max = 0.0;
  double eik_mult_tail = 0.0;   // eikonal-vs-multiplier probe, half-dim ratio
  double mult_proj_tail = 0.0;  // multiplier-vs-projected probe, half-dim ratio
  double comm_rel_norm = 0.0;
  double comm_tail = 0.0;
  double calkin_sup = 0.0;
  double calkin_est = 0.0;
};

std::vector<SolenoidalSizeStats> run_solenoidal(const io::ExperimentConfig& cfg,
                                                const ArtifactPaths& out,
                                                io::ReportBundle& bundle);

// Resolved time parameters for a manifold under a config (T from T or
// T_factor, PDE dt from the CFL bound, control dt from control_dt or dt).
struct TimeGrid {
  double T = 0.0;
  double pde_dt = 0.0;
  double control_dt = 0.0;
};

TimeGrid resolve_time_grid(const io::ExperimentConfig& cfg, const geo::DiscreteManifold& m,
                           double diameter);

}  // namespace bcml::pipe
