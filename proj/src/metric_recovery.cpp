#include "bcml/metric_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>

namespace bcml::rec {

namespace {

// Weighted affine fit of y against coordinates x (rows, row 0 = anchor).
// Gaussian distance weights times the member multiplicities. Returns the
// gradient at the anchor, or nothing when the design is rank deficient.
std::optional<VectorXd> affine_gradient(const MatrixXd& x, const VectorXd& y,
                                        const VectorXd& mult) {
  const int k = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  if (k < n + 1) return std::nullopt;

  VectorXd dist(k);
  for (int i = 0; i < k; ++i) dist(i) = (x.row(i) - x.row(0)).norm();
  std::vector<double> pos(dist.data() + 1, dist.data() + k);
  std::nth_element(pos.begin(), pos.begin() + static_cast<long>(pos.size() / 2), pos.end());
  const double bw = 2.0 * pos[pos.size() / 2];
  if (!(bw > 0)) return std::nullopt;

  MatrixXd a(k, n + 1);
  VectorXd b(k);
  for (int i = 0; i < k; ++i) {
    const double w = std::exp(-std::pow(dist(i) / bw, 2)) * mult(i);
    const double sw = std::sqrt(w);
    a(i, 0) = sw;
    a.row(i).tail(n) = sw * (x.row(i) - x.row(0));
    b(i) = sw * y(i);
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < n + 1) return std::nullopt;
  const VectorXd coef = qr.solve(b);
  return VectorXd(coef.tail(n));
}

}  // namespace

Chart build_chart(const alg::SpectrumCloud& cloud, int anchor, int k_neighbors, int dim,
                  double cond_cap) {
  const int n_pts = cloud.n_points();
  const int n_patches = cloud.n_patches();
  if (anchor < 0 || anchor >= n_pts) throw std::invalid_argument("build_chart: bad anchor");
  if (dim < 1 || n_patches < dim)
    throw std::invalid_argument("build_chart: catalog smaller than chart dimension");
  if (k_neighbors < dim + 2 || n_pts < k_neighbors)
    throw std::invalid_argument("build_chart: not enough points for the neighborhood");

  Chart chart;
  chart.anchor = anchor;

  std::vector<int> order(static_cast<std::size_t>(n_pts));
  for (int i = 0; i < n_pts; ++i) order[static_cast<std::size_t>(i)] = i;
  std::vector<double> d(static_cast<std::size_t>(n_pts));
  for (int i = 0; i < n_pts; ++i)
    d[static_cast<std::size_t>(i)] = (cloud.tau.row(i) - cloud.tau.row(anchor)).lpNorm<Eigen::Infinity>();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return d[static_cast<std::size_t>(a)] < d[static_cast<std::size_t>(b)]; });
  chart.members.assign(order.begin(), order.begin() + k_neighbors);

  const int k = k_neighbors;
  chart.weights.resize(k);
  MatrixXd tuples(k, n_patches);
  for (int i = 0; i < k; ++i) {
    tuples.row(i) = cloud.tau.row(chart.members[static_cast<std::size_t>(i)]);
    chart.weights(i) = cloud.weight(chart.members[static_cast<std::size_t>(i)]);
  }

  // Local principal frame of the neighborhood; gradients of every patch
  // value in that frame drive the coordinate selection.
  const Eigen::RowVectorXd mean = tuples.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> svd(tuples.rowwise() - mean, Eigen::ComputeThinV);
  const MatrixXd frame = svd.matrixV().leftCols(dim);
  const MatrixXd u = (tuples.rowwise() - mean) * frame;

  MatrixXd grads(n_patches, dim);
  std::vector<std::uint8_t> usable(static_cast<std::size_t>(n_patches), 0);
  for (int p = 0; p < n_patches; ++p) {
    const auto g = affine_gradient(u, tuples.col(p), chart.weights);
    if (g) {
      grads.row(p) = g->transpose();
      usable[static_cast<std::size_t>(p)] = 1;
    }
  }

  // Greedy coordinate choice. The first coordinate wants a well-scaled
  // gradient, later ones minimize the stacked condition number; scores
  // within 5% count as ties and fall back to catalog order, which keeps the
  // selection stable under fit noise.
  std::vector<int> selected;
  MatrixXd stack(dim, dim);
  double cond = 0;
  for (int step = 0; step < dim; ++step) {
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<double> score(static_cast<std::size_t>(n_patches),
                              std::numeric_limits<double>::infinity());
    for (int p = 0; p < n_patches; ++p) {
      if (!usable[static_cast<std::size_t>(p)]) continue;
      if (std::find(selected.begin(), selected.end(), p) != selected.end()) continue;
      double s_p;
      if (step == 0) {
        const double norm = grads.row(p).norm();
        s_p = norm > 0 ? 1.0 / norm : std::numeric_limits<double>::infinity();
      } else {
        stack.row(step) = grads.row(p);
        Eigen::JacobiSVD<MatrixXd> s(stack.topRows(step + 1));
        const double smin = s.singularValues()(step);
        s_p = smin > 0 ? s.singularValues()(0) / smin : std::numeric_limits<double>::infinity();
      }
      score[static_cast<std::size_t>(p)] = s_p;
      best_score = std::min(best_score, s_p);
    }
    if (!std::isfinite(best_score)) return chart;  // nothing usable; stays invalid
    int best = -1;
    for (int p = 0; p < n_patches && best < 0; ++p)
      if (score[static_cast<std::size_t>(p)] <= best_score * 1.05) best = p;
    selected.push_back(best);
    stack.row(step) = grads.row(best);
    cond = (step == 0) ? 1.0 : score[static_cast<std::size_t>(best)];
  }
  if (!(cond <= cond_cap)) return chart;

  chart.coord_patches = selected;
  chart.cond = cond;
  chart.coords.resize(k, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < k; ++i)
      chart.coords(i, j) = cloud.tau(chart.members[static_cast<std::size_t>(i)],
                                     selected[static_cast<std::size_t>(j)]);
  chart.valid = true;
  return chart;
}

VectorXd estimate_gradients(const Chart& chart, const VectorXd& values) {
  if (!chart.valid) throw std::invalid_argument("estimate_gradients: invalid chart");
  if (values.size() != static_cast<long>(chart.members.size()))
    throw std::invalid_argument("estimate_gradients: value count mismatch");
  const auto g = affine_gradient(chart.coords, values, chart.weights);
  if (!g)
    throw std::runtime_error("gradient estimate: degenerate neighborhood at anchor " +
                             std::to_string(chart.anchor));
  return *g;
}

std::optional<MetricSolve> solve_metric(const MatrixXd& gradients) {
  const int m = static_cast<int>(gradients.rows());
  const int n = static_cast<int>(gradients.cols());
  const int u = n * (n + 1) / 2;
  if (m < 1 || n < 1) return std::nullopt;

  MatrixXd a(m, u);
  for (int r = 0; r < m; ++r) {
    int c = 0;
    for (int i = 0; i < n; ++i) a(r, c++) = gradients(r, i) * gradients(r, i);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a(r, c++) = 2.0 * gradients(r, i) * gradients(r, j);
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < u) return std::nullopt;
  const VectorXd coef = qr.solve(VectorXd::Ones(m));

  MetricSolve out;
  out.g.resize(n, n);
  int c = 0;
  for (int i = 0; i < n; ++i) out.g(i, i) = coef(c++);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      out.g(i, j) = coef(c);
      out.g(j, i) = coef(c++);
    }
  out.residual = (a * coef - VectorXd::Ones(m)).norm() / std::sqrt(static_cast<double>(m));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(out.g);
  out.positive_definite = es.eigenvalues().minCoeff() > 0;
  return out;
}

MetricTensorField recover_metric_field(const alg::SpectrumCloud& cloud, int dim, int k_neighbors,
                                       double cond_cap) {
  MetricTensorField field;
  const int n_patches = cloud.n_patches();
  for (int a = 0; a < cloud.n_points(); ++a) {
    Chart chart = build_chart(cloud, a, k_neighbors, dim, cond_cap);
    if (!chart.valid) {
      field.unchartable.push_back(a);
      continue;
    }
    MatrixXd grads(n_patches, dim);
    bool ok = true;
    VectorXd vals(static_cast<long>(chart.members.size()));
    for (int p = 0; p < n_patches && ok; ++p) {
      for (std::size_t i = 0; i < chart.members.size(); ++i)
        vals(static_cast<long>(i)) = cloud.tau(chart.members[i], p);
      try {
        grads.row(p) = estimate_gradients(chart, vals).transpose();
      } catch (const std::runtime_error&) {
        ok = false;
      }
    }
    auto solved = ok ? solve_metric(grads) : std::nullopt;
    if (!solved) {
      field.excluded.push_back(a);
      continue;
    }
    field.point_ids.push_back(a);
    field.charts.push_back(std::move(chart));
    field.metric.push_back(std::move(*solved));
  }
  return field;
}

CopyManifold assemble_copy(const alg::SpectrumCloud& cloud, const MetricTensorField& field,
                           int knn_edges, double radius_factor, double boundary_eps) {
  CopyManifold copy;
  for (std::size_t i = 0; i < field.point_ids.size(); ++i)
    if (field.metric[i].positive_definite) copy.cloud_ids.push_back(field.point_ids[i]);
  const int n = copy.n_points();
  if (2 * n <= cloud.n_points())
    throw std::runtime_error("copy assembly: metric solved on " + std::to_string(n) + " of " +
                             std::to_string(cloud.n_points()) + " points, not a majority");

  std::vector<std::size_t> field_row(static_cast<std::size_t>(n));
  {
    std::size_t fi = 0;
    for (int i = 0; i < n; ++i) {
      while (field.point_ids[fi] != copy.cloud_ids[static_cast<std::size_t>(i)]) ++fi;
      field_row[static_cast<std::size_t>(i)] = fi;
    }
  }

  const int dim = static_cast<int>(field.charts.front().coord_patches.size());
  if (knn_edges <= 0) knn_edges = 2 * dim + 2;
  if (knn_edges >= n) knn_edges = n - 1;

  copy.tau.resize(n, cloud.n_patches());
  for (int i = 0; i < n; ++i)
    copy.tau.row(i) = cloud.tau.row(copy.cloud_ids[static_cast<std::size_t>(i)]);

  // Edge lengths average the two endpoint charts: the coordinate increment
  // of q seen in the chart of p, measured by the metric solved at p.
  std::vector<Eigen::LDLT<MatrixXd>> inv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i)].compute(field.metric[field_row[static_cast<std::size_t>(i)]].g);
  auto one_sided = [&](int p, int q) {
    const auto& chart = field.charts[field_row[static_cast<std::size_t>(p)]];
    VectorXd d(dim);
    for (int j = 0; j < dim; ++j) {
      const int patch = chart.coord_patches[static_cast<std::size_t>(j)];
      d(j) = copy.tau(q, patch) - copy.tau(p, patch);
    }
    const double s = d.dot(inv[static_cast<std::size_t>(p)].solve(d));
    return std::sqrt(std::max(s, 0.0));
  };

  MatrixXd len(n, n);
  for (int p = 0; p < n; ++p) {
    len(p, p) = 0;
    for (int q = p + 1; q < n; ++q) {
      const double l = 0.5 * (one_sided(p, q) + one_sided(q, p));
      len(p, q) = l;
      len(q, p) = l;
    }
  }

  std::set<std::pair<int, int>> picked;
  std::vector<double> nearest(static_cast<std::size_t>(n));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) idx[static_cast<std::size_t>(q)] = q;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return len(p, a) < len(p, b); });
    nearest[static_cast<std::size_t>(p)] = len(p, idx[1]);  // idx[0] == p itself
    for (int r = 1; r <= knn_edges; ++r) {
      const int q = idx[static_cast<std::size_t>(r)];
      picked.emplace(std::min(p, q), std::max(p, q));
    }
  }
  std::vector<double> med = nearest;
  std::nth_element(med.begin(), med.begin() + static_cast<long>(med.size() / 2), med.end());
  const double radius = radius_factor * med[med.size() / 2];

  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (const auto& [i, j] : picked) {
    if (len(i, j) > radius) continue;
    copy.edges.push_back({i, j, len(i, j)});
    adj[static_cast<std::size_t>(i)].emplace_back(j, len(i, j));
    adj[static_cast<std::size_t>(j)].emplace_back(i, len(i, j));
  }

  // Connectivity, then all-pairs shortest paths.
  {
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int n_comp = 0;
    std::vector<int> sizes;
    for (int s = 0; s < n; ++s) {
      if (comp[static_cast<std::size_t>(s)] >= 0) continue;
      int size = 0;
      std::vector<int> stack = {s};
      comp[static_cast<std::size_t>(s)] = n_comp;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        ++size;
        for (const auto& [w, l] : adj[static_cast<std::size_t>(v)])
          if (comp[static_cast<std::size_t>(w)] < 0) {
            comp[static_cast<std::size_t>(w)] = n_comp;
            stack.push_back(w);
          }
      }
      sizes.push_back(size);
      ++n_comp;
    }
    if (n_comp > 1) {
      std::string msg = "copy assembly: graph disconnected, component sizes";
      for (int s : sizes) msg += " " + std::to_string(s);
      throw std::runtime_error(msg);
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  copy.dist.setConstant(n, n, inf);
  using Item = std::pair<double, int>;
  for (int s = 0; s < n; ++s) {
    auto row = copy.dist.row(s);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    row(s) = 0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      const auto [dv, v] = pq.top();
      pq.pop();
      if (dv > row(v)) continue;
      for (const auto& [w, l] : adj[static_cast<std::size_t>(v)])
        if (dv + l < row(w)) {
          row(w) = dv + l;
          pq.emplace(row(w), w);
        }
    }
  }

  copy.boundary.resize(static_cast<std::size_t>(n));
  copy.patch_incidence.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    copy.boundary[static_cast<std::size_t>(i)] =
        cloud.boundary[static_cast<std::size_t>(copy.cloud_ids[static_cast<std::size_t>(i)])];
    if (!copy.boundary[static_cast<std::size_t>(i)]) continue;
    for (int p = 0; p < cloud.n_patches(); ++p)
      if (copy.tau(i, p) < boundary_eps) copy.patch_incidence[static_cast<std::size_t>(i)].push_back(p);
  }
  return copy;
}

}  // namespace bcml::rec
