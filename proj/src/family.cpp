#include "bcml/family.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bcml::fam {

MatrixXd SpectralFamily::projection(int s_index) const {
  if (s_index < 0 || s_index >= static_cast<int>(rank_at_s.size()))
    throw std::out_of_range("spectral family: s index out of range");
  const int r = rank_at_s[s_index];
  const auto qk = q.leftCols(r);
  return qk * qk.transpose();
}

void SpectralFamily::validate() const {
  if (s_grid.size() != rank_at_s.size())
    throw std::runtime_error("spectral family: grid/rank size mismatch");
  if (s_grid.empty()) throw std::runtime_error("spectral family: empty grid");
  for (std::size_t k = 1; k < s_grid.size(); ++k)
    if (!(s_grid[k] > s_grid[k - 1]))
      throw std::runtime_error("spectral family: s grid not ascending");
  int prev = 0;
  for (int r : rank_at_s) {
    if (r < prev) throw std::runtime_error("spectral family: rank not nondecreasing");
    prev = r;
  }
  if (rank_at_s.back() != q.cols())
    throw std::runtime_error("spectral family: final rank != column count");
  if (q.cols() > 0) {
    const MatrixXd gram = q.transpose() * q;
    const double defect =
        (gram - MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
    if (defect > 1e-8)
      throw std::runtime_error("spectral family: basis not orthonormal");
  }
}

SpectralFamily from_cutoffs(const geo::CutoffFamily& cf, const std::string& patch) {
  const int n_s = static_cast<int>(cf.s_grid.size());
  if (n_s == 0) throw std::invalid_argument("cutoff family: empty grid");
  const int n_v = n_s > 0 ? static_cast<int>(cf.inside[0].size()) : 0;

  // First grid index at which each vertex is inside; n_s if never.
  std::vector<int> first(n_v, n_s);
  for (int k = 0; k < n_s; ++k) {
    if (static_cast<int>(cf.inside[k].size()) != n_v)
      throw std::invalid_argument("cutoff family: ragged indicator rows");
    for (int v = 0; v < n_v; ++v) {
      if (cf.inside[k][v]) {
        if (first[v] == n_s) first[v] = k;
      } else if (first[v] < k) {
        throw std::runtime_error("cutoff family: vertex leaves sub-level set");
      }
    }
  }

  std::vector<int> order;
  for (int v = 0; v < n_v; ++v)
    if (first[v] < n_s) order.push_back(v);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return first[a] < first[b]; });

  SpectralFamily f;
  f.patch = patch;
  f.s_grid = cf.s_grid;
  f.q = MatrixXd::Zero(n_v, static_cast<int>(order.size()));
  for (std::size_t c = 0; c < order.size(); ++c) f.q(order[c], static_cast<int>(c)) = 1.0;
  f.rank_at_s.resize(n_s, 0);
  for (int k = 0; k < n_s; ++k) {
    int r = 0;
    for (int v : order)
      if (first[v] <= k) ++r;
    f.rank_at_s[k] = r;
  }
  return f;
}

}  // namespace bcml::fam
