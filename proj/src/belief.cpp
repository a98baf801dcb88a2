#include "egml/belief.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "egml/errors.hpp"

namespace egml {

void validate_belief(const Eigen::VectorXd& theta, double tol) {
  if (theta.size() < 1) throw std::domain_error("belief: empty weight vector");
  double total = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta(i) >= 0.0)) throw std::domain_error("belief: negative weight");
    total += theta(i);
  }
  if (std::abs(total - 1.0) > tol)
    throw std::domain_error("belief: weights sum to " + std::to_string(total));
}

std::int64_t simplex_point_count(int n, int h, std::int64_t cap) {
  if (n < 1 || h < 1) throw std::domain_error("simplex_point_count: need N >= 1, H >= 1");
  // binomial(h+n-1, n-1) by the multiplicative formula; exact at every step.
  unsigned __int128 count = 1;
  for (int k = 1; k <= n - 1; ++k) {
    count = count * static_cast<unsigned>(h + k) / static_cast<unsigned>(k);
    if (count > static_cast<unsigned __int128>(cap))
      throw resource_error("simplex grid would have more than " + std::to_string(cap) + " points");
  }
  return static_cast<std::int64_t>(count);
}

SimplexGrid::SimplexGrid(int n_candidates, int resolution, std::int64_t cap)
    : n_(n_candidates), h_(resolution) {
  const std::int64_t count = simplex_point_count(n_, h_, cap);
  points_.resize(count, n_);
  comps_.resize(count, n_);
  Eigen::VectorXi comp = Eigen::VectorXi::Zero(n_);
  comp(n_ - 1) = h_;
  const double inv_h = 1.0 / h_;
  std::int64_t row = 0;
  for (;;) {
    comps_.row(row) = comp.transpose();
    for (int i = 0; i < n_; ++i) points_(row, i) = comp(i) * inv_h;
    ++row;
    // Next composition in ascending lexicographic order of (h_1,...,h_N).
    int j = n_ - 2;
    while (j >= 0) {
      int tail = 0;
      for (int i = j + 1; i < n_; ++i) tail += comp(i);
      if (tail > 0) break;
      --j;
    }
    if (j < 0) break;
    comp(j) += 1;
    int remaining = h_;
    for (int i = 0; i <= j; ++i) remaining -= comp(i);
    for (int i = j + 1; i < n_; ++i) comp(i) = 0;
    comp(n_ - 1) = remaining;
  }
  if (row != count) throw std::logic_error("SimplexGrid: enumeration mismatch");
}

SimplexGrid build_simplex_grid(int n_candidates, int resolution, std::int64_t cap) {
  return SimplexGrid(n_candidates, resolution, cap);
}

Eigen::VectorXd bayes_update(const CandidateSet& cands, const Eigen::VectorXd& theta,
                             int z, int z_next) {
  const int n = cands.n_candidates();
  Eigen::VectorXd post(n);
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    post(i) = cands.matrices[i](z, z_next) * theta(i);
    denom += post(i);
  }
  if (!(denom > 0.0))
    throw learning_error("bayes_update: transition " + std::to_string(z) + "->" +
                             std::to_string(z_next) +
                             " is impossible under every positively-weighted candidate",
                         z, z_next, theta);
  post /= denom;
  return post;
}

double mixture_weight(const CandidateSet& cands, const Eigen::VectorXd& theta,
                      int z, int z_next) {
  double w = 0.0;
  for (int i = 0; i < cands.n_candidates(); ++i) w += theta(i) * cands.matrices[i](z, z_next);
  return w;
}

Eigen::MatrixXd mixture_kernel(const CandidateSet& cands, const Eigen::VectorXd& theta) {
  const int m = cands.n_states();
  Eigen::MatrixXd p(m, m);
  for (int z = 0; z < m; ++z)
    for (int zn = 0; zn < m; ++zn) p(z, zn) = mixture_weight(cands, theta, z, zn);
  return p;
}

Eigen::Index project_to_grid(const SimplexGrid& grid, const Eigen::VectorXd& theta) {
  if (theta.size() != grid.n_candidates())
    throw std::domain_error("project_to_grid: dimension mismatch");
  const Eigen::MatrixXd& pts = grid.points();
  Eigen::Index best = 0;
  double best_d = (pts.row(0).transpose() - theta).squaredNorm();
  for (Eigen::Index ell = 1; ell < pts.rows(); ++ell) {
    double d = (pts.row(ell).transpose() - theta).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = ell;
    }
  }
  return best;
}

}  // namespace egml
