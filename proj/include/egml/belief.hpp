#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "egml/model.hpp"

namespace egml {

// Beliefs are plain probability vectors over the candidate set.
void validate_belief(const Eigen::VectorXd& theta, double tol = 1e-12);

// Number of barycentric grid points, binomial(h+n-1, n-1). Throws
// resource_error if the count exceeds cap.
std::int64_t simplex_point_count(int n, int h, std::int64_t cap = 10'000'000);

// Barycentric grid over the (N-1)-simplex: all compositions (h_1,...,h_N) of
// H mapped to h/H, enumerated in ascending lexicographic order of the
// composition vector.
class SimplexGrid {
 public:
  SimplexGrid(int n_candidates, int resolution, std::int64_t cap = 10'000'000);

  int n_candidates() const { return n_; }
  int resolution() const { return h_; }
  Eigen::Index size() const { return points_.rows(); }
  // L x N; row ell is the grid belief theta_ell.
  const Eigen::MatrixXd& points() const { return points_; }
  // L x N integer compositions.
  const Eigen::MatrixXi& compositions() const { return comps_; }
  Eigen::VectorXd point(Eigen::Index ell) const { return points_.row(ell).transpose(); }

 private:
  int n_;
  int h_;
  Eigen::MatrixXd points_;
  Eigen::MatrixXi comps_;
};

SimplexGrid build_simplex_grid(int n_candidates, int resolution,
                               std::int64_t cap = 10'000'000);

// Posterior after observing z -> z_next. Throws learning_error when the
// transition has zero probability under every positively-weighted candidate.
Eigen::VectorXd bayes_update(const CandidateSet& cands, const Eigen::VectorXd& theta,
                             int z, int z_next);

// Single entry of the subjective kernel, sum_i theta_i P_i(z, z_next).
double mixture_weight(const CandidateSet& cands, const Eigen::VectorXd& theta,
                      int z, int z_next);

// Full subjective kernel P_theta.
Eigen::MatrixXd mixture_kernel(const CandidateSet& cands, const Eigen::VectorXd& theta);

// Index of the Euclidean-nearest grid point; ties break to the lowest index.
Eigen::Index project_to_grid(const SimplexGrid& grid, const Eigen::VectorXd& theta);

}  // namespace egml
