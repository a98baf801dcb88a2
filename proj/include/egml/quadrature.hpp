#pragma once

#include <Eigen/Core>

namespace egml {

// Nodes/weights for expectations of a standard normal variate:
// sum_k weights[k] * g(nodes[k]) ~ E[g(v)], v ~ N(0,1).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return nodes.size(); }
};

// Gauss-Hermite rule transformed for N(0,1): node = sqrt(2)*t_k,
// weight = w_k/sqrt(pi). Exact for polynomials up to degree 2n-1.
// Throws std::domain_error unless 1 <= n <= 64.
QuadratureRule gauss_hermite_normal(int n);

}  // namespace egml
