#include "egml/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace egml {

QuadratureRule gauss_hermite_normal(int n) {
  if (n < 1 || n > 64) throw std::domain_error("gauss_hermite_normal: n must be in [1, 64]");
  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Ones(1);
    return rule;
  }

  // Golub-Welsch on the Jacobi matrix of the (physicists') Hermite
  // polynomials: zero diagonal, off-diagonal sqrt(k/2).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(k / 2.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_normal: eigensolver failed");

  // weight_k = v0k^2 for the N(0,1) normalization (the sqrt(pi) factors of
  // the physicists' weights cancel).
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& t = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) { return t(a) < t(b); });

  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    rule.nodes(i) = sqrt2 * t(order[i]);
    double v0 = es.eigenvectors()(0, order[i]);
    rule.weights(i) = v0 * v0;
  }

  // Enforce exact symmetry about zero; the rule is symmetric analytically.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    double node = 0.5 * (rule.nodes(j) - rule.nodes(i));
    rule.nodes(i) = -node;
    rule.nodes(j) = node;
    double w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.weights(i) = w;
    rule.weights(j) = w;
  }
  if (n % 2 == 1) rule.nodes((n - 1) / 2) = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

}  // namespace egml
