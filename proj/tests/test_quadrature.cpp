#include <doctest.h>

#include <cmath>

#include "egml/quadrature.hpp"

using namespace egml;

namespace {

double moment(const QuadratureRule& r, int k) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    acc += r.weights(i) * std::pow(r.nodes(i), k);
  return acc;
}

// (2m-1)!! for the even moments of N(0,1).
double double_factorial_odd(int m) {
  double acc = 1.0;
  for (int k = 2 * m - 1; k > 1; k -= 2) acc *= k;
  return acc;
}

}  // namespace

TEST_CASE("single-node rule is the mean of N(0,1)") {
  QuadratureRule r = gauss_hermite_normal(1);
  CHECK(r.size() == 1);
  CHECK(r.nodes(0) == 0.0);
  CHECK(r.weights(0) == 1.0);
}

TEST_CASE("n out of range is a domain error") {
  CHECK_THROWS_AS(gauss_hermite_normal(0), std::domain_error);
  CHECK_THROWS_AS(gauss_hermite_normal(65), std::domain_error);
}

TEST_CASE("7-point rule: weights normalized, nodes symmetric") {
  QuadratureRule r = gauss_hermite_normal(7);
  CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-12);
  for (Eigen::Index i = 0; i < r.size(); ++i)
    CHECK(r.nodes(i) == -r.nodes(r.size() - 1 - i));
  for (Eigen::Index i = 1; i < r.size(); ++i) CHECK(r.nodes(i) > r.nodes(i - 1));
  CHECK(r.weights.minCoeff() > 0.0);
}

TEST_CASE("second moment is exact at n=7") {
  QuadratureRule r = gauss_hermite_normal(7);
  CHECK(std::abs(moment(r, 2) - 1.0) <= 1e-12);
}

TEST_CASE("odd moments vanish up to degree 13 at n=7") {
  QuadratureRule r = gauss_hermite_normal(7);
  for (int m = 0; m <= 6; ++m) CHECK(std::abs(moment(r, 2 * m + 1)) <= 1e-10);
}

TEST_CASE("even moments match (2m-1)!! while exactness holds") {
  QuadratureRule r = gauss_hermite_normal(7);
  for (int m = 1; 2 * m <= 13; ++m) {
    double truth = double_factorial_odd(m);
    CHECK(std::abs(moment(r, 2 * m) - truth) <= 1e-9 * truth);
  }
}

TEST_CASE("degree-14 moment misses at n=7 (negative control)") {
  QuadratureRule r = gauss_hermite_normal(7);
  double truth = 135135.0;  // 13!!
  double q = moment(r, 14);
  CHECK(std::abs(q - truth) / truth > 1e-4);
}

TEST_CASE("moment properties hold across rule sizes") {
  for (int n : {2, 3, 5, 11, 20}) {
    QuadratureRule r = gauss_hermite_normal(n);
    CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-12);
    for (int m = 1; 2 * m <= 2 * n - 1; ++m) {
      double truth = double_factorial_odd(m);
      CHECK(std::abs(moment(r, 2 * m) - truth) <= 1e-9 * truth);
    }
  }
}

TEST_CASE("lognormal mean integrates to 1e-9 relative accuracy at calibration scale") {
  QuadratureRule r = gauss_hermite_normal(7);
  for (double sigma : {0.0391, 0.0577, std::sqrt(0.5395)}) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      acc += r.weights(i) * std::exp(sigma * r.nodes(i));
    double truth = std::exp(0.5 * sigma * sigma);
    CHECK(std::abs(acc - truth) <= 1e-9 * truth);
  }
}
