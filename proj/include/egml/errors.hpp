#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

// Exit codes used by the CLI: 0 success, 2 configuration error,
// 3 certification failure, 4 non-convergence, 5 numerical error.

namespace egml {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simplex grid (or similar) would exceed its configured size cap.
class resource_error : public config_error {
 public:
  using config_error::config_error;
};

class certification_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), delta_history(std::move(history)) {}
  std::vector<double> delta_history;
};

class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Observed state transition has zero probability under every
// positively-weighted candidate kernel.
class learning_error : public numerical_error {
 public:
  learning_error(const std::string& what, int z, int z_next, Eigen::VectorXd theta)
      : numerical_error(what), z(z), z_next(z_next), theta(std::move(theta)) {}
  int z;
  int z_next;
  Eigen::VectorXd theta;
};

}  // namespace egml
