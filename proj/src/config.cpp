#include "egml/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "egml/errors.hpp"

namespace egml {

using nlohmann::json;

void RunConfig::validate() const {
  try {
    model.validate();
    candidates.validate();
  } catch (const std::domain_error& e) {
    throw config_error(e.what());
  }
  if (model.n_states() != candidates.n_states())
    throw config_error("model and candidates disagree on the number of states");
  if (model.state_order != candidates.state_order)
    throw config_error("model and candidates must share state_order");
  if (p_star) {
    if (p_star->rows() != model.n_states() || p_star->cols() != model.n_states())
      throw config_error("candidates.p_star: dimension mismatch");
    for (int r = 0; r < p_star->rows(); ++r) {
      double sum = p_star->row(r).sum();
      if (std::abs(sum - 1.0) > 1e-12 || (p_star->row(r).array() < 0.0).any())
        throw config_error("candidates.p_star: row " + std::to_string(r) + " is not stochastic");
    }
  }
  if (grids.savings_points < 2) throw config_error("grids.savings_points: need at least 2");
  if (!(grids.s_max > 0.0) || !(grids.s_median > 0.0) || !(grids.s_median < grids.s_max))
    throw config_error("grids: need 0 < s_median < s_max");
  if (grids.belief_resolution < 1) throw config_error("grids.belief_resolution: need H >= 1");
  if (grids.quadrature_return < 1 || grids.quadrature_return > 64 ||
      grids.quadrature_income < 1 || grids.quadrature_income > 64)
    throw config_error("grids: quadrature orders must lie in [1, 64]");
  if (!(solver.tolerance > 0.0)) throw config_error("solver.tolerance: must be positive");
  if (solver.max_iterations < 1) throw config_error("solver.max_iterations: must be >= 1");
  if (simulation.n_paths < 1) throw config_error("simulation.n_paths: must be >= 1");
  if (simulation.horizon < 1) throw config_error("simulation.horizon: must be >= 1");
  if (simulation.prior.size() != candidates.n_candidates())
    throw config_error("simulation.prior: length must equal the number of candidates");
  try {
    validate_belief(simulation.prior);
  } catch (const std::domain_error& e) {
    throw config_error(std::string("simulation.prior: ") + e.what());
  }
  if (simulation.initial_wealth && !(*simulation.initial_wealth > 0.0))
    throw config_error("simulation.initial_wealth: must be positive");
  if (simulation.true_kernel_index < 0 ||
      simulation.true_kernel_index >= candidates.n_candidates())
    throw config_error("simulation.true_kernel_index: out of range");
  if (simulation.initial_state &&
      (*simulation.initial_state < 0 || *simulation.initial_state >= model.n_states()))
    throw config_error("simulation.initial_state: out of range");
}

RunConfig preset_paper_2026() {
  RunConfig cfg;
  cfg.model.beta = std::exp(-0.05 / 12.0);
  cfg.model.gamma = 2.0;
  cfg.model.alpha_portfolio = 0.4;
  cfg.model.log_rf = 3.084e-4;
  cfg.model.mu = (Eigen::VectorXd(2) << 7.139e-3, -1.735e-3).finished();
  cfg.model.sigma = (Eigen::VectorXd(2) << 0.0391, 0.0577).finished();
  cfg.model.y_persistent = (Eigen::VectorXd(2) << 1.8539, 0.0165).finished();
  cfg.model.sigma_y2 = 0.5395;
  cfg.model.state_order = {0, 1};  // expansion is the better state

  Eigen::MatrixXd p1(2, 2), p2(2, 2);
  p1 << 0.8, 0.2, 0.3, 0.7;
  p2 << 0.9855, 0.0145, 0.0968, 0.9032;
  cfg.candidates.matrices = {p1, p2};
  cfg.candidates.state_order = cfg.model.state_order;

  cfg.grids = GridConfig{};   // 2000-point savings grid, H = 99, 7-point quadrature
  cfg.solver = SolverConfig{};
  cfg.simulation.prior = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
  cfg.simulation.true_kernel_index = 1;
  return cfg;
}

void apply_reduced(RunConfig& cfg) {
  cfg.grids.savings_points = 200;
  cfg.grids.belief_resolution = 20;
  cfg.simulation.n_paths = 5000;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw config_error(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) fail(where + "." + it.key(), "unknown key");
}

double get_number(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) fail(where + "." + key, "missing");
  if (!obj[key].is_number()) fail(where + "." + key, "expected a number");
  return obj[key].get<double>();
}

long get_integer(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) fail(where + "." + key, "missing");
  if (!obj[key].is_number_integer()) fail(where + "." + key, "expected an integer");
  return obj[key].get<long>();
}

Eigen::VectorXd get_vector(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) fail(where + "." + key, "missing");
  const json& arr = obj[key];
  if (!arr.is_array() || arr.empty()) fail(where + "." + key, "expected a nonempty array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) fail(where + "." + key, "expected numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd get_matrix(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty()) fail(where, "expected a nonempty array of rows");
  const std::size_t rows = arr.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!arr[r].is_array()) fail(where, "expected rows as arrays");
    if (r == 0) cols = arr[r].size();
    if (arr[r].size() != cols) fail(where, "ragged rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (!arr[r][c].is_number()) fail(where, "expected numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = arr[r][c].get<double>();
    }
  return m;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  check_keys(doc, "config",
             {"model", "candidates", "grids", "solver", "simulation", "output"});
  RunConfig cfg;

  if (!doc.contains("model")) fail("config.model", "missing");
  const json& jm = doc["model"];
  check_keys(jm, "model",
             {"beta", "gamma", "alpha_portfolio", "log_rf", "mu", "sigma", "y_persistent",
              "sigma_y2", "state_order"});
  cfg.model.beta = get_number(jm, "model", "beta");
  cfg.model.gamma = get_number(jm, "model", "gamma");
  cfg.model.alpha_portfolio = get_number(jm, "model", "alpha_portfolio");
  cfg.model.log_rf = get_number(jm, "model", "log_rf");
  cfg.model.mu = get_vector(jm, "model", "mu");
  cfg.model.sigma = get_vector(jm, "model", "sigma");
  cfg.model.y_persistent = get_vector(jm, "model", "y_persistent");
  cfg.model.sigma_y2 = get_number(jm, "model", "sigma_y2");
  Eigen::VectorXd order = get_vector(jm, "model", "state_order");
  cfg.model.state_order.resize(order.size());
  for (Eigen::Index i = 0; i < order.size(); ++i) {
    if (order(i) != std::floor(order(i))) fail("model.state_order", "expected integers");
    cfg.model.state_order[i] = static_cast<int>(order(i));
  }

  if (!doc.contains("candidates")) fail("config.candidates", "missing");
  const json& jc = doc["candidates"];
  check_keys(jc, "candidates", {"matrices", "p_star"});
  if (!jc.contains("matrices") || !jc["matrices"].is_array() || jc["matrices"].empty())
    fail("candidates.matrices", "expected a nonempty array of matrices");
  for (std::size_t i = 0; i < jc["matrices"].size(); ++i)
    cfg.candidates.matrices.push_back(
        get_matrix(jc["matrices"][i], "candidates.matrices[" + std::to_string(i) + "]"));
  cfg.candidates.state_order = cfg.model.state_order;
  if (jc.contains("p_star")) cfg.p_star = get_matrix(jc["p_star"], "candidates.p_star");

  if (doc.contains("grids")) {
    const json& jg = doc["grids"];
    check_keys(jg, "grids",
               {"savings_points", "s_max", "s_median", "belief_resolution",
                "quadrature_return", "quadrature_income", "simplex_cap"});
    if (jg.contains("savings_points"))
      cfg.grids.savings_points = static_cast<int>(get_integer(jg, "grids", "savings_points"));
    if (jg.contains("s_max")) cfg.grids.s_max = get_number(jg, "grids", "s_max");
    if (jg.contains("s_median")) cfg.grids.s_median = get_number(jg, "grids", "s_median");
    if (jg.contains("belief_resolution"))
      cfg.grids.belief_resolution = static_cast<int>(get_integer(jg, "grids", "belief_resolution"));
    if (jg.contains("quadrature_return"))
      cfg.grids.quadrature_return = static_cast<int>(get_integer(jg, "grids", "quadrature_return"));
    if (jg.contains("quadrature_income"))
      cfg.grids.quadrature_income = static_cast<int>(get_integer(jg, "grids", "quadrature_income"));
    if (jg.contains("simplex_cap")) cfg.grids.simplex_cap = get_integer(jg, "grids", "simplex_cap");
  }

  if (doc.contains("solver")) {
    const json& js = doc["solver"];
    check_keys(js, "solver", {"tolerance", "max_iterations"});
    if (js.contains("tolerance")) cfg.solver.tolerance = get_number(js, "solver", "tolerance");
    if (js.contains("max_iterations"))
      cfg.solver.max_iterations = get_integer(js, "solver", "max_iterations");
  }

  if (doc.contains("simulation")) {
    const json& js = doc["simulation"];
    check_keys(js, "simulation",
               {"n_paths", "horizon", "prior", "initial_wealth", "initial_state",
                "true_kernel_index", "seed", "rao_blackwell", "dgp", "project_and_propagate"});
    if (js.contains("n_paths")) cfg.simulation.n_paths = get_integer(js, "simulation", "n_paths");
    if (js.contains("horizon"))
      cfg.simulation.horizon = static_cast<int>(get_integer(js, "simulation", "horizon"));
    if (js.contains("prior")) cfg.simulation.prior = get_vector(js, "simulation", "prior");
    if (js.contains("initial_wealth")) {
      if (js["initial_wealth"].is_string()) {
        if (js["initial_wealth"].get<std::string>() != "auto")
          fail("simulation.initial_wealth", "expected a number or \"auto\"");
      } else {
        cfg.simulation.initial_wealth = get_number(js, "simulation", "initial_wealth");
      }
    }
    if (js.contains("initial_state")) {
      if (js["initial_state"].is_string()) {
        if (js["initial_state"].get<std::string>() != "stationary")
          fail("simulation.initial_state", "expected an integer or \"stationary\"");
      } else {
        cfg.simulation.initial_state =
            static_cast<int>(get_integer(js, "simulation", "initial_state"));
      }
    }
    if (js.contains("true_kernel_index"))
      cfg.simulation.true_kernel_index =
          static_cast<int>(get_integer(js, "simulation", "true_kernel_index"));
    if (js.contains("seed"))
      cfg.simulation.seed = static_cast<std::uint64_t>(get_integer(js, "simulation", "seed"));
    if (js.contains("rao_blackwell")) {
      if (!js["rao_blackwell"].is_boolean()) fail("simulation.rao_blackwell", "expected a boolean");
      cfg.simulation.rao_blackwell = js["rao_blackwell"].get<bool>();
    }
    if (js.contains("dgp")) {
      std::string s = js["dgp"].is_string() ? js["dgp"].get<std::string>() : "";
      if (s == "true-kernel") cfg.simulation.dgp = DataGeneratingProcess::kTrueKernel;
      else if (s == "subjective") cfg.simulation.dgp = DataGeneratingProcess::kSubjective;
      else fail("simulation.dgp", "expected \"true-kernel\" or \"subjective\"");
    }
    if (js.contains("project_and_propagate")) {
      if (!js["project_and_propagate"].is_boolean())
        fail("simulation.project_and_propagate", "expected a boolean");
      cfg.simulation.project_and_propagate = js["project_and_propagate"].get<bool>();
    }
  }
  if (cfg.simulation.prior.size() == 0) {
    // Default: uniform prior over the candidates.
    cfg.simulation.prior = Eigen::VectorXd::Constant(
        cfg.candidates.n_candidates(), 1.0 / cfg.candidates.n_candidates());
  }

  if (doc.contains("output")) {
    const json& jo = doc["output"];
    check_keys(jo, "output", {"dir"});
    if (jo.contains("dir")) {
      if (!jo["dir"].is_string()) fail("output.dir", "expected a string");
      cfg.output_dir = jo["dir"].get<std::string>();
    }
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(row);
  }
  return arr;
}

}  // namespace

std::string config_to_json_text(const RunConfig& cfg) {
  json doc;
  json& jm = doc["model"];
  jm["beta"] = cfg.model.beta;
  jm["gamma"] = cfg.model.gamma;
  jm["alpha_portfolio"] = cfg.model.alpha_portfolio;
  jm["log_rf"] = cfg.model.log_rf;
  jm["mu"] = vector_to_json(cfg.model.mu);
  jm["sigma"] = vector_to_json(cfg.model.sigma);
  jm["y_persistent"] = vector_to_json(cfg.model.y_persistent);
  jm["sigma_y2"] = cfg.model.sigma_y2;
  jm["state_order"] = cfg.model.state_order;

  json& jc = doc["candidates"];
  jc["matrices"] = json::array();
  for (const auto& m : cfg.candidates.matrices) jc["matrices"].push_back(matrix_to_json(m));
  if (cfg.p_star) jc["p_star"] = matrix_to_json(*cfg.p_star);

  json& jg = doc["grids"];
  jg["savings_points"] = cfg.grids.savings_points;
  jg["s_max"] = cfg.grids.s_max;
  jg["s_median"] = cfg.grids.s_median;
  jg["belief_resolution"] = cfg.grids.belief_resolution;
  jg["quadrature_return"] = cfg.grids.quadrature_return;
  jg["quadrature_income"] = cfg.grids.quadrature_income;
  jg["simplex_cap"] = cfg.grids.simplex_cap;

  json& js = doc["solver"];
  js["tolerance"] = cfg.solver.tolerance;
  js["max_iterations"] = cfg.solver.max_iterations;

  json& jsim = doc["simulation"];
  jsim["n_paths"] = cfg.simulation.n_paths;
  jsim["horizon"] = cfg.simulation.horizon;
  jsim["prior"] = vector_to_json(cfg.simulation.prior);
  if (cfg.simulation.initial_wealth) jsim["initial_wealth"] = *cfg.simulation.initial_wealth;
  else jsim["initial_wealth"] = "auto";
  if (cfg.simulation.initial_state) jsim["initial_state"] = *cfg.simulation.initial_state;
  else jsim["initial_state"] = "stationary";
  jsim["true_kernel_index"] = cfg.simulation.true_kernel_index;
  jsim["seed"] = cfg.simulation.seed;
  jsim["rao_blackwell"] = cfg.simulation.rao_blackwell;
  jsim["dgp"] = cfg.simulation.dgp == DataGeneratingProcess::kTrueKernel ? "true-kernel" : "subjective";
  jsim["project_and_propagate"] = cfg.simulation.project_and_propagate;

  doc["output"]["dir"] = cfg.output_dir;
  return doc.dump();
}

std::string config_hash(const RunConfig& cfg) {
  // Hash only the blocks the policy depends on, so reseeded simulations can
  // reuse a saved policy.
  json doc = json::parse(config_to_json_text(cfg));
  doc.erase("simulation");
  doc.erase("output");
  std::string text = doc.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

ModelContext build_context(const RunConfig& cfg) {
  cfg.validate();
  QuadratureRule rule_r = gauss_hermite_normal(cfg.grids.quadrature_return);
  QuadratureRule rule_y = gauss_hermite_normal(cfg.grids.quadrature_income);
  StateShockMap shocks = discretize_model(cfg.model, rule_r, rule_y);
  SimplexGrid beliefs(cfg.candidates.n_candidates(), cfg.grids.belief_resolution,
                      cfg.grids.simplex_cap);
  SavingsGrid savings = build_savings_grid(cfg.grids.savings_points, cfg.grids.s_max,
                                           cfg.grids.s_median);
  return make_model_context(CrraUtility(cfg.model.gamma), cfg.candidates, std::move(shocks),
                            std::move(beliefs), std::move(savings));
}

}  // namespace egml
