#include "egml/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "egml/errors.hpp"
#include "egml/stability.hpp"

namespace egml {

namespace {

double residual_at(const PolicyTable& p, const ModelContext& ctx, double w, int z,
                   Eigen::Index ell, const Eigen::VectorXd& theta) {
  double c = evaluate_policy(p, w, z, ell);
  double s = w - c;
  if (s < 0.0) s = 0.0;
  double rhs = euler_rhs(p, s, z, theta, ctx);
  double lo = ctx.utility.marginal(w);
  double hi = ctx.utility.marginal_at_zero();
  double clamped = std::min(std::max(rhs, lo), hi);
  return 1.0 - ctx.utility.inverse_marginal(clamped) / c;
}

template <typename ProbeFn>
ResidualStats accumulate_residuals(const PolicyTable& p, const ModelContext& ctx,
                                   ProbeFn&& probes_for_cell) {
  const int m = p.n_states();
  const Eigen::Index l = p.belief_count();
  ResidualStats stats;
  stats.max_per_cell.setZero(m, l);
  double total = 0.0;
  for (int z = 0; z < m; ++z) {
    for (Eigen::Index ell = 0; ell < l; ++ell) {
      Eigen::VectorXd theta = ctx.beliefs.point(ell);
      const double wbar = p.first_knot(z, ell);
      Eigen::VectorXd probes = probes_for_cell(z, ell);
      for (Eigen::Index k = 0; k < probes.size(); ++k) {
        double w = probes(k);
        if (!(w > wbar)) continue;  // interior only
        double r = std::abs(residual_at(p, ctx, w, z, ell, theta));
        stats.max_per_cell(z, ell) = std::max(stats.max_per_cell(z, ell), r);
        stats.max_abs = std::max(stats.max_abs, r);
        total += r;
        ++stats.n_interior;
      }
    }
  }
  stats.mean_abs = stats.n_interior > 0 ? total / stats.n_interior : 0.0;
  return stats;
}

}  // namespace

ResidualStats euler_residuals(const PolicyTable& p, const ModelContext& ctx,
                              const Eigen::VectorXd& probe_wealths) {
  return accumulate_residuals(p, ctx, [&](int, Eigen::Index) { return probe_wealths; });
}

ResidualStats euler_residuals_at_knots(const PolicyTable& p, const ModelContext& ctx,
                                       bool include_midpoints) {
  return accumulate_residuals(p, ctx, [&](int z, Eigen::Index ell) {
    const Eigen::Index g = p.knot_count();
    Eigen::VectorXd probes(include_midpoints ? 2 * g - 1 : g);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < g; ++i) {
      probes(k++) = p.wealth[z](i, ell);
      if (include_midpoints && i + 1 < g)
        probes(k++) = 0.5 * (p.wealth[z](i, ell) + p.wealth[z](i + 1, ell));
    }
    return probes;
  });
}

double binding_threshold(const PolicyTable& p, const ModelContext& ctx, int z,
                         Eigen::Index ell) {
  double rhs = euler_rhs(p, 0.0, z, ctx.beliefs.point(ell), ctx);
  double m0 = ctx.utility.marginal_at_zero();
  if (m0 < rhs) rhs = m0;
  return ctx.utility.inverse_marginal(rhs);
}

MpcEstimate asymptotic_mpc(const PolicyTable& p, int z, Eigen::Index ell) {
  const Eigen::Index g = p.knot_count();
  if (g < 10) throw std::domain_error("asymptotic_mpc: need at least 10 knots");
  MpcEstimate est;
  Eigen::Index g0 = static_cast<Eigen::Index>(std::floor(0.9 * (g - 1)));
  if (g0 >= g - 1) g0 = g - 2;
  const auto& w = p.wealth[z];
  const auto& c = p.consumption[z];
  est.top_decile = (c(g - 1, ell) - c(g0, ell)) / (w(g - 1, ell) - w(g0, ell));
  est.top_segment = (c(g - 1, ell) - c(g - 2, ell)) / (w(g - 1, ell) - w(g - 2, ell));
  return est;
}

double evaluate_tabulated(const TabulatedPolicy& p, double w, int z, Eigen::Index ell) {
  const Eigen::VectorXd& nodes = p.wealth_nodes;
  const Eigen::Index n = nodes.size();
  const Eigen::MatrixXd& c = p.consumption[z];
  double value;
  if (w <= nodes(0)) {
    value = c(0, ell) * (w / nodes(0));
  } else if (w >= nodes(n - 1)) {
    value = w == nodes(n - 1)
                ? c(n - 1, ell)
                : c(n - 2, ell) + (c(n - 1, ell) - c(n - 2, ell)) *
                                      ((w - nodes(n - 2)) / (nodes(n - 1) - nodes(n - 2)));
  } else {
    Eigen::Index j = std::lower_bound(nodes.data(), nodes.data() + n, w) - nodes.data();
    if (nodes(j) == w) {
      value = c(j, ell);
    } else {
      value = c(j - 1, ell) +
              (c(j, ell) - c(j - 1, ell)) * ((w - nodes(j - 1)) / (nodes(j) - nodes(j - 1)));
    }
  }
  return std::min(std::max(value, 1e-300), w);
}

namespace {

// Linear interpolation of a value-function column with linear extrapolation
// at both ends.
double interp_value(const Eigen::VectorXd& nodes, const double* v, double w) {
  const Eigen::Index n = nodes.size();
  if (w <= nodes(0)) return v[0] + (v[1] - v[0]) * ((w - nodes(0)) / (nodes(1) - nodes(0)));
  if (w >= nodes(n - 1))
    return v[n - 2] +
           (v[n - 1] - v[n - 2]) * ((w - nodes(n - 2)) / (nodes(n - 1) - nodes(n - 2)));
  Eigen::Index j = std::lower_bound(nodes.data(), nodes.data() + n, w) - nodes.data();
  if (nodes(j) == w) return v[j];
  return v[j - 1] + (v[j] - v[j - 1]) * ((w - nodes(j - 1)) / (nodes(j) - nodes(j - 1)));
}

}  // namespace

BruteForceResult brute_force_policy(const ModelContext& ctx,
                                    const Eigen::VectorXd& wealth_grid,
                                    int n_consumption, double tol, long max_iter) {
  const int m = ctx.n_states();
  const Eigen::Index n_w = wealth_grid.size();
  const Eigen::Index l = ctx.beliefs.size();
  if (n_w < 2) throw std::domain_error("brute_force_policy: need at least 2 wealth nodes");
  if (n_consumption < 2) throw std::domain_error("brute_force_policy: need at least 2 consumption choices");
  for (Eigen::Index i = 1; i < n_w; ++i)
    if (!(wealth_grid(i) > wealth_grid(i - 1)) || !(wealth_grid(0) > 0.0))
      throw std::domain_error("brute_force_policy: wealth grid must be positive and increasing");
  if (static_cast<double>(n_w) * m * l > 1e6)
    throw std::domain_error("brute_force_policy: instance too large for the oracle");

  // V and argmax-c per (wealth node, state, belief).
  std::vector<Eigen::MatrixXd> value(m, Eigen::MatrixXd(n_w, l));
  std::vector<Eigen::MatrixXd> best_c(m, Eigen::MatrixXd(n_w, l));
  for (int z = 0; z < m; ++z)
    for (Eigen::Index ell = 0; ell < l; ++ell)
      for (Eigen::Index i = 0; i < n_w; ++i) value[z](i, ell) = ctx.utility.utility(wealth_grid(i));

  BruteForceResult result;
  auto one_sweep = [&](bool record_argmax) {
    std::vector<Eigen::MatrixXd> next(m, Eigen::MatrixXd(n_w, l));
    double delta = 0.0;
    for (int z = 0; z < m; ++z) {
      for (Eigen::Index ell = 0; ell < l; ++ell) {
        for (Eigen::Index i = 0; i < n_w; ++i) {
          const double w = wealth_grid(i);
          double best = -std::numeric_limits<double>::infinity();
          double best_choice = w;
          for (int j = 1; j <= n_consumption; ++j) {
            double c = w * (static_cast<double>(j) / n_consumption);
            double s = w - c;
            double ev = 0.0;
            for (int zn = 0; zn < m; ++zn) {
              double weight = ctx.mixture_row[z](ell, zn);
              if (weight == 0.0) continue;
              int idx = ctx.posterior_index[static_cast<std::size_t>(z) * m + zn](ell);
              const StateAtoms& at = ctx.shocks.states[zn];
              double inner = 0.0;
              for (Eigen::Index a = 0; a < at.size(); ++a) {
                double w_next = at.gross_return(a) * s + at.income(a);
                inner += at.prob(a) * at.discount(a) *
                         interp_value(wealth_grid, value[zn].col(idx).data(), w_next);
              }
              ev += weight * inner;
            }
            double total = ctx.utility.utility(c) + ev;
            if (total > best) {
              best = total;
              best_choice = c;
            }
          }
          next[z](i, ell) = best;
          if (record_argmax) best_c[z](i, ell) = best_choice;
          delta = std::max(delta, std::abs(best - value[z](i, ell)));
        }
      }
    }
    value.swap(next);
    return delta;
  };

  for (long it = 1; it <= max_iter; ++it) {
    double delta = one_sweep(false);
    result.deltas.push_back(delta);
    result.iterations = it;
    if (delta < tol) {
      one_sweep(true);
      result.policy.wealth_nodes = wealth_grid;
      result.policy.consumption = std::move(best_c);
      return result;
    }
  }
  throw numerical_error("brute_force_policy: value iteration did not converge after " +
                        std::to_string(max_iter) + " sweeps");
}

PolicyGap compare_policies(const PolicyTable& a, const TabulatedPolicy& b,
                           const ModelContext& ctx, const Eigen::VectorXd& probes) {
  PolicyGap gap;
  const int m = a.n_states();
  const Eigen::Index l = a.belief_count();
  for (int z = 0; z < m; ++z)
    for (Eigen::Index ell = 0; ell < l; ++ell)
      for (Eigen::Index k = 0; k < probes.size(); ++k) {
        double ca = evaluate_policy(a, probes(k), z, ell);
        double cb = evaluate_tabulated(b, probes(k), z, ell);
        gap.sup_consumption = std::max(gap.sup_consumption, std::abs(ca - cb));
        gap.sup_marginal_utility =
            std::max(gap.sup_marginal_utility,
                     std::abs(ctx.utility.marginal(ca) - ctx.utility.marginal(cb)));
      }
  return gap;
}

PolicyCertification certify_policy(const PolicyTable& p, const ModelContext& ctx) {
  PolicyCertification cert;
  const int m = p.n_states();
  const Eigen::Index l = p.belief_count();
  const Eigen::Index g = p.knot_count();

  cert.consumption_monotone = true;
  cert.savings_monotone = true;
  cert.concave = true;
  cert.slope_cap_ok = true;
  cert.evaluation_monotone = true;
  for (int z = 0; z < m; ++z) {
    for (Eigen::Index ell = 0; ell < l; ++ell) {
      double prev_slope = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k + 1 < g; ++k) {
        double dc = p.consumption[z](k + 1, ell) - p.consumption[z](k, ell);
        double dw = p.wealth[z](k + 1, ell) - p.wealth[z](k, ell);
        double ds = (p.wealth[z](k + 1, ell) - p.consumption[z](k + 1, ell)) -
                    (p.wealth[z](k, ell) - p.consumption[z](k, ell));
        if (dc < -1e-10) cert.consumption_monotone = false;
        if (ds < -1e-10) cert.savings_monotone = false;
        double slope = dc / dw;
        if (slope < 0.0 || slope > 1.0 + 1e-10) cert.slope_cap_ok = false;
        if (slope > prev_slope + 1e-8) cert.concave = false;
        prev_slope = slope;
      }
      // 1000-point evaluation probe across the knot span.
      double w_lo = 0.5 * p.first_knot(z, ell);
      double w_hi = p.wealth[z](g - 1, ell);
      double prev_c = 0.0;
      for (int k = 0; k < 1000; ++k) {
        double w = w_lo + (w_hi - w_lo) * (static_cast<double>(k) / 999.0);
        double c = evaluate_policy(p, w, z, ell);
        if (k > 0 && c < prev_c - 1e-10) cert.evaluation_monotone = false;
        prev_c = c;
      }
    }
  }

  // Threshold consistency: the Prop.-6 formula evaluated on p equals, by the
  // EGM identity at s = 0, the first knot of one further sweep; against p's
  // own stored first knot it agrees at convergence-tolerance scale.
  cert.binding_thresholds.resize(m, l);
  cert.mpc_top_decile.resize(m, l);
  cert.mpc_top_segment.resize(m, l);
  PolicyTable refreshed = egm_step(p, ctx);
  cert.threshold_consistent = true;
  for (int z = 0; z < m; ++z)
    for (Eigen::Index ell = 0; ell < l; ++ell) {
      double wbar = binding_threshold(p, ctx, z, ell);
      cert.binding_thresholds(z, ell) = wbar;
      cert.threshold_gap_refreshed =
          std::max(cert.threshold_gap_refreshed, std::abs(wbar - refreshed.first_knot(z, ell)));
      cert.threshold_gap_table =
          std::max(cert.threshold_gap_table, std::abs(wbar - p.first_knot(z, ell)));
      MpcEstimate mpc = asymptotic_mpc(p, z, ell);
      cert.mpc_top_decile(z, ell) = mpc.top_decile;
      cert.mpc_top_segment(z, ell) = mpc.top_segment;
    }
  if (cert.threshold_gap_refreshed > 1e-10) cert.threshold_consistent = false;

  cert.s_bar = consumption_lower_bound_certificate(ctx.candidates, ctx.shocks, ctx.utility);
  cert.lower_bound_ok = true;
  if (cert.s_bar) {
    double share = 1.0 - *cert.s_bar;
    for (int z = 0; z < m && cert.lower_bound_ok; ++z)
      for (Eigen::Index ell = 0; ell < l && cert.lower_bound_ok; ++ell)
        for (Eigen::Index k = 0; k < g; ++k)
          if (p.consumption[z](k, ell) < share * p.wealth[z](k, ell) - 1e-8) {
            cert.lower_bound_ok = false;
            break;
          }
  }

  cert.residuals = euler_residuals_at_knots(p, ctx, false);
  return cert;
}

bool pointwise_weakly_higher(const PolicyTable& a, const PolicyTable& b,
                             const Eigen::VectorXd& probes, double tol) {
  const int m = a.n_states();
  const Eigen::Index l = a.belief_count();
  if (b.n_states() != m || b.belief_count() != l)
    throw std::domain_error("pointwise_weakly_higher: shape mismatch");
  for (int z = 0; z < m; ++z)
    for (Eigen::Index ell = 0; ell < l; ++ell)
      for (Eigen::Index k = 0; k < probes.size(); ++k)
        if (evaluate_policy(a, probes(k), z, ell) < evaluate_policy(b, probes(k), z, ell) - tol)
          return false;
  return true;
}

}  // namespace egml
