#pragma once

#include <cstdint>
#include <vector>

#include "tecrl/common.hpp"
#include "tecrl/env.hpp"
#include "tecrl/rng.hpp"

// Exact solvers on finite MDPs. Terminal states carry no entropy, no reward
// and no continuation value; every quantity below is zero there.

namespace tecrl {

/// pi(a|s), row-major [s][a].
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> prob);

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static TabularPolicy deterministic(const std::vector<std::size_t>& choice, std::size_t n_actions);
  /// Rows drawn from a flat Dirichlet, sharpened by `power` (larger = more peaked).
  static TabularPolicy random(std::size_t n_states, std::size_t n_actions, Rng& rng, double power = 1.0);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a) const { return prob_[s * n_actions_ + a]; }
  const std::vector<double>& prob() const { return prob_; }

  /// -sum_a pi log pi with 0 log 0 = 0.
  double entropy(std::size_t s) const;
  std::vector<double> entropies() const;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> prob_;
};

/// Q(s, a), row-major [s][a].
struct QTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> values;

  QTable() = default;
  QTable(std::size_t ns, std::size_t na, double fill = 0.0) : n_states(ns), n_actions(na), values(ns * na, fill) {}

  double operator()(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
  double& operator()(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
};

double sup_norm_diff(const QTable& a, const QTable& b);

/// Solves Q_e = gamma P (H + Pi Q_e) directly. Throws NumericError if the
/// residual exceeds 1e-10 (relative to max(1, |Q_e|)).
QTable exact_qe(const MdpSpec& mdp, const TabularPolicy& pi);

/// sum_{t=1..T} gamma^t E[H(s_t) | s_0 = s, a_0 = a], by propagating the
/// state occupancy forward T steps. No linear solve involved.
QTable brute_force_qe(const MdpSpec& mdp, const TabularPolicy& pi, std::size_t horizon);

/// Smallest T with gamma^(T+1) h_max / (1 - gamma) <= tol (at least 1).
std::size_t truncation_horizon(double gamma, double h_max, double tol);

/// One application of B_e: gamma P (H + Pi q).
QTable entropy_bellman_apply(const MdpSpec& mdp, const TabularPolicy& pi, const QTable& q);

struct ContractionResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// lhs = |B q1 - B q2|_inf, rhs = gamma |q1 - q2|_inf, holds = lhs <= rhs + 1e-12.
ContractionResult contraction_check(const MdpSpec& mdp, const TabularPolicy& pi, const QTable& q1, const QTable& q2);

/// Per-state discounted entropy from t = 0, solved from h = H + gamma P_pi h.
/// Cross-checked against H + sum_a pi Q_e (throws NumericError past 1e-9).
std::vector<double> trajectory_entropy(const MdpSpec& mdp, const TabularPolicy& pi);

/// sup_s |h(s) - H(s) - sum_a pi(a|s) Q_e(s, a)| between the two linear solves.
double decomposition_gap(const MdpSpec& mdp, const TabularPolicy& pi);

/// Per-state discounted reward return of pi.
std::vector<double> policy_return(const MdpSpec& mdp, const TabularPolicy& pi);

/// Expectation of a per-state vector under the start distribution.
double start_average(const MdpSpec& mdp, const std::vector<double>& v);

struct SoftSolution {
  TabularPolicy policy;
  QTable q_soft;
  double ret = 0.0;      // start-averaged return
  double entropy = 0.0;  // start-averaged trajectory entropy
  std::size_t iterations = 0;
};

/// Soft value iteration to a sup-norm change <= 1e-12, then exact return and
/// trajectory entropy of softmax(Q / alpha).
SoftSolution soft_optimal_solve(const MdpSpec& mdp, double alpha, std::size_t max_iterations = 100000);

/// Budget outside [H(alpha_min), H(alpha_max)].
class InfeasibleBudget : public ContractError {
 public:
  InfeasibleBudget(double budget, double lo, double hi);
  double lo, hi;
};

struct TecSolution {
  TabularPolicy policy;
  double ret = 0.0;
  double entropy = 0.0;
  double alpha = 0.0;
  /// Bisection steps until |H - budget| <= 1e-8 |budget|; refinement
  /// continues past that to the end of the bracket.
  std::size_t steps_to_tolerance = 0;
  std::size_t steps = 0;
};

/// Finds the soft-optimal policy whose trajectory entropy equals h_budget
/// by bisection on log(alpha). Throws ContractError if entropy is not
/// monotone over a 16-point probe grid, InfeasibleBudget if out of range.
TecSolution tec_optimal_solve(const MdpSpec& mdp, double h_budget, double alpha_min = 1e-4, double alpha_max = 1e3);

struct BoundReport {
  double r_tec = 0.0;
  double r_maxent_star = 0.0;
  double alpha_star = 0.0;
  double h_soft_star = 0.0;
  double h_budget = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  std::size_t bisection_steps = 0;
};

/// rhs = R*(alpha*) + alpha* (H*(alpha*) - h_budget); slack = rhs - R_tec(h_budget).
BoundReport bound_check(const MdpSpec& mdp, double alpha_star, double h_budget);

}  // namespace tecrl
