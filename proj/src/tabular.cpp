#include "tecrl/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace tecrl {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void check_shapes(const MdpSpec& mdp, const TabularPolicy& pi) {
  if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
    throw ContractError("tabular: policy shape does not match the MDP");
}

void check_shapes(const MdpSpec& mdp, const QTable& q) {
  if (q.n_states != mdp.n_states || q.n_actions != mdp.n_actions)
    throw ContractError("tabular: Q table shape does not match the MDP");
}

/// (S*A) x S transition matrix with terminal rows and columns zeroed.
Mat masked_p(const MdpSpec& mdp) {
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  Mat P = Mat::Zero(static_cast<Eigen::Index>(S * A), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t s2 = 0; s2 < S; ++s2)
        if (!mdp.terminal(s2)) P(static_cast<Eigen::Index>(s * A + a), static_cast<Eigen::Index>(s2)) = mdp.p(s, a, s2);
  }
  return P;
}

/// S x (S*A) averaging matrix: (Pi q)(s) = sum_a pi(a|s) q(s, a).
Mat pi_matrix(const TabularPolicy& pi) {
  const std::size_t S = pi.n_states(), A = pi.n_actions();
  Mat M = Mat::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S * A));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) M(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s * A + a)) = pi(s, a);
  return M;
}

Vec masked_entropy(const MdpSpec& mdp, const TabularPolicy& pi) {
  Vec h(static_cast<Eigen::Index>(mdp.n_states));
  for (std::size_t s = 0; s < mdp.n_states; ++s) h(static_cast<Eigen::Index>(s)) = mdp.terminal(s) ? 0.0 : pi.entropy(s);
  return h;
}

/// S x S state transition matrix under pi (masked).
Mat state_transition(const MdpSpec& mdp, const TabularPolicy& pi) { return pi_matrix(pi) * masked_p(mdp); }

Vec solve_checked(const Mat& M, const Vec& b, const char* what) {
  Eigen::PartialPivLU<Mat> lu(M);
  const Vec x = lu.solve(b);
  if (!x.allFinite()) throw NumericError(std::string(what) + ": singular system");
  const double residual = (M * x - b).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  if (residual > 1e-10 * scale) {
    std::ostringstream os;
    os << what << ": residual " << residual << " exceeds 1e-10";
    throw NumericError(os.str());
  }
  return x;
}

QTable to_q(const MdpSpec& mdp, const Vec& v) {
  QTable q(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < q.values.size(); ++i) q.values[i] = v(static_cast<Eigen::Index>(i));
  return q;
}

Vec to_vec(const QTable& q) { return Eigen::Map<const Vec>(q.values.data(), static_cast<Eigen::Index>(q.values.size())); }

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TabularPolicy::TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> prob)
    : n_states_(n_states), n_actions_(n_actions), prob_(std::move(prob)) {
  if (n_states == 0 || n_actions == 0) throw ContractError("TabularPolicy: empty shape");
  if (prob_.size() != n_states * n_actions) throw ContractError("TabularPolicy: wrong number of probabilities");
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      const double p = (*this)(s, a);
      if (!(p >= 0.0)) throw ContractError("TabularPolicy: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ContractError("TabularPolicy: row does not sum to 1");
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy(n_states, n_actions, std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
}

TabularPolicy TabularPolicy::deterministic(const std::vector<std::size_t>& choice, std::size_t n_actions) {
  std::vector<double> p(choice.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < choice.size(); ++s) {
    if (choice[s] >= n_actions) throw ContractError("TabularPolicy: action index out of range");
    p[s * n_actions + choice[s]] = 1.0;
  }
  return TabularPolicy(choice.size(), n_actions, std::move(p));
}

TabularPolicy TabularPolicy::random(std::size_t n_states, std::size_t n_actions, Rng& rng, double power) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) sum += p[s * n_actions + a] = std::pow(e(rng), power);
    for (std::size_t a = 0; a < n_actions; ++a) p[s * n_actions + a] /= sum;
    // Renormalizing once more pins the row sum to within an ulp of 1.
    double again = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) again += p[s * n_actions + a];
    for (std::size_t a = 0; a < n_actions; ++a) p[s * n_actions + a] /= again;
  }
  return TabularPolicy(n_states, n_actions, std::move(p));
}

double TabularPolicy::entropy(std::size_t s) const {
  double h = 0.0;
  for (std::size_t a = 0; a < n_actions_; ++a) {
    const double p = (*this)(s, a);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> TabularPolicy::entropies() const {
  std::vector<double> h(n_states_);
  for (std::size_t s = 0; s < n_states_; ++s) h[s] = entropy(s);
  return h;
}

double sup_norm_diff(const QTable& a, const QTable& b) {
  if (a.values.size() != b.values.size()) throw ContractError("sup_norm_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

QTable exact_qe(const MdpSpec& mdp, const TabularPolicy& pi) {
  check_shapes(mdp, pi);
  const Mat P = masked_p(mdp);
  const Mat M = Mat::Identity(P.rows(), P.rows()) - mdp.gamma * P * pi_matrix(pi);
  const Vec b = mdp.gamma * P * masked_entropy(mdp, pi);
  return to_q(mdp, solve_checked(M, b, "exact_qe"));
}

std::size_t truncation_horizon(double gamma, double h_max, double tol) {
  if (!(tol > 0.0)) throw ContractError("truncation_horizon: tol must be > 0");
  if (h_max <= 0.0 || gamma == 0.0) return 1;
  // gamma^(T+1) <= tol (1 - gamma) / h_max
  const double t = std::log(tol * (1.0 - gamma) / h_max) / std::log(gamma) - 1.0;
  std::size_t T = t <= 1.0 ? 1 : static_cast<std::size_t>(std::ceil(t));
  while (T > 1 && std::pow(gamma, static_cast<double>(T)) * h_max / (1.0 - gamma) <= tol) --T;
  while (std::pow(gamma, static_cast<double>(T + 1)) * h_max / (1.0 - gamma) > tol) ++T;
  return T;
}

QTable brute_force_qe(const MdpSpec& mdp, const TabularPolicy& pi, std::size_t horizon) {
  check_shapes(mdp, pi);
  if (horizon < 1) throw ContractError("brute_force_qe: horizon must be >= 1");
  const Mat P = masked_p(mdp);
  const Mat Ppi = state_transition(mdp, pi);
  const Vec H = masked_entropy(mdp, pi);
  // occ(sa, s') = discounted probability of being in s' at step t.
  Mat occ = mdp.gamma * P;
  Vec q = Vec::Zero(P.rows());
  for (std::size_t t = 1; t <= horizon; ++t) {
    q += occ * H;
    if (t < horizon) occ = mdp.gamma * occ * Ppi;
  }
  return to_q(mdp, q);
}

QTable entropy_bellman_apply(const MdpSpec& mdp, const TabularPolicy& pi, const QTable& q) {
  check_shapes(mdp, pi);
  check_shapes(mdp, q);
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  // Next-state value H(s') + sum_a' pi q(s', a'), zero at terminals.
  std::vector<double> v(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    double acc = pi.entropy(s);
    for (std::size_t a = 0; a < A; ++a) acc += pi(s, a) * q(s, a);
    v[s] = acc;
  }
  QTable out(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (std::size_t a = 0; a < A; ++a) {
      double acc = 0.0;
      for (std::size_t s2 = 0; s2 < S; ++s2) acc += mdp.p(s, a, s2) * v[s2];
      out(s, a) = mdp.gamma * acc;
    }
  }
  return out;
}

ContractionResult contraction_check(const MdpSpec& mdp, const TabularPolicy& pi, const QTable& q1, const QTable& q2) {
  ContractionResult r;
  r.lhs = sup_norm_diff(entropy_bellman_apply(mdp, pi, q1), entropy_bellman_apply(mdp, pi, q2));
  r.rhs = mdp.gamma * sup_norm_diff(q1, q2);
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

namespace {

Vec solve_trajectory_entropy(const MdpSpec& mdp, const TabularPolicy& pi) {
  check_shapes(mdp, pi);
  const Mat Ppi = state_transition(mdp, pi);
  return solve_checked(Mat::Identity(Ppi.rows(), Ppi.rows()) - mdp.gamma * Ppi, masked_entropy(mdp, pi),
                       "trajectory_entropy");
}

}  // namespace

double decomposition_gap(const MdpSpec& mdp, const TabularPolicy& pi) {
  const Vec h = solve_trajectory_entropy(mdp, pi);
  const Vec via_qe = masked_entropy(mdp, pi) + pi_matrix(pi) * to_vec(exact_qe(mdp, pi));
  return (h - via_qe).lpNorm<Eigen::Infinity>();
}

std::vector<double> trajectory_entropy(const MdpSpec& mdp, const TabularPolicy& pi) {
  const Vec h = solve_trajectory_entropy(mdp, pi);
  const Vec via_qe = masked_entropy(mdp, pi) + pi_matrix(pi) * to_vec(exact_qe(mdp, pi));
  const double gap = (h - via_qe).lpNorm<Eigen::Infinity>();
  if (gap > 1e-9) {
    std::ostringstream os;
    os << "trajectory_entropy: H + sum_a pi Q_e differs from the direct solve by " << gap;
    throw NumericError(os.str());
  }
  return to_std(h);
}

std::vector<double> policy_return(const MdpSpec& mdp, const TabularPolicy& pi) {
  check_shapes(mdp, pi);
  Vec r(static_cast<Eigen::Index>(mdp.n_states));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    if (!mdp.terminal(s))
      for (std::size_t a = 0; a < mdp.n_actions; ++a) acc += pi(s, a) * mdp.r(s, a);
    r(static_cast<Eigen::Index>(s)) = acc;
  }
  const Mat Ppi = state_transition(mdp, pi);
  return to_std(solve_checked(Mat::Identity(Ppi.rows(), Ppi.rows()) - mdp.gamma * Ppi, r, "policy_return"));
}

double start_average(const MdpSpec& mdp, const std::vector<double>& v) {
  const std::vector<double> d = mdp.start_distribution();
  if (d.size() != v.size()) throw ContractError("start_average: size mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) acc += d[s] * v[s];
  return acc;
}

namespace {

/// Softmax of q(s, .) / alpha; terminal rows are uniform (never used).
TabularPolicy softmax_policy(const MdpSpec& mdp, const QTable& q, double alpha) {
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  std::vector<double> p(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) m = std::max(m, q(s, a));
    double sum = 0.0;
    for (std::size_t a = 0; a < A; ++a) sum += p[s * A + a] = std::exp((q(s, a) - m) / alpha);
    for (std::size_t a = 0; a < A; ++a) p[s * A + a] /= sum;
    double again = 0.0;
    for (std::size_t a = 0; a < A; ++a) again += p[s * A + a];
    for (std::size_t a = 0; a < A; ++a) p[s * A + a] /= again;
  }
  return TabularPolicy(S, A, std::move(p));
}

}  // namespace

SoftSolution soft_optimal_solve(const MdpSpec& mdp, double alpha, std::size_t max_iterations) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ContractError("soft_optimal_solve: alpha must be > 0");
  mdp.validate();
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  QTable q(S, A);
  std::vector<double> v(S);
  SoftSolution out;
  double change = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < max_iterations) {
    for (std::size_t s = 0; s < S; ++s) {
      if (mdp.terminal(s)) {
        v[s] = 0.0;
        continue;
      }
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a) m = std::max(m, q(s, a));
      double sum = 0.0;
      for (std::size_t a = 0; a < A; ++a) sum += std::exp((q(s, a) - m) / alpha);
      v[s] = m + alpha * std::log(sum);
    }
    change = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      if (mdp.terminal(s)) continue;
      for (std::size_t a = 0; a < A; ++a) {
        double acc = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) acc += mdp.p(s, a, s2) * v[s2];
        const double next = mdp.r(s, a) + mdp.gamma * acc;
        change = std::max(change, std::abs(next - q(s, a)));
        q(s, a) = next;
      }
    }
    ++it;
    if (change <= 1e-12) break;
  }
  if (change > 1e-12) {
    std::ostringstream os;
    os << "soft_optimal_solve: no convergence after " << it << " iterations (last change " << change << ")";
    throw NumericError(os.str());
  }
  out.q_soft = q;
  out.policy = softmax_policy(mdp, q, alpha);
  out.ret = start_average(mdp, policy_return(mdp, out.policy));
  out.entropy = start_average(mdp, trajectory_entropy(mdp, out.policy));
  out.iterations = it;
  return out;
}

InfeasibleBudget::InfeasibleBudget(double budget, double lo_, double hi_)
    : ContractError([&] {
        std::ostringstream os;
        os.precision(17);
        os << "tec_optimal_solve: budget " << budget << " is infeasible; feasible interval [" << lo_ << ", " << hi_
           << "]";
        return os.str();
      }()),
      lo(lo_),
      hi(hi_) {}

TecSolution tec_optimal_solve(const MdpSpec& mdp, double h_budget, double alpha_min, double alpha_max) {
  if (!(alpha_min > 0.0 && alpha_max > alpha_min)) throw ContractError("tec_optimal_solve: bad alpha range");
  const double lmin = std::log(alpha_min), lmax = std::log(alpha_max);

  constexpr int kProbes = 16;
  constexpr double kMonotoneTol = 1e-9;
  std::vector<double> probe(kProbes);
  for (int k = 0; k < kProbes; ++k) {
    const double la = lmin + (lmax - lmin) * k / (kProbes - 1);
    probe[k] = soft_optimal_solve(mdp, std::exp(la)).entropy;
    if (k > 0 && probe[k] < probe[k - 1] - kMonotoneTol) {
      std::ostringstream os;
      os << "tec_optimal_solve: trajectory entropy is not monotone in alpha (" << probe[k - 1] << " then " << probe[k]
         << ")";
      throw ContractError(os.str());
    }
  }
  const double edge_tol = 1e-8 * std::max(1.0, std::abs(h_budget));
  if (h_budget < probe.front() - edge_tol || h_budget > probe.back() + edge_tol)
    throw InfeasibleBudget(h_budget, probe.front(), probe.back());

  const double tol = 1e-8 * std::abs(h_budget);
  auto finish = [&](const SoftSolution& s, double alpha, std::size_t steps, std::size_t to_tol) {
    TecSolution t;
    t.policy = s.policy;
    t.ret = s.ret;
    t.entropy = s.entropy;
    t.alpha = alpha;
    t.steps = steps;
    t.steps_to_tolerance = to_tol;
    return t;
  };
  // Budgets at the edges of the range resolve to the edge policy.
  if (h_budget <= probe.front()) return finish(soft_optimal_solve(mdp, alpha_min), alpha_min, 0, 0);
  if (h_budget >= probe.back()) return finish(soft_optimal_solve(mdp, alpha_max), alpha_max, 0, 0);

  double lo = lmin, hi = lmax;
  SoftSolution best;
  double best_la = lo, best_gap = std::numeric_limits<double>::infinity();
  std::size_t steps = 0, to_tol = 0;
  while (steps < 200) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++steps;
    SoftSolution s = soft_optimal_solve(mdp, std::exp(mid));
    const double gap = s.entropy - h_budget;
    if (std::abs(gap) < best_gap) {
      best_gap = std::abs(gap);
      best_la = mid;
      best = std::move(s);
    }
    if (to_tol == 0 && std::abs(gap) <= tol) to_tol = steps;
    if (gap == 0.0) break;
    (gap > 0.0 ? hi : lo) = mid;
  }
  if (to_tol == 0) {
    std::ostringstream os;
    os << "tec_optimal_solve: bisection ended " << best_gap << " away from the budget";
    throw NumericError(os.str());
  }
  return finish(best, std::exp(best_la), steps, to_tol);
}

BoundReport bound_check(const MdpSpec& mdp, double alpha_star, double h_budget) {
  const SoftSolution soft = soft_optimal_solve(mdp, alpha_star);
  const TecSolution tec = tec_optimal_solve(mdp, h_budget);
  BoundReport b;
  b.r_tec = tec.ret;
  b.r_maxent_star = soft.ret;
  b.alpha_star = alpha_star;
  b.h_soft_star = soft.entropy;
  b.h_budget = h_budget;
  b.rhs = soft.ret + alpha_star * (soft.entropy - h_budget);
  b.slack = b.rhs - b.r_tec;
  b.bisection_steps = tec.steps_to_tolerance;
  return b;
}

}  // namespace tecrl
