#include "tecrl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "tecrl/common.hpp"
#include "tecrl/tabular.hpp"

namespace tecrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Rng trial_rng(std::uint64_t seed, std::uint64_t tag, std::size_t trial) {
  return Rng(derive_seed(seed ^ mix64(tag), trial));
}

/// Up to 10 states and 5 actions; a quarter of the draws get one terminal state.
MdpSpec draw_mdp(Rng& rng, double gamma, bool allow_terminal = true) {
  std::uniform_int_distribution<std::size_t> ns(2, 10), na(2, 5);
  const std::size_t S = ns(rng), A = na(rng);
  MdpSpec m = random_mdp(S, A, gamma, rng);
  if (allow_terminal && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.25) {
    m.terminal_mask.assign(S, false);
    m.terminal_mask[std::uniform_int_distribution<std::size_t>(0, S - 1)(rng)] = true;
  }
  return m;
}

TabularPolicy draw_policy(const MdpSpec& m, Rng& rng) {
  static constexpr double kPowers[] = {0.5, 1.0, 3.0};
  const double power = kPowers[std::uniform_int_distribution<int>(0, 2)(rng)];
  return TabularPolicy::random(m.n_states, m.n_actions, rng, power);
}

QTable draw_q(const MdpSpec& m, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  QTable q(m.n_states, m.n_actions);
  for (auto& v : q.values) v = u(rng);
  return q;
}

/// Runs `trial(i)` for i in [0, n) across threads; each returns the trial's
/// slack (allowed - observed). NaN or a thrown error counts as a failure.
PropertyRecord run_property(const std::string& name, std::size_t n, const std::function<double(std::size_t)>& trial) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> slack(n, -kInf);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      slack[i] = trial(i);
    } catch (const std::exception&) {
      slack[i] = -kInf;
    }
  }
  PropertyRecord r;
  r.name = name;
  r.trials = n;
  r.worst_slack = kInf;
  for (const double s : slack) {
    if (!(s >= 0.0)) ++r.failures;
    r.worst_slack = std::isnan(s) ? -kInf : std::min(r.worst_slack, s);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

constexpr double kGammas[] = {0.5, 0.9, 0.99};

void contraction_suite(const VerifyOptions& o, std::vector<PropertyRecord>& out) {
  for (std::size_t g = 0; g < 3; ++g) {
    const double gamma = kGammas[g];
    char name[64];
    std::snprintf(name, sizeof name, "contraction.gamma=%g", gamma);
    out.push_back(run_property(name, o.contraction_trials, [&](std::size_t i) {
      Rng rng = trial_rng(o.seed, 100 + g, i);
      const MdpSpec m = draw_mdp(rng, gamma);
      const TabularPolicy pi = draw_policy(m, rng);
      const QTable q1 = draw_q(m, rng, 50.0);
      QTable q2 = draw_q(m, rng, 50.0);
      // Every tenth trial is the tight constant-shift case.
      if (i % 10 == 0) {
        q2 = q1;
        for (auto& v : q2.values) v += 7.25;
      }
      const ContractionResult c = contraction_check(m, pi, q1, q2);
      return c.rhs + 1e-12 - c.lhs;
    }));
  }
}

void fixed_point_suite(const VerifyOptions& o, std::vector<PropertyRecord>& out) {
  struct Run {
    double rate_slack = kInf;
    double lemma_slack = kInf;
  };
  std::vector<Run> runs(o.fixed_point_trials);
  auto simulate = [&](std::size_t i) -> Run& {
    Run& r = runs[i];
    Rng rng = trial_rng(o.seed, 200, i);
    const double gamma = kGammas[i % 3];
    const MdpSpec m = draw_mdp(rng, gamma);
    const TabularPolicy pi = draw_policy(m, rng);
    const QTable star = exact_qe(m, pi);
    double scale = 1.0;
    for (const double v : star.values) scale = std::max(scale, std::abs(v));
    QTable q = draw_q(m, rng, 100.0);
    const double e0 = sup_norm_diff(q, star);
    double e = e0;
    // Ratios are read only while the error dwarfs solver rounding.
    for (std::size_t k = 1; k <= 20000 && e > 1e-2 * scale; ++k) {
      q = entropy_bellman_apply(m, pi, q);
      const double next = sup_norm_diff(q, star);
      r.rate_slack = std::min(r.rate_slack, gamma + 1e-10 - next / e);
      r.lemma_slack = std::min(r.lemma_slack, std::pow(gamma, static_cast<double>(k)) * e0 + 1e-9 * scale - next);
      e = next;
    }
    return r;
  };
  out.push_back(run_property("fixed-point.rate", runs.size(), [&](std::size_t i) { return simulate(i).rate_slack; }));
  out.push_back(run_property("fixed-point.lemma1", runs.size(), [&](std::size_t i) { return runs[i].lemma_slack; }));
}

void oracle_suite(const VerifyOptions& o, std::vector<PropertyRecord>& out) {
  out.push_back(run_property("oracle-equivalence.brute-force", o.oracle_trials, [&](std::size_t i) {
    Rng rng = trial_rng(o.seed, 300, i);
    const MdpSpec m = draw_mdp(rng, kGammas[i % 3]);
    const TabularPolicy pi = draw_policy(m, rng);
    const std::vector<double> h = pi.entropies();
    const std::size_t T = truncation_horizon(m.gamma, *std::max_element(h.begin(), h.end()), 1e-8);
    return 1e-6 - sup_norm_diff(exact_qe(m, pi), brute_force_qe(m, pi, T));
  }));
  out.push_back(run_property("oracle-equivalence.decomposition", o.oracle_trials, [&](std::size_t i) {
    Rng rng = trial_rng(o.seed, 301, i);
    const MdpSpec m = draw_mdp(rng, kGammas[i % 3]);
    return 1e-9 - decomposition_gap(m, draw_policy(m, rng));
  }));
  out.push_back(run_property("oracle-equivalence.permutation", o.oracle_trials, [&](std::size_t i) {
    Rng rng = trial_rng(o.seed, 302, i);
    const MdpSpec m = draw_mdp(rng, kGammas[i % 3]);
    const TabularPolicy pi = draw_policy(m, rng);
    std::vector<std::size_t> perm(m.n_states);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // State s of the original is state perm[s] of the copy.
    MdpSpec pm = m;
    std::vector<double> pp(m.n_states * m.n_actions);
    if (!m.terminal_mask.empty())
      for (std::size_t s = 0; s < m.n_states; ++s) pm.terminal_mask[perm[s]] = m.terminal_mask[s];
    for (std::size_t s = 0; s < m.n_states; ++s)
      for (std::size_t a = 0; a < m.n_actions; ++a) {
        pm.r(perm[s], a) = m.r(s, a);
        pp[perm[s] * m.n_actions + a] = pi(s, a);
        for (std::size_t s2 = 0; s2 < m.n_states; ++s2) pm.p(perm[s], a, perm[s2]) = m.p(s, a, s2);
      }
    const QTable q = exact_qe(m, pi);
    const QTable pq = exact_qe(pm, TabularPolicy(m.n_states, m.n_actions, pp));
    double worst = 0.0;
    for (std::size_t s = 0; s < m.n_states; ++s)
      for (std::size_t a = 0; a < m.n_actions; ++a) worst = std::max(worst, std::abs(q(s, a) - pq(perm[s], a)));
    return 1e-9 - worst;
  }));
}

void bound_suite(const VerifyOptions& o, std::vector<PropertyRecord>& out) {
  const std::size_t nb = o.bound_budgets;
  const std::size_t n = o.bound_mdps * nb;
  std::vector<BoundReport> reports(n);
  std::vector<char> ok(n, 0);
  const auto t0 = std::chrono::steady_clock::now();
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < o.bound_mdps; ++j) {
    try {
      Rng rng = trial_rng(o.seed, 400, j);
      const MdpSpec m = draw_mdp(rng, 0.9, false);
      const double alpha_star = std::exp(std::uniform_real_distribution<double>(std::log(0.05), std::log(2.0))(rng));
      const double h_star = soft_optimal_solve(m, alpha_star).entropy;
      const double h_min = soft_optimal_solve(m, 1e-4).entropy;
      for (std::size_t k = 0; k < nb; ++k) {
        // Budgets spread over (H_min, H*]; the last one is H* itself.
        const double f = static_cast<double>(k + 1) / static_cast<double>(nb);
        const double h_budget = k + 1 == nb ? h_star : h_min + f * (h_star - h_min);
        reports[j * nb + k] = bound_check(m, alpha_star, h_budget);
        ok[j * nb + k] = 1;
      }
    } catch (const std::exception&) {
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto record = [&](const std::string& name, std::size_t trials, const std::function<double(std::size_t)>& slack) {
    PropertyRecord r = run_property(name, trials, slack);
    r.seconds = elapsed;
    out.push_back(r);
  };
  auto checked = [&](std::size_t i) {
    if (!ok[i]) throw NumericError("bound_check failed");
    return reports[i];
  };
  record("bound.slack", n, [&](std::size_t i) { return checked(i).slack + 1e-8; });
  record("bound.equality", o.bound_mdps, [&](std::size_t j) { return 1e-8 - std::abs(checked(j * nb + nb - 1).slack); });
  record("bound.rhs-monotone", o.bound_mdps, [&](std::size_t j) {
    double worst = kInf;
    for (std::size_t k = 0; k + 1 < nb; ++k)  // budgets rise with k, so the RHS should not
      worst = std::min(worst, checked(j * nb + k).rhs - checked(j * nb + k + 1).rhs);
    return worst;
  });
  record("bound.bisection-steps", n, [&](std::size_t i) { return 60.0 - static_cast<double>(checked(i).bisection_steps); });
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"contraction", "fixed-point", "oracle-equivalence", "bound", "all"};
  return names;
}

std::vector<PropertyRecord> run_verify(const std::string& suite, const VerifyOptions& opts) {
  std::vector<PropertyRecord> out;
  const bool all = suite == "all";
  if (!all && std::find(verify_suites().begin(), verify_suites().end(), suite) == verify_suites().end()) {
    std::string valid;
    for (const auto& s : verify_suites()) valid += (valid.empty() ? "" : ", ") + s;
    throw ContractError("unknown verify suite '" + suite + "'; valid: " + valid);
  }
  if (all || suite == "contraction") contraction_suite(opts, out);
  if (all || suite == "fixed-point") fixed_point_suite(opts, out);
  if (all || suite == "oracle-equivalence") oracle_suite(opts, out);
  if (all || suite == "bound") bound_suite(opts, out);
  return out;
}

nlohmann::json verify_report(const std::vector<PropertyRecord>& records) {
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : records) {
    j["records"].push_back({{"name", r.name},
                            {"trials", r.trials},
                            {"failures", r.failures},
                            {"worst_slack", std::isfinite(r.worst_slack) ? nlohmann::json(r.worst_slack) : nlohmann::json()},
                            {"passed", r.passed()},
                            {"seconds", r.seconds}});
    if (!r.passed()) ++failed;
  }
  j["summary"] = {{"properties", records.size()}, {"failed", failed}, {"passed", failed == 0}};
  return j;
}

}  // namespace tecrl
