#include "tecrl/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tecrl/replay.hpp"

namespace tecrl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void mean_std(const std::vector<double>& v, double& mean, double& std) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / static_cast<double>(v.size()));
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_rho(double rho) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rho);
  return buf;
}

}  // namespace

EvalResult evaluate(const ActionFn& act, Env& env, std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0) throw ContractError("evaluate: n_episodes must be >= 1");
  Rng episode_seeds = make_rng(seed, Stream::kEvalEnv);
  EvalResult r;
  r.returns.reserve(n_episodes);
  for (std::size_t k = 0; k < n_episodes; ++k) {
    std::vector<double> obs = env.reset(episode_seeds());
    double ret = 0.0;
    while (!env.episode_over()) {
      const Transition t = env.step(act(obs));
      ret += t.reward;
      obs = t.next_state;
    }
    r.returns.push_back(ret);
  }
  mean_std(r.returns, r.mean, r.std);
  return r;
}

EvalResult evaluate(const GaussianPolicy& policy, Env& env, std::size_t n_episodes, std::uint64_t seed) {
  return evaluate([&](std::span<const double> s) { return policy.deterministic_action(s); }, env, n_episodes, seed);
}

void write_metrics_header(std::ostream& os, const MetricsMeta& m) {
  os << "# tecrl-metrics v" << kMetricsVersion << " algo=" << m.algo << " env=" << m.env << " seed=" << m.seed
     << " total_iterations=" << m.total_iterations << " eval_interval=" << m.eval_interval << '\n'
     << "iteration,eval_mean_return,eval_std_return,alpha,cumulative_entropy_estimate,step_entropy,"
        "loss_pev,loss_pis,loss_pim,loss_tup\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  os << r.iteration << ',' << fmt(r.eval_mean_return) << ',' << fmt(r.eval_std_return) << ',' << fmt(r.alpha) << ','
     << fmt(r.cumulative_entropy_estimate) << ',' << fmt(r.step_entropy) << ',' << fmt(r.loss_pev) << ','
     << fmt(r.loss_pis) << ',' << fmt(r.loss_pim) << ',' << fmt(r.loss_tup) << '\n';
}

MetricsFile read_metrics(std::istream& is) {
  MetricsFile f;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# tecrl-metrics v", 0) != 0)
    throw ContractError("metrics: missing '# tecrl-metrics' header");
  std::istringstream head(line.substr(2));
  std::string tok;
  head >> tok;  // tecrl-metrics
  head >> tok;
  if (tok != "v" + std::to_string(kMetricsVersion)) throw ContractError("metrics: unsupported version " + tok);
  while (head >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "algo") f.meta.algo = v;
    else if (k == "env") f.meta.env = v;
    else if (k == "seed") f.meta.seed = std::stoull(v);
    else if (k == "total_iterations") f.meta.total_iterations = std::stoull(v);
    else if (k == "eval_interval") f.meta.eval_interval = std::stoull(v);
  }
  if (!std::getline(is, line) || line.rfind("iteration,", 0) != 0) throw ContractError("metrics: missing column row");
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream row(line);
    std::string cell;
    MetricsRow r;
    bool first = true;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      if (first) {
        r.iteration = std::strtoull(cell.c_str(), &end, 10);
        first = false;
      } else {
        v.push_back(std::strtod(cell.c_str(), &end));
      }
      if (end == cell.c_str() || *end != '\0') throw ContractError("metrics: bad cell on line " + std::to_string(lineno));
    }
    if (v.size() != 9) throw ContractError("metrics: wrong column count on line " + std::to_string(lineno));
    r.eval_mean_return = v[0];
    r.eval_std_return = v[1];
    r.alpha = v[2];
    r.cumulative_entropy_estimate = v[3];
    r.step_entropy = v[4];
    r.loss_pev = v[5];
    r.loss_pis = v[6];
    r.loss_pim = v[7];
    r.loss_tup = v[8];
    f.rows.push_back(r);
  }
  return f;
}

MetricsFile read_metrics(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ContractError("cannot open " + path.string());
  return read_metrics(is);
}

double run_score(const std::vector<MetricsRow>& rows, std::uint64_t total) {
  // Window [0.9 total, total] in exact integer arithmetic.
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& r : rows) {
    if (r.iteration * 10 >= total * 9 && r.iteration <= total) {
      best = std::max(best, r.eval_mean_return);
      any = true;
    }
  }
  if (!any)
    throw ContractError("final_score: no evaluation inside the final 10% window of " + std::to_string(total) +
                        " iterations");
  return best;
}

FinalScore final_score(const std::vector<std::vector<MetricsRow>>& runs, std::uint64_t total) {
  if (runs.empty()) throw ContractError("final_score: no runs");
  FinalScore s;
  for (const auto& r : runs) s.per_seed.push_back(run_score(r, total));
  mean_std(s.per_seed, s.mean, s.std);
  return s;
}

nlohmann::json to_json(const FinalScore& s) {
  return {{"per_seed", s.per_seed}, {"mean", s.mean}, {"std", s.std}, {"seeds", s.per_seed.size()}};
}

TrainingOutput run_training(const AgentConfig& cfg, const std::filesystem::path& out_dir, std::ostream* progress) {
  cfg.validate();
  auto env = make_env(cfg.env, cfg.env_overrides);
  auto eval_env = make_env(cfg.env, cfg.env_overrides);
  TrainingOutput out;
  out.agent = make_agent(cfg, env->spec());
  Agent& agent = *out.agent;
  ReplayBuffer buffer(cfg.buffer, env->spec().state_dim, env->spec().action_dim);
  TrainState state(cfg.seed);

  out.min_alpha = agent.alpha();

  std::ostringstream csv;
  write_metrics_header(csv, {to_string(cfg.algo), cfg.env, cfg.seed, cfg.total_iterations, cfg.eval_interval});

  while (state.iteration < cfg.total_iterations) {
    train_iteration(agent, *env, buffer, state);
    out.min_alpha = std::min(out.min_alpha, agent.alpha());
    if (state.iteration % cfg.eval_interval != 0) continue;

    const EvalResult ev = evaluate(agent.policy(), *eval_env, cfg.eval_episodes, cfg.seed);
    UpdateLog& log = agent.log();
    const double nc = static_cast<double>(log.critic_updates);
    const double np = static_cast<double>(log.policy_updates);
    MetricsRow row;
    row.iteration = state.iteration;
    row.eval_mean_return = ev.mean;
    row.eval_std_return = ev.std;
    row.alpha = agent.alpha();
    row.cumulative_entropy_estimate = np > 0 && cfg.algo == Algo::kTecrl ? log.cum_entropy / np : kNaN;
    row.step_entropy = np > 0 ? log.step_entropy / np : kNaN;
    row.loss_pev = nc > 0 ? log.pev / nc : kNaN;
    row.loss_pis = nc > 0 && cfg.algo == Algo::kTecrl ? log.pis / nc : kNaN;
    row.loss_pim = np > 0 ? log.pim / np : kNaN;
    row.loss_tup = np > 0 ? log.tup / np : kNaN;
    log.clear();
    write_metrics_row(csv, row);
    out.rows.push_back(row);
    if (progress) {
      *progress << to_string(cfg.algo) << ' ' << cfg.env << " seed " << cfg.seed << " iter " << row.iteration
                << " return " << ev.mean << " alpha " << row.alpha << " H_cum " << row.cumulative_entropy_estimate
                << '\n'
                << std::flush;
    }
  }
  out.csv = csv.str();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "metrics.csv", std::ios::binary) << out.csv;
    std::ofstream(out_dir / "config.txt") << to_text(cfg);
    std::vector<Record> records;
    agent.save(records);
    std::ofstream ck(out_dir / "checkpoint.bin", std::ios::binary);
    write_checkpoint(ck, records);
    try {
      const FinalScore s = final_score({out.rows}, cfg.total_iterations);
      std::ofstream(out_dir / "score.json") << to_json(s).dump(2) << '\n';
    } catch (const ContractError& e) {
      if (progress) *progress << "no score.json: " << e.what() << '\n';
    }
  }
  return out;
}

std::vector<SweepRow> sweep_rho(const AgentConfig& base, const std::vector<double>& rhos,
                                const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                std::ostream* progress) {
  if (rhos.empty() || seeds.empty()) throw ContractError("sweep_rho: need at least one rho and one seed");
  for (const double r : rhos) {
    AgentConfig probe = base;
    probe.rho = r;
    probe.validate();
  }
  const std::size_t n = rhos.size() * seeds.size();
  std::vector<std::vector<MetricsRow>> runs(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    AgentConfig cfg = base;
    cfg.rho = rhos[i / seeds.size()];
    cfg.seed = seeds[i % seeds.size()];
    const std::filesystem::path dir =
        out_dir.empty() ? std::filesystem::path{}
                        : out_dir / ("rho_" + fmt_rho(cfg.rho)) / ("seed_" + std::to_string(cfg.seed));
    try {
      runs[i] = run_training(cfg, dir).rows;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw NumericError("sweep_rho: run " + std::to_string(i) + " failed: " + errors[i]);

  std::vector<SweepRow> table;
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    std::vector<std::vector<MetricsRow>> group(runs.begin() + static_cast<std::ptrdiff_t>(k * seeds.size()),
                                               runs.begin() + static_cast<std::ptrdiff_t>((k + 1) * seeds.size()));
    table.push_back({rhos[k], final_score(group, base.total_iterations)});
    if (progress)
      *progress << "rho " << rhos[k] << ": " << table.back().score.mean << " +- " << table.back().score.std << '\n';
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir / "sweep.csv");
    write_sweep_csv(csv, table);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : table) {
      nlohmann::json r = to_json(row.score);
      r["rho"] = row.rho;
      j.push_back(r);
    }
    std::ofstream(out_dir / "sweep.json") << j.dump(2) << '\n';
  }
  return table;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "rho,seeds,final_score_mean,final_score_std\n";
  for (const auto& r : rows)
    os << fmt(r.rho) << ',' << r.score.per_seed.size() << ',' << fmt(r.score.mean) << ',' << fmt(r.score.std) << '\n';
}

}  // namespace tecrl
