// Command-line driver: train, eval, verify, score, sweep-rho.
//
// Exit codes: 0 success, 1 configuration or usage error (also any runtime
// failure), 2 verification failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tecrl/harness.hpp"
#include "tecrl/verify.hpp"

namespace {

using namespace tecrl;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kVerifyFailed = 2;

/// "0..4" or "0,2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const std::uint64_t lo = std::stoull(text.substr(0, dots)), hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw ContractError("seed range '" + text + "' is empty");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoull(tok));
  if (out.empty()) throw ContractError("no seeds given");
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(tok, &used));
    if (used != tok.size()) throw ContractError("bad number '" + tok + "'");
  }
  return out;
}

AgentConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  AgentConfig cfg = path.empty() ? AgentConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ContractError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    set_config_key(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream os(path);
    if (!os) throw ContractError("cannot write " + path);
    os << j.dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory entropy-constrained actor-critic: training, evaluation and exact verification"};
  app.require_subcommand(1);

  std::string config_path, out, seeds_text, checkpoint, suite = "all", rhos_text = "1,10,20,30", out_json;
  std::vector<std::string> sets, csvs;
  std::uint64_t seed = 0, total = 0;
  std::size_t episodes = 10;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "Train one or more seeds and write metrics, checkpoints and scores");
  train->add_option("-c,--config", config_path, "Config file (key = value)");
  train->add_option("--set", sets, "Override a key, e.g. --set rho=10");
  train->add_option("--seeds", seeds_text, "Seeds as 0..4 or 0,3 (default: the config seed)");
  train->add_option("-o,--out", out, "Output directory")->required();
  train->add_flag("-q,--quiet", quiet, "No progress lines");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint's deterministic policy");
  eval->add_option("-c,--config", config_path, "Config the checkpoint was trained with")->required();
  eval->add_option("--set", sets, "Override a key");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  eval->add_option("-n,--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("-o,--out", out_json, "Write JSON here instead of stdout");

  auto* verify = app.add_subcommand("verify", "Run the exact tabular verification suites");
  verify->add_option("-s,--suite", suite, "contraction | fixed-point | oracle-equivalence | bound | all");
  verify->add_option("--seed", seed, "Seed for the random draws");
  verify->add_option("-o,--out", out_json, "Write the JSON report here instead of stdout");

  auto* score = app.add_subcommand("score", "Recompute FinalScore from metrics CSVs (one per seed)");
  score->add_option("csv", csvs, "metrics.csv files")->required();
  score->add_option("--total", total, "Total iterations (default: from the CSV header)");
  score->add_option("-o,--out", out_json, "Write JSON here instead of stdout");

  auto* sweep = app.add_subcommand("sweep-rho", "FinalScore table over entropy scaling factors");
  sweep->add_option("-c,--config", config_path, "Base config");
  sweep->add_option("--set", sets, "Override a key");
  sweep->add_option("--rhos", rhos_text, "Comma-separated rho values");
  sweep->add_option("--seeds", seeds_text, "Seeds (default 0..4)");
  sweep->add_option("-o,--out", out, "Output directory")->required();
  sweep->add_flag("-q,--quiet", quiet, "No progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    std::ostream* progress = quiet ? nullptr : &std::cerr;
    if (*train) {
      const AgentConfig cfg = build_config(config_path, sets);
      const std::vector<std::uint64_t> seeds = seeds_text.empty() ? std::vector{cfg.seed} : parse_seeds(seeds_text);
      if (seeds.size() == 1) {
        AgentConfig c = cfg;
        c.seed = seeds[0];
        run_training(c, out, progress);
        return kOk;
      }
      std::vector<std::vector<MetricsRow>> runs(seeds.size());
      std::vector<std::string> errors(seeds.size());
#pragma omp parallel for schedule(dynamic)
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        AgentConfig c = cfg;
        c.seed = seeds[i];
        try {
          runs[i] = run_training(c, std::filesystem::path(out) / ("seed_" + std::to_string(c.seed))).rows;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
      for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
      write_json(to_json(final_score(runs, cfg.total_iterations)), (std::filesystem::path(out) / "score.json").string());
      return kOk;
    }
    if (*eval) {
      const AgentConfig cfg = build_config(config_path, sets);
      auto env = make_env(cfg.env, cfg.env_overrides);
      auto agent = make_agent(cfg, env->spec());
      std::ifstream is(checkpoint, std::ios::binary);
      if (!is) throw ContractError("cannot open " + checkpoint);
      agent->load(read_checkpoint(is));
      const EvalResult r = evaluate(agent->policy(), *env, episodes, seed);
      write_json({{"mean", r.mean}, {"std", r.std}, {"returns", r.returns}}, out_json);
      return kOk;
    }
    if (*verify) {
      VerifyOptions opts;
      opts.seed = seed;
      const auto records = run_verify(suite, opts);
      const nlohmann::json report = verify_report(records);
      write_json(report, out_json);
      for (const auto& r : records)
        std::cerr << (r.passed() ? "PASS " : "FAIL ") << r.name << " trials=" << r.trials << " failures=" << r.failures
                  << " worst_slack=" << r.worst_slack << '\n';
      std::cerr << "summary: " << report["summary"].dump() << '\n';
      return report["summary"]["passed"].get<bool>() ? kOk : kVerifyFailed;
    }
    if (*score) {
      std::vector<std::vector<MetricsRow>> runs;
      std::uint64_t t = total;
      for (const auto& path : csvs) {
        MetricsFile f = read_metrics(std::filesystem::path(path));
        if (total == 0) {
          if (t != 0 && f.meta.total_iterations != t) throw ContractError("CSV files disagree on total_iterations");
          t = f.meta.total_iterations;
        }
        runs.push_back(std::move(f.rows));
      }
      write_json(to_json(final_score(runs, t)), out_json);
      return kOk;
    }
    if (*sweep) {
      const AgentConfig cfg = build_config(config_path, sets);
      const auto rhos = parse_list(rhos_text);
      const auto seeds = parse_seeds(seeds_text.empty() ? "0..4" : seeds_text);
      const auto table = sweep_rho(cfg, rhos, seeds, out, progress);
      write_sweep_csv(std::cout, table);
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
