#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "requer/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"requer: query-refinement training and evaluation harness"};
  app.require_subcommand(1);

  requer::commands::Overrides overrides;
  std::string config_path, resume_path, eval_mode, corpus_path;
  std::string raw_query, refined_query, gold_answer, ckpt_path;
  std::vector<double> taus;
  double tau = -1.0, epsilon = -1.0;
  std::uint64_t seed = 0;
  int epochs = 0, k = 0, solver_rank = 0;
  double lambda = -1.0, temperature = -1.0;
  bool disable_ash = false;
  std::string output_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override config seed");
    cmd->add_option("--epochs", epochs, "override epoch count");
    cmd->add_option("--lambda", lambda, "override leak penalty coefficient");
    cmd->add_flag("--no-ash", disable_ash, "freeze curriculum labels");
    cmd->add_option("--output-dir", output_dir, "override output directory");
  };

  auto* train = app.add_subcommand("train", "run the GRPO training loop");
  train->add_option("config", config_path, "run config file")->required();
  train->add_option("--resume", resume_path, "checkpoint to resume from");
  add_common(train);

  auto* simulate =
      app.add_subcommand("simulate", "curriculum dynamics against the simulator");
  simulate->add_option("config", config_path, "run config file")->required();
  add_common(simulate);

  auto* eval = app.add_subcommand("eval", "evaluation protocols");
  eval->add_option("config", config_path, "run config file")->required();
  eval->add_option("mode", eval_mode, "avg-at-k | cross-model | length-delta")
      ->required();
  eval->add_option("-k", k, "trials per sample for avg-at-k");
  eval->add_option("--temperature", temperature, "solver sampling temperature");
  eval->add_option("--solver-rank", solver_rank, "solver rank to evaluate");
  add_common(eval);

  auto* leak_check =
      app.add_subcommand("leak-check", "score one raw/refined pair");
  leak_check->add_option("config", config_path, "run config file")->required();
  leak_check->add_option("--raw", raw_query, "raw query")->required();
  leak_check->add_option("--refined", refined_query, "refined query")->required();
  leak_check->add_option("--gold", gold_answer, "gold answer")->required();
  leak_check->add_option("--tau", tau, "leak threshold");
  leak_check->add_option("--epsilon", epsilon, "ratio denominator epsilon");

  auto* leak_sweep =
      app.add_subcommand("leak-sweep", "threshold calibration over a corpus");
  leak_sweep->add_option("config", config_path, "run config file")->required();
  leak_sweep->add_option("corpus", corpus_path, "labeled corpus (jsonl)")
      ->required();
  leak_sweep->add_option("--tau", taus, "thresholds to sweep")->required();

  auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint");
  inspect->add_option("checkpoint", ckpt_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  auto fill = [&](CLI::App* cmd) {
    if (cmd->count("--seed")) overrides.seed = seed;
    if (cmd->count("--epochs")) overrides.epochs = epochs;
    if (cmd->count("--lambda")) overrides.lambda = lambda;
    if (cmd->count("--no-ash")) overrides.disable_ash = true;
    if (cmd->count("--output-dir")) overrides.output_dir = output_dir;
  };

  if (train->parsed()) {
    fill(train);
    std::optional<std::string> resume;
    if (train->count("--resume")) resume = resume_path;
    return requer::commands::cmd_train(config_path, resume, overrides);
  }
  if (simulate->parsed()) {
    fill(simulate);
    return requer::commands::cmd_simulate(config_path, overrides);
  }
  if (eval->parsed()) {
    fill(eval);
    if (eval->count("-k")) overrides.k = k;
    if (eval->count("--temperature")) overrides.temperature = temperature;
    if (eval->count("--solver-rank")) overrides.solver_rank = solver_rank;
    return requer::commands::cmd_eval(config_path, eval_mode, overrides);
  }
  if (leak_check->parsed()) {
    std::optional<double> tau_opt, eps_opt;
    if (leak_check->count("--tau")) tau_opt = tau;
    if (leak_check->count("--epsilon")) eps_opt = epsilon;
    return requer::commands::cmd_leak_check(config_path, raw_query,
                                            refined_query, gold_answer, tau_opt,
                                            eps_opt);
  }
  if (leak_sweep->parsed())
    return requer::commands::cmd_leak_sweep(config_path, corpus_path, taus);
  if (inspect->parsed()) return requer::commands::cmd_inspect(ckpt_path);
  return 2;
}
