#include "requer/commands.hpp"

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "requer/checkpoint.hpp"
#include "requer/config.hpp"
#include "requer/metrics.hpp"
#include "requer/util.hpp"

namespace requer::commands {

namespace {

namespace fs = std::filesystem;

config::RunConfig load_with_overrides(const std::string& config_path,
                                      const Overrides& overrides) {
  config::RunConfig c = config::load_config(config_path);
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.epochs) c.hp.epochs = *overrides.epochs;
  if (overrides.lambda) c.hp.lambda = *overrides.lambda;
  if (overrides.disable_ash) c.disable_ash = *overrides.disable_ash;
  if (overrides.output_dir) c.output_dir = *overrides.output_dir;
  if (c.hp.epochs < 1) throw config::ConfigError("epochs must be >= 1");
  if (c.hp.lambda < 0.0) throw config::ConfigError("lambda must be >= 0");
  return c;
}

std::string checkpoint_path(const std::string& dir, int epoch) {
  return dir + "/checkpoint_epoch_" + std::to_string(epoch) + ".json";
}

policy::PolicyParams initial_theta(const config::RunConfig& c,
                                   const policy::ActionCatalog& catalog,
                                   const std::vector<Sample>& dataset) {
  auto theta = policy::zero_params(c.policy.feature_dim,
                                   static_cast<std::size_t>(catalog.size()),
                                   c.policy.temperature);
  if (!c.demos.empty() && c.hp.warm_start_steps > 0) {
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : dataset) by_id[s.id] = &s;
    std::vector<std::pair<policy::Features, int>> demos;
    for (const auto& [sample_id, action_id] : config::load_demos(c.demos)) {
      auto it = by_id.find(sample_id);
      if (it == by_id.end())
        throw config::ConfigError("demo references unknown sample: " + sample_id);
      if (action_id < 0 || action_id >= catalog.size())
        throw config::ConfigError("demo action id out of catalog range");
      demos.emplace_back(rollout::featurize(*it->second, c.policy.feature_dim),
                         action_id);
    }
    theta = policy::warm_start(theta, demos, c.hp.warm_start_steps,
                               c.hp.warm_start_eta);
  }
  return theta;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const config::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const gateway::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_train(const std::string& config_path,
              const std::optional<std::string>& resume_path,
              const Overrides& overrides) {
  return run_guarded([&]() -> int {
    config::RunConfig c = load_with_overrides(config_path, overrides);
    if (c.dataset.empty())
      throw config::ConfigError("config.dataset: required for train");
    const auto dataset = config::load_samples(c.dataset);
    const auto catalog = config::build_catalog(c.policy);
    const auto hub = config::build_hub(c);
    const auto rollout_config = config::build_rollout_config(c);

    fs::create_directories(c.output_dir);

    policy::PolicyParams theta, theta_old, pi_ref;
    curriculum::CurriculumState state;
    int start_epoch = 0;
    if (resume_path) {
      const auto ckpt = checkpoint::load(*resume_path);
      std::vector<std::string> names;
      for (const auto& a : catalog.actions) names.push_back(a.name);
      if (ckpt.catalog_names != names)
        throw config::ConfigError("resume checkpoint catalog mismatch");
      theta = ckpt.theta;
      theta_old = ckpt.theta_old;
      pi_ref = ckpt.pi_ref;
      state = ckpt.labels;
      start_epoch = ckpt.epoch;
    } else {
      theta = initial_theta(c, catalog, dataset);
      theta_old = theta;
      pi_ref = theta;  // reference is the warm-started snapshot
      std::vector<std::string> ids;
      for (const auto& s : dataset) ids.push_back(s.id);
      state = curriculum::init_labels(c.pool, ids, config::init_mode_of(c),
                                      c.hp.init_label_fixed);
    }

    metrics::MetricsLog log(c.output_dir + "/metrics.log",
                            resume_path.has_value());

    for (int epoch = start_epoch; epoch < c.hp.epochs; ++epoch) {
      const auto result =
          rollout::training_epoch(dataset, theta, theta_old, pi_ref, state,
                                  c.pool, catalog, hub, rollout_config, c.seed,
                                  epoch, &log);
      theta = result.theta;
      theta_old = result.theta_old;

      checkpoint::Checkpoint ckpt;
      ckpt.epoch = epoch + 1;
      ckpt.seed = c.seed;
      ckpt.theta = theta;
      ckpt.theta_old = theta_old;
      ckpt.pi_ref = pi_ref;
      for (const auto& a : catalog.actions) ckpt.catalog_names.push_back(a.name);
      ckpt.labels = state;
      checkpoint::save(ckpt, checkpoint_path(c.output_dir, epoch));
      if (epoch + 1 == c.hp.epochs)
        checkpoint::save(ckpt, c.output_dir + "/checkpoint_final.json");

      std::cout << "epoch " << epoch << "  mean_reward " << std::fixed
                << std::setprecision(4) << result.mean_reward << "  leak_rate "
                << result.leak_rate << "  labels [";
      for (std::size_t i = 0; i < result.snapshot.counts.size(); ++i)
        std::cout << (i ? " " : "") << result.snapshot.counts[i];
      std::cout << "]\n";
    }
    return 0;
  });
}

int cmd_simulate(const std::string& config_path, const Overrides& overrides) {
  return run_guarded([&]() -> int {
    config::RunConfig c = load_with_overrides(config_path, overrides);
    if (c.gateway.klass != "simulator")
      throw config::ConfigError(
          "simulate requires gateway.class == \"simulator\"");
    if (c.dataset.empty())
      throw config::ConfigError("config.dataset: required for simulate");
    const auto dataset = config::load_samples(c.dataset);
    const auto catalog = config::build_catalog(c.policy);
    const auto rollout_config = config::build_rollout_config(c);
    const auto schedule = config::build_schedule(c, catalog);

    fs::create_directories(c.output_dir);
    metrics::MetricsLog log(c.output_dir + "/metrics.log", false);

    const auto result = gateway::run_curriculum_simulation(
        c.pool, c.gateway.competence, catalog, dataset, schedule,
        rollout_config, config::init_mode_of(c), c.hp.epochs, c.seed, &log);

    std::cout << std::setw(6) << "epoch" << std::setw(14) << "mean_reward"
              << std::setw(11) << "leak_rate" << "  label_histogram\n";
    for (std::size_t e = 0; e < result.epochs.size(); ++e) {
      const auto& ep = result.epochs[e];
      std::cout << std::setw(6) << e << std::setw(14) << std::fixed
                << std::setprecision(4) << ep.mean_reward << std::setw(11)
                << ep.leak_rate << "  [";
      for (std::size_t i = 0; i < ep.snapshot.counts.size(); ++i)
        std::cout << (i ? " " : "") << ep.snapshot.counts[i];
      std::cout << "]\n";
    }
    return 0;
  });
}

int cmd_eval(const std::string& config_path, const std::string& mode,
             const Overrides& overrides) {
  return run_guarded([&]() -> int {
    config::RunConfig c = load_with_overrides(config_path, overrides);
    const std::string dataset_path =
        !c.eval_dataset.empty() ? c.eval_dataset : c.dataset;
    if (dataset_path.empty())
      throw config::ConfigError("config.eval_dataset: required for eval");
    const auto samples = config::load_samples(dataset_path);
    const auto catalog = config::build_catalog(c.policy);
    const auto hub = config::build_hub(c);
    const auto rollout_config = config::build_rollout_config(c);
    const auto theta = policy::zero_params(
        c.policy.feature_dim, static_cast<std::size_t>(catalog.size()),
        c.policy.temperature);
    const int rank = overrides.solver_rank.value_or(1);

    fs::create_directories(c.output_dir);
    metrics::MetricsLog log(c.output_dir + "/metrics.log", true);

    if (mode == "avg-at-k") {
      const int k = overrides.k.value_or(4);
      const double temperature = overrides.temperature.value_or(0.6);
      const auto report =
          rollout::avg_at_k(samples, rank, theta, catalog, hub,
                            rollout::RefinerMode::kPolicy, k, temperature, c.seed);
      std::cout << std::left << std::setw(16) << report.metric << std::right
                << std::fixed << std::setprecision(4) << report.value << '\n';
      log.event(0, 0, "eval",
                {{"metric", report.metric}, {"value", report.value}});
    } else if (mode == "cross-model") {
      const auto report = rollout::cross_model_generalization(
          samples, theta, catalog, c.pool, hub, rollout_config, c.seed);
      for (std::size_t i = 0; i < report.per_solver.size(); ++i)
        std::cout << std::left << std::setw(16)
                  << c.pool.entries[i].id << std::right << std::fixed
                  << std::setprecision(4) << report.per_solver[i] << '\n';
      std::cout << std::left << std::setw(16) << "mean" << std::right
                << std::fixed << std::setprecision(4) << report.mean << '\n';
      log.event(0, 0, "eval",
                {{"metric", "cross-model"}, {"value", report.mean}});
    } else if (mode == "length-delta") {
      const auto report = rollout::response_length_delta(samples, rank, theta,
                                                         catalog, hub, c.seed);
      std::cout << std::fixed << std::setprecision(1) << "raw_mean_tokens     "
                << report.raw_mean_tokens << "\nrefined_mean_tokens "
                << report.refined_mean_tokens << "\ndelta_percent       ";
      if (report.delta_percent)
        std::cout << *report.delta_percent << "\n";
      else
        std::cout << "n/a\n";
      log.event(0, 0, "eval",
                {{"metric", "length-delta"},
                 {"raw", report.raw_mean_tokens},
                 {"refined", report.refined_mean_tokens}});
    } else {
      throw config::ConfigError(
          "eval mode must be avg-at-k|cross-model|length-delta");
    }
    return 0;
  });
}

int cmd_leak_check(const std::string& config_path, const std::string& raw_query,
                   const std::string& refined_query,
                   const std::string& gold_answer,
                   std::optional<double> tau_override,
                   std::optional<double> epsilon_override) {
  return run_guarded([&]() -> int {
    config::RunConfig c = config::load_config(config_path);
    const auto hub = config::build_hub(c);
    if (!hub.judge)
      throw config::ConfigError("leak-check requires a configured judge");
    const double tau = tau_override.value_or(c.hp.tau_leak);
    const double eps = epsilon_override.value_or(c.hp.ratio_epsilon);

    const auto raw_scored = hub.judge->score_continuation(
        gateway::judge_context(raw_query), gold_answer);
    const auto refined_scored = hub.judge->score_continuation(
        gateway::judge_context(refined_query), gold_answer);
    const double ppl_raw =
        reward::conditional_perplexity(raw_scored.token_logprobs).ppl;
    const double ppl_refined =
        reward::conditional_perplexity(refined_scored.token_logprobs).ppl;
    const double ratio = reward::leak_ratio(ppl_raw, ppl_refined, eps);
    const int leak = reward::leak_penalty(ratio, tau);

    std::cout << std::fixed << std::setprecision(4) << "ppl_raw     "
              << ppl_raw << "\nppl_refined " << ppl_refined << "\nratio       "
              << ratio << "\ntau         " << tau << "\nverdict     "
              << (leak ? "detected" : "clean") << '\n';
    return 0;  // the verdict is data, not failure
  });
}

int cmd_leak_sweep(const std::string& config_path,
                   const std::string& corpus_path,
                   const std::vector<double>& taus) {
  return run_guarded([&]() -> int {
    config::RunConfig c = config::load_config(config_path);
    const auto hub = config::build_hub(c);
    if (taus.empty())
      throw config::ConfigError("leak-sweep requires at least one tau");
    const auto corpus = config::load_leak_corpus(corpus_path, hub.judge.get(),
                                                 c.hp.ratio_epsilon);
    const auto report = reward::leak_calibration_sweep(corpus, taus);
    std::cout << reward::format_calibration_table(report);

    fs::create_directories(c.output_dir);
    metrics::MetricsLog log(c.output_dir + "/metrics.log", true);
    for (const auto& row : report.rows)
      log.event(0, 0, "leak-sweep",
                {{"tau", row.tau},
                 {"precision", row.precision},
                 {"recall", row.recall},
                 {"f1", row.f1}});
    return 0;
  });
}

int cmd_inspect(const std::string& checkpoint_path) {
  return run_guarded([&]() -> int {
    const auto ckpt = checkpoint::load(checkpoint_path);
    const auto snap = curriculum::snapshot_distribution(ckpt.labels);
    std::cout << "epoch        " << ckpt.epoch << "\nseed         "
              << ckpt.seed << "\nfeature_dim  " << ckpt.theta.feature_dim
              << "\nnum_actions  " << ckpt.theta.num_actions
              << "\ntemperature  " << ckpt.theta.temperature
              << "\nlabel_histogram [";
    for (std::size_t i = 0; i < snap.counts.size(); ++i)
      std::cout << (i ? " " : "") << snap.counts[i];
    std::cout << "]\n";

    // Probe feature vector: bias only.
    policy::Features probe(ckpt.theta.feature_dim, 0.0);
    probe[0] = 1.0;
    const auto probs = policy::action_probabilities(ckpt.theta, probe);
    std::cout << "action_probabilities (bias probe):\n" << std::fixed
              << std::setprecision(4);
    for (std::size_t a = 0; a < probs.size(); ++a) {
      const std::string name = a < ckpt.catalog_names.size()
                                   ? ckpt.catalog_names[a]
                                   : std::to_string(a);
      std::cout << "  " << std::left << std::setw(28) << name << std::right
                << probs[a] << '\n';
    }
    return 0;
  });
}

}  // namespace requer::commands
