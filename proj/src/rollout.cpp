#include "requer/rollout.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <stdexcept>

#include "requer/metrics.hpp"
#include "requer/util.hpp"

namespace requer::rollout {

Features featurize(const Sample& sample, std::size_t dim) {
  if (dim < 1) throw std::invalid_argument("featurize: dim must be >= 1");
  Features f(dim, 0.0);
  f[0] = 1.0;  // bias
  if (dim > 1) {
    const double len = static_cast<double>(
        std::min<std::size_t>(sample.question.size(), 400));
    f[1] = len / 400.0;
  }
  if (!sample.tags.empty()) {
    std::string joined;
    for (const auto& t : sample.tags) joined += t + "|";
    const std::uint64_t h = hash_str(joined);
    for (std::size_t i = 2; i < dim; ++i) {
      f[i] = static_cast<double>(splitmix64(h ^ i) % 1000) / 1000.0;
    }
  }
  return f;
}

std::string render_refined_query(const Sample& sample,
                                 const policy::RefinementAction& action) {
  const std::string& q = sample.question;
  if (action.name == "identity") return q;
  if (action.name == "symbolic-parameterization")
    return "Introduce symbolic variables for each quantity below, express the "
           "problem in terms of them, then solve. Problem: " +
           q;
  if (action.name == "contextual-denoising")
    return "Ignoring any irrelevant narrative details, solve the core "
           "problem: " +
           q;
  if (action.name == "linguistic-disambiguation")
    return "Interpreting every condition literally and without ambiguity, "
           "solve: " +
           q;
  if (action.name == "conceptual-reduction")
    return "Reduce the following to its essential mathematical structure, "
           "then solve: " +
           q;
  if (action.name == "procedural-hint-injection")
    return q + " Proceed step by step, verifying each intermediate result.";
  if (action.name == "explicit-grounding")
    return "Using only the facts stated in the problem, solve: " + q;
  if (action.name == "cot-structuring")
    return "Work through the following in numbered steps before giving the "
           "final answer: " +
           q;
  if (action.name == "leak")
    return q + " The answer is " + sample.gold_answer + ".";
  throw std::invalid_argument("unknown refinement action: " + action.name);
}

std::optional<std::string> extract_answer(const std::string& full_text) {
  static const std::string kMarker = "\\boxed{";
  const auto pos = full_text.rfind(kMarker);
  if (pos == std::string::npos) return std::nullopt;
  std::size_t i = pos + kMarker.size();
  int depth = 1;
  const std::size_t start = i;
  for (; i < full_text.size(); ++i) {
    const char c = full_text[i];
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return full_text.substr(start, i - start);
    }
  }
  return std::nullopt;  // unbalanced after the last \boxed{
}

std::optional<std::string> extract_rephrase(const std::string& refiner_output) {
  static const std::string kOpen = "<rephrase>";
  static const std::string kClose = "</rephrase>";
  const auto open = refiner_output.rfind(kOpen);
  if (open == std::string::npos) return std::nullopt;
  const auto start = open + kOpen.size();
  const auto close = refiner_output.find(kClose, start);
  if (close == std::string::npos) return std::nullopt;
  return refiner_output.substr(start, close - start);
}

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\n\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\n\r");
  return s.substr(begin, end - begin + 1);
}

std::string collapse_ws(const std::string& s) {
  std::string out;
  bool prev_ws = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (ws) {
      if (!prev_ws && !out.empty()) out += ' ';
    } else {
      out += c;
    }
    prev_ws = ws;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// Canonicalizes plain numerics; anything else (LaTeX etc.) passes through.
std::string canonicalize_numeric(const std::string& s) {
  std::string body = s;
  bool negative = false;
  std::size_t i = 0;
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    negative = body[i] == '-';
    ++i;
  }
  std::string digits, frac;
  bool seen_dot = false, valid = i < body.size();
  for (; i < body.size(); ++i) {
    const char c = body[i];
    if (c == ',') continue;  // thousands separator
    if (c == '.') {
      if (seen_dot) return s;
      seen_dot = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) return s;
    (seen_dot ? frac : digits) += c;
  }
  if (!valid || digits.empty()) return s;
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  // strip leading zeros from the integer part
  std::size_t nz = digits.find_first_not_of('0');
  digits = (nz == std::string::npos) ? "0" : digits.substr(nz);
  std::string out = digits;
  if (!frac.empty()) out += "." + frac;
  if (negative && out != "0") out = "-" + out;
  return out;
}

}  // namespace

std::string normalize_answer(const std::string& raw) {
  std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$')
    s = trim(s.substr(1, s.size() - 2));
  s = collapse_ws(s);
  return canonicalize_numeric(s);
}

namespace {

int sample_one_action(const PolicyParams& theta, const Features& features,
                      std::uint64_t seed) {
  const auto probs = policy::action_probabilities(theta, features);
  auto rng = make_rng(seed);
  return sample_categorical(probs, rng);
}

struct JudgedPair {
  double ppl_raw = 0.0;
  double ppl_refined = 0.0;
  bool ok = false;
};

JudgedPair judge_pair(const gateway::GatewayHub& hub, const Sample& sample,
                      const std::string& refined_query) {
  JudgedPair out;
  if (!hub.judge) return out;
  try {
    const auto raw_scored = hub.judge->score_continuation(
        gateway::judge_context(sample.question), sample.gold_answer);
    const auto refined_scored = hub.judge->score_continuation(
        gateway::judge_context(refined_query), sample.gold_answer);
    out.ppl_raw = reward::conditional_perplexity(raw_scored.token_logprobs).ppl;
    out.ppl_refined =
        reward::conditional_perplexity(refined_scored.token_logprobs).ppl;
    out.ok = true;
  } catch (const gateway::ConfigurationError&) {
    throw;  // surfaces immediately, never degraded to a flag
  } catch (const gateway::GatewayError&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

RolloutRecord run_group(const Sample& sample, const PolicyParams& theta,
                        const curriculum::CurriculumState& state,
                        const curriculum::SolverPool& pool,
                        const policy::ActionCatalog& catalog,
                        const gateway::GatewayHub& hub,
                        const RolloutConfig& config, std::uint64_t seed) {
  const Features features = featurize(sample, config.feature_dim);
  const auto actions = policy::sample_group(
      theta, features, config.group_size, derive_seed({seed, hash_str("actions")}));
  const auto& solver = curriculum::assign_solver(state, pool, sample.id);

  RolloutRecord record;
  record.sample_id = sample.id;
  record.epoch = state.epoch;
  record.solver_rank = solver.rank;
  const std::string gold_norm = normalize_answer(sample.gold_answer);

  for (std::size_t j = 0; j < actions.size(); ++j) {
    GroupEntry entry;
    entry.action_id = actions[j];
    const auto& action = catalog.actions[static_cast<std::size_t>(actions[j])];
    entry.action_name = action.name;

    if (hub.refiner && action.name != "identity") {
      // Remote-refiner mode: the endpoint's <rephrase> span replaces the
      // template output; missing tags fall back to the raw query.
      try {
        const std::string raw_output = hub.refiner->refine(sample.question);
        if (auto span = extract_rephrase(raw_output)) {
          entry.refined_query = *span;
        } else {
          entry.refined_query = sample.question;
          entry.refine_failed = true;
        }
      } catch (const gateway::ConfigurationError&) {
        throw;
      } catch (const gateway::GatewayError&) {
        entry.refined_query = sample.question;
        entry.refine_failed = true;
      }
    } else {
      entry.refined_query = render_refined_query(sample, action);
    }

    gateway::SolveRequest request;
    request.sample = &sample;
    request.query = entry.refined_query;
    request.action_name = action.name;
    request.refined = entry.refined_query != sample.question;
    request.temperature = config.solver_temperature;
    request.seed = derive_seed({seed, j, hash_str("solve")});
    try {
      entry.response = hub.solver(solver.rank).solve(request);
    } catch (const gateway::ConfigurationError&) {
      throw;
    } catch (const gateway::GatewayError&) {
      entry.response.transport_failed = true;
    }

    int r_acc = 0;
    if (!entry.response.transport_failed) {
      entry.response.extracted_answer = extract_answer(entry.response.full_text);
      if (entry.response.extracted_answer)
        r_acc = reward::accuracy_reward(
            normalize_answer(*entry.response.extracted_answer), gold_norm);
    }

    const JudgedPair judged = judge_pair(hub, sample, entry.refined_query);
    if (judged.ok) {
      entry.breakdown =
          reward::make_breakdown(r_acc, judged.ppl_raw, judged.ppl_refined,
                                 config.ratio_epsilon, config.tau_leak,
                                 config.lambda);
      entry.has_leak_ratio = true;
    } else {
      entry.judge_failed = hub.judge != nullptr;
      entry.breakdown.r_acc = r_acc;
      entry.breakdown.lambda = config.lambda;
      entry.breakdown.composite =
          reward::composite_reward(r_acc, 0, config.lambda);
    }
    record.success_count += entry.breakdown.r_acc;
    record.entries.push_back(std::move(entry));
  }
  return record;
}

EpochResult training_epoch(const std::vector<Sample>& dataset,
                           const PolicyParams& theta,
                           const PolicyParams& theta_old,
                           const PolicyParams& ref,
                           curriculum::CurriculumState& state,
                           const curriculum::SolverPool& pool,
                           const policy::ActionCatalog& catalog,
                           const gateway::GatewayHub& hub,
                           const RolloutConfig& config, std::uint64_t seed,
                           int epoch, metrics::MetricsLog* log) {
  if (dataset.empty()) throw std::invalid_argument("training_epoch: empty dataset");
  if (config.group_size < 2)
    throw std::invalid_argument("training_epoch: group size must be >= 2");
  if (config.batch_size < 1)
    throw std::invalid_argument("training_epoch: batch size must be >= 1");

  EpochResult result;
  result.theta = theta;
  result.theta_old = theta_old;

  // Mini-batch sampling without replacement, seeded.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  {
    auto rng = make_rng(derive_seed({seed, hash_str("epoch-shuffle"),
                                     static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          next_unit(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
  }

  double reward_sum = 0.0;
  long entry_count = 0, leak_count = 0;
  double objective_sum = 0.0;
  int batch_count = 0, step = 0;
  std::vector<long> action_counts(static_cast<std::size_t>(catalog.size()), 0);

  for (std::size_t begin = 0; begin < order.size();
       begin += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(
        order.size(), begin + static_cast<std::size_t>(config.batch_size));
    std::vector<policy::GroupBatchItem> items;
    std::map<std::string, int> pending_labels;

    for (std::size_t idx = begin; idx < end; ++idx) {
      const Sample& sample = dataset[order[idx]];
      const std::uint64_t group_seed =
          derive_seed({seed, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(batch_count),
                       hash_str(sample.id)});
      const RolloutRecord record = run_group(sample, result.theta, state, pool,
                                             catalog, hub, config, group_seed);
      std::vector<double> rewards;
      policy::GroupBatchItem item;
      item.features = featurize(sample, config.feature_dim);
      for (const auto& entry : record.entries) {
        rewards.push_back(entry.breakdown.composite);
        item.actions.push_back(entry.action_id);
        ++action_counts[static_cast<std::size_t>(entry.action_id)];
        reward_sum += entry.breakdown.composite;
        leak_count += entry.breakdown.r_leak;
        ++entry_count;
      }
      const auto adv = policy::normalize_advantages(rewards, config.eps_std);
      item.advantages = adv.advantages;
      items.push_back(std::move(item));

      if (!config.disable_ash) {
        pending_labels[sample.id] = curriculum::update_label(
            state.labels.at(sample.id), record.success_count,
            config.group_size, pool.size());
      }
      if (log) {
        log->event(epoch, step++, "group",
                   {{"sample", sample.id},
                    {"solver_rank", record.solver_rank},
                    {"success_count", record.success_count},
                    {"mean_reward", adv.mean}});
      }
    }

    // Curriculum mutations happen at the batch barrier, single writer.
    for (const auto& [id, label] : pending_labels) state.labels[id] = label;

    const auto obj = policy::objective_and_gradient(
        result.theta, result.theta_old, ref, items, config.beta,
        config.eps_clip);
    objective_sum += obj.objective;
    if (config.eta > 0.0)
      result.theta = policy::grpo_step(result.theta, obj.grad, config.eta);
    ++batch_count;
    if (config.theta_old_refresh > 0 &&
        batch_count % config.theta_old_refresh == 0)
      result.theta_old = result.theta;

    if (log) {
      log->event(epoch, step++, "batch",
                 {{"batch", batch_count - 1}, {"objective", obj.objective}});
    }
  }

  result.mean_reward = reward_sum / static_cast<double>(entry_count);
  result.leak_rate =
      static_cast<double>(leak_count) / static_cast<double>(entry_count);
  result.mean_objective = objective_sum / static_cast<double>(batch_count);
  result.snapshot = curriculum::snapshot_distribution(state);
  result.snapshot.epoch = epoch;
  result.action_frequency.resize(action_counts.size());
  for (std::size_t a = 0; a < action_counts.size(); ++a)
    result.action_frequency[a] =
        static_cast<double>(action_counts[a]) / static_cast<double>(entry_count);
  state.epoch = epoch + 1;

  if (log) {
    nlohmann::json hist = nlohmann::json::array();
    for (long c : result.snapshot.counts) hist.push_back(c);
    log->event(epoch, step++, "epoch-summary",
               {{"mean_reward", result.mean_reward},
                {"leak_rate", result.leak_rate},
                {"mean_objective", result.mean_objective},
                {"label_histogram", hist}});
  }
  return result;
}

EvalReport avg_at_k(const std::vector<Sample>& samples, int solver_rank,
                    const PolicyParams& theta,
                    const policy::ActionCatalog& catalog,
                    const gateway::GatewayHub& hub, RefinerMode mode, int k,
                    double temperature, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("avg_at_k: k must be >= 1");
  if (samples.empty()) throw std::invalid_argument("avg_at_k: no samples");
  double acc_sum = 0.0;
  for (const auto& sample : samples) {
    // The refinement is fixed per sample; only the solver resamples.
    std::string query = sample.question;
    std::string action_name = "identity";
    if (mode == RefinerMode::kPolicy) {
      const Features features =
          featurize(sample, theta.feature_dim);
      const int a = sample_one_action(
          theta, features, derive_seed({seed, hash_str(sample.id)}));
      const auto& action = catalog.actions[static_cast<std::size_t>(a)];
      query = render_refined_query(sample, action);
      action_name = action.name;
    } else if (mode == RefinerMode::kRemote) {
      if (!hub.refiner)
        throw gateway::ConfigurationError("remote refiner not configured");
      if (auto span = extract_rephrase(hub.refiner->refine(sample.question)))
        query = *span;
    }
    const std::string gold_norm = normalize_answer(sample.gold_answer);
    int correct = 0;
    for (int trial = 0; trial < k; ++trial) {
      gateway::SolveRequest request;
      request.sample = &sample;
      request.query = query;
      request.action_name = action_name;
      request.refined = query != sample.question;
      request.temperature = temperature;
      request.seed = derive_seed({seed, hash_str(sample.id),
                                  static_cast<std::uint64_t>(trial),
                                  hash_str("trial")});
      try {
        const auto response = hub.solver(solver_rank).solve(request);
        if (auto extracted = extract_answer(response.full_text))
          correct += reward::accuracy_reward(normalize_answer(*extracted),
                                             gold_norm);
      } catch (const gateway::ConfigurationError&) {
        throw;
      } catch (const gateway::GatewayError&) {
        // transport failure counts the trial as incorrect
      }
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(k);
  }
  EvalReport report;
  report.metric = "avg@" + std::to_string(k);
  report.value = acc_sum / static_cast<double>(samples.size());
  report.trials = k;
  return report;
}

CrossModelReport cross_model_generalization(
    const std::vector<Sample>& samples, const PolicyParams& theta,
    const policy::ActionCatalog& catalog, const curriculum::SolverPool& pool,
    const gateway::GatewayHub& hub, const RolloutConfig& config,
    std::uint64_t seed) {
  if (pool.size() < 1)
    throw std::invalid_argument("cross_model_generalization: empty pool");
  if (samples.empty())
    throw std::invalid_argument("cross_model_generalization: no samples");
  CrossModelReport report;
  report.per_solver.assign(static_cast<std::size_t>(pool.size()), 0.0);
  for (const auto& sample : samples) {
    const Features features = featurize(sample, config.feature_dim);
    const int a = sample_one_action(theta, features,
                                    derive_seed({seed, hash_str(sample.id)}));
    const auto& action = catalog.actions[static_cast<std::size_t>(a)];
    const std::string query = render_refined_query(sample, action);
    const std::string gold_norm = normalize_answer(sample.gold_answer);
    const JudgedPair judged = judge_pair(hub, sample, query);
    for (int rank = 1; rank <= pool.size(); ++rank) {
      gateway::SolveRequest request;
      request.sample = &sample;
      request.query = query;
      request.action_name = action.name;
      request.refined = query != sample.question;
      request.temperature = config.solver_temperature;
      request.seed = derive_seed({seed, hash_str(sample.id),
                                  static_cast<std::uint64_t>(rank)});
      int r_acc = 0;
      try {
        const auto response = hub.solver(rank).solve(request);
        if (auto extracted = extract_answer(response.full_text))
          r_acc = reward::accuracy_reward(normalize_answer(*extracted),
                                          gold_norm);
      } catch (const gateway::ConfigurationError&) {
        throw;
      } catch (const gateway::GatewayError&) {
      }
      int r_leak = 0;
      if (judged.ok) {
        const double ratio = reward::leak_ratio(
            judged.ppl_raw, judged.ppl_refined, config.ratio_epsilon);
        r_leak = reward::leak_penalty(ratio, config.tau_leak);
      }
      report.per_solver[static_cast<std::size_t>(rank - 1)] +=
          reward::composite_reward(r_acc, r_leak, config.lambda);
    }
  }
  for (auto& total : report.per_solver) {
    total /= static_cast<double>(samples.size());
    report.mean += total;
  }
  report.mean /= static_cast<double>(pool.size());
  return report;
}

LengthDeltaReport response_length_delta(const std::vector<Sample>& samples,
                                        int solver_rank,
                                        const PolicyParams& theta,
                                        const policy::ActionCatalog& catalog,
                                        const gateway::GatewayHub& hub,
                                        std::uint64_t seed) {
  if (samples.empty())
    throw std::invalid_argument("response_length_delta: no samples");
  LengthDeltaReport report;
  double raw_sum = 0.0, refined_sum = 0.0;
  for (const auto& sample : samples) {
    const Features features = featurize(sample, theta.feature_dim);
    const int a = sample_one_action(theta, features,
                                    derive_seed({seed, hash_str(sample.id)}));
    const auto& action = catalog.actions[static_cast<std::size_t>(a)];

    gateway::SolveRequest raw_req;
    raw_req.sample = &sample;
    raw_req.query = sample.question;
    raw_req.action_name = "identity";
    raw_req.refined = false;
    raw_req.seed = derive_seed({seed, hash_str(sample.id), hash_str("raw")});
    raw_sum += static_cast<double>(
        hub.solver(solver_rank).solve(raw_req).token_count);

    gateway::SolveRequest refined_req;
    refined_req.sample = &sample;
    refined_req.query = render_refined_query(sample, action);
    refined_req.action_name = action.name;
    refined_req.refined = true;
    refined_req.seed =
        derive_seed({seed, hash_str(sample.id), hash_str("refined")});
    refined_sum += static_cast<double>(
        hub.solver(solver_rank).solve(refined_req).token_count);
  }
  report.raw_mean_tokens = raw_sum / static_cast<double>(samples.size());
  report.refined_mean_tokens = refined_sum / static_cast<double>(samples.size());
  if (report.raw_mean_tokens != 0.0) {
    report.delta_percent = (report.raw_mean_tokens - report.refined_mean_tokens) /
                           report.raw_mean_tokens * 100.0;
  }
  return report;
}

}  // namespace requer::rollout
