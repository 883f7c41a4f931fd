#include "requer/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "requer/reward.hpp"

using nlohmann::json;

namespace requer::config {

namespace {

// Strict schema walking: every object must contain only known keys, so a
// typo fails loudly instead of silently taking a default.
void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError(path + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

gateway::EndpointConfig parse_endpoint(const json& obj,
                                       const std::string& path) {
  check_keys(obj, path,
             {"base_url", "model", "api_key_env", "timeout_s", "retry_budget",
              "max_output_tokens", "temperature"});
  gateway::EndpointConfig endpoint;
  endpoint.base_url = get_or<std::string>(obj, "base_url", "");
  endpoint.model = get_or<std::string>(obj, "model", "");
  endpoint.api_key_env = get_or<std::string>(obj, "api_key_env", "");
  endpoint.timeout_s = get_or<double>(obj, "timeout_s", 30.0);
  endpoint.retry_budget = get_or<int>(obj, "retry_budget", 2);
  endpoint.max_output_tokens = get_or<int>(obj, "max_output_tokens", 2048);
  endpoint.temperature = get_or<double>(obj, "temperature", 0.0);
  return endpoint;
}

json endpoint_to_json(const gateway::EndpointConfig& e) {
  return {{"base_url", e.base_url},
          {"model", e.model},
          {"api_key_env", e.api_key_env},
          {"timeout_s", e.timeout_s},
          {"retry_budget", e.retry_budget},
          {"max_output_tokens", e.max_output_tokens},
          {"temperature", e.temperature}};
}

gateway::ScriptedSolverSpec parse_mock(const json& obj,
                                       const std::string& path) {
  check_keys(obj, path,
             {"behavior", "fixed_text", "raw_tokens", "refined_tokens",
              "token_sequence", "latency_ms", "fail_transport_first"});
  gateway::ScriptedSolverSpec spec;
  const std::string behavior = get_or<std::string>(obj, "behavior", "echo-gold");
  if (behavior == "echo-gold")
    spec.behavior = gateway::ScriptBehavior::kEchoGold;
  else if (behavior == "wrong")
    spec.behavior = gateway::ScriptBehavior::kWrong;
  else if (behavior == "alternate")
    spec.behavior = gateway::ScriptBehavior::kAlternate;
  else if (behavior == "fixed-text")
    spec.behavior = gateway::ScriptBehavior::kFixedText;
  else
    throw ConfigError(path + ".behavior: unknown value '" + behavior + "'");
  spec.fixed_text = get_or<std::string>(obj, "fixed_text", "");
  spec.raw_tokens = get_or<long>(obj, "raw_tokens", 100);
  spec.refined_tokens = get_or<long>(obj, "refined_tokens", 100);
  spec.token_sequence = get_or<std::vector<long>>(obj, "token_sequence", {});
  spec.latency_ms = get_or<double>(obj, "latency_ms", 0.0);
  spec.fail_transport_first = get_or<int>(obj, "fail_transport_first", 0);
  return spec;
}

json mock_to_json(const gateway::ScriptedSolverSpec& spec) {
  std::string behavior;
  switch (spec.behavior) {
    case gateway::ScriptBehavior::kEchoGold: behavior = "echo-gold"; break;
    case gateway::ScriptBehavior::kWrong: behavior = "wrong"; break;
    case gateway::ScriptBehavior::kAlternate: behavior = "alternate"; break;
    case gateway::ScriptBehavior::kFixedText: behavior = "fixed-text"; break;
  }
  return {{"behavior", behavior},
          {"fixed_text", spec.fixed_text},
          {"raw_tokens", spec.raw_tokens},
          {"refined_tokens", spec.refined_tokens},
          {"token_sequence", spec.token_sequence},
          {"latency_ms", spec.latency_ms},
          {"fail_transport_first", spec.fail_transport_first}};
}

}  // namespace

RunConfig parse_config(const json& root) {
  check_keys(root, "config",
             {"dataset", "eval_dataset", "demos", "output_dir", "seed", "pool",
              "gateway", "judge", "refiner", "policy", "hyperparameters",
              "schedule", "ablations"});
  RunConfig c;
  c.dataset = get_or<std::string>(root, "dataset", "");
  c.eval_dataset = get_or<std::string>(root, "eval_dataset", "");
  c.demos = get_or<std::string>(root, "demos", "");
  c.output_dir = get_or<std::string>(root, "output_dir", "out");
  c.seed = get_or<std::uint64_t>(root, "seed", 42);

  if (!root.contains("pool") || !root.at("pool").is_array() ||
      root.at("pool").empty())
    throw ConfigError("config.pool: a non-empty solver list is required");
  int rank = 1;
  for (const auto& entry : root.at("pool")) {
    check_keys(entry, "config.pool[]", {"id", "name"});
    curriculum::SolverDescriptor d;
    d.id = entry.at("id").get<std::string>();
    d.name = get_or<std::string>(entry, "name", d.id);
    d.rank = rank++;
    c.pool.entries.push_back(std::move(d));
  }
  c.pool.validate();

  if (root.contains("gateway")) {
    const auto& g = root.at("gateway");
    check_keys(g, "config.gateway", {"class", "competence", "mocks", "endpoints"});
    c.gateway.klass = get_or<std::string>(g, "class", "simulator");
    if (c.gateway.klass != "simulator" && c.gateway.klass != "mock" &&
        c.gateway.klass != "remote")
      throw ConfigError("config.gateway.class: must be simulator|mock|remote");
    if (g.contains("competence")) {
      const auto& cm = g.at("competence");
      check_keys(cm, "config.gateway.competence",
                 {"base_per_rank", "action_multiplier", "tag_difficulty",
                  "leak_action_name"});
      c.gateway.competence.base_per_rank =
          get_or<std::vector<double>>(cm, "base_per_rank", {});
      if (cm.contains("action_multiplier"))
        for (const auto& [k, v] : cm.at("action_multiplier").items())
          c.gateway.competence.action_multiplier[k] = v.get<double>();
      if (cm.contains("tag_difficulty"))
        for (const auto& [k, v] : cm.at("tag_difficulty").items())
          c.gateway.competence.tag_difficulty[k] = v.get<double>();
      c.gateway.competence.leak_action_name =
          get_or<std::string>(cm, "leak_action_name", "leak");
    }
    if (g.contains("mocks")) {
      int i = 0;
      for (const auto& m : g.at("mocks"))
        c.gateway.mocks.push_back(
            parse_mock(m, "config.gateway.mocks[" + std::to_string(i++) + "]"));
    }
    if (g.contains("endpoints")) {
      int i = 0;
      for (const auto& e : g.at("endpoints"))
        c.gateway.endpoints.push_back(parse_endpoint(
            e, "config.gateway.endpoints[" + std::to_string(i++) + "]"));
    }
  }

  if (root.contains("judge")) {
    const auto& j = root.at("judge");
    check_keys(j, "config.judge",
               {"class", "rules", "default_ppl", "sim_leaked_ppl",
                "sim_clean_ppl", "endpoint"});
    c.judge.klass = get_or<std::string>(j, "class", "simulator");
    if (c.judge.klass != "simulator" && c.judge.klass != "mock" &&
        c.judge.klass != "remote" && c.judge.klass != "none")
      throw ConfigError("config.judge.class: must be simulator|mock|remote|none");
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        check_keys(r, "config.judge.rules[]", {"contains", "ppl"});
        c.judge.rules.push_back(
            {r.at("contains").get<std::string>(), r.at("ppl").get<double>()});
      }
    }
    c.judge.default_ppl = get_or<double>(j, "default_ppl", 20.0);
    c.judge.sim_leaked_ppl = get_or<double>(j, "sim_leaked_ppl", 1.05);
    c.judge.sim_clean_ppl = get_or<double>(j, "sim_clean_ppl", 20.0);
    if (j.contains("endpoint"))
      c.judge.endpoint = parse_endpoint(j.at("endpoint"), "config.judge.endpoint");
  }

  if (root.contains("refiner")) {
    const auto& r = root.at("refiner");
    check_keys(r, "config.refiner", {"class", "endpoint"});
    c.refiner.klass = get_or<std::string>(r, "class", "none");
    if (c.refiner.klass != "none" && c.refiner.klass != "remote")
      throw ConfigError("config.refiner.class: must be none|remote");
    if (r.contains("endpoint"))
      c.refiner.endpoint =
          parse_endpoint(r.at("endpoint"), "config.refiner.endpoint");
  }

  if (root.contains("policy")) {
    const auto& p = root.at("policy");
    check_keys(p, "config.policy",
               {"feature_dim", "temperature", "include_leak_action", "catalog"});
    c.policy.feature_dim = get_or<std::size_t>(p, "feature_dim", 4);
    c.policy.temperature = get_or<double>(p, "temperature", 1.0);
    c.policy.include_leak_action =
        get_or<bool>(p, "include_leak_action", false);
    c.policy.catalog = get_or<std::vector<std::string>>(p, "catalog", {});
  }
  if (c.policy.feature_dim < 1)
    throw ConfigError("config.policy.feature_dim: must be >= 1");
  if (c.policy.temperature <= 0.0)
    throw ConfigError("config.policy.temperature: must be > 0");

  if (root.contains("hyperparameters")) {
    const auto& h = root.at("hyperparameters");
    check_keys(h, "config.hyperparameters",
               {"group_size", "kl_beta", "lambda", "tau_leak", "learning_rate",
                "eps_clip", "eps_std", "ratio_epsilon", "batch_size", "epochs",
                "init_label_mode", "init_label_fixed", "theta_old_refresh",
                "solver_temperature", "warm_start_steps", "warm_start_eta"});
    auto& hp = c.hp;
    hp.group_size = get_or<int>(h, "group_size", hp.group_size);
    hp.kl_beta = get_or<double>(h, "kl_beta", hp.kl_beta);
    hp.lambda = get_or<double>(h, "lambda", hp.lambda);
    hp.tau_leak = get_or<double>(h, "tau_leak", hp.tau_leak);
    hp.learning_rate = get_or<double>(h, "learning_rate", hp.learning_rate);
    hp.eps_clip = get_or<double>(h, "eps_clip", hp.eps_clip);
    hp.eps_std = get_or<double>(h, "eps_std", hp.eps_std);
    hp.ratio_epsilon = get_or<double>(h, "ratio_epsilon", hp.ratio_epsilon);
    hp.batch_size = get_or<int>(h, "batch_size", hp.batch_size);
    hp.epochs = get_or<int>(h, "epochs", hp.epochs);
    hp.init_label_mode =
        get_or<std::string>(h, "init_label_mode", hp.init_label_mode);
    hp.init_label_fixed = get_or<int>(h, "init_label_fixed", 0);
    hp.theta_old_refresh =
        get_or<int>(h, "theta_old_refresh", hp.theta_old_refresh);
    hp.solver_temperature =
        get_or<double>(h, "solver_temperature", hp.solver_temperature);
    hp.warm_start_steps = get_or<int>(h, "warm_start_steps", 0);
    hp.warm_start_eta = get_or<double>(h, "warm_start_eta", 0.5);
  }
  if (c.hp.group_size < 2)
    throw ConfigError("config.hyperparameters.group_size: must be >= 2");
  if (c.hp.batch_size < 1)
    throw ConfigError("config.hyperparameters.batch_size: must be >= 1");
  if (c.hp.epochs < 1)
    throw ConfigError("config.hyperparameters.epochs: must be >= 1");
  if (c.hp.lambda < 0.0)
    throw ConfigError("config.hyperparameters.lambda: must be >= 0");
  if (c.hp.tau_leak <= 0.0)
    throw ConfigError("config.hyperparameters.tau_leak: must be > 0");
  if (c.hp.eps_clip <= 0.0 || c.hp.eps_clip >= 1.0)
    throw ConfigError("config.hyperparameters.eps_clip: must be in (0,1)");
  if (c.hp.learning_rate < 0.0)
    throw ConfigError("config.hyperparameters.learning_rate: must be >= 0");
  if (c.hp.init_label_mode != "ceil-half" &&
      c.hp.init_label_mode != "floor-half" && c.hp.init_label_mode != "fixed")
    throw ConfigError(
        "config.hyperparameters.init_label_mode: must be "
        "ceil-half|floor-half|fixed");
  if (c.hp.init_label_mode == "fixed" &&
      (c.hp.init_label_fixed < 1 || c.hp.init_label_fixed > c.pool.size()))
    throw ConfigError(
        "config.hyperparameters.init_label_fixed: out of pool range");

  if (root.contains("schedule")) {
    const auto& s = root.at("schedule");
    check_keys(s, "config.schedule",
               {"kind", "improving_target", "improving_strength"});
    c.schedule.kind = get_or<std::string>(s, "kind", "train");
    if (c.schedule.kind != "train" && c.schedule.kind != "frozen" &&
        c.schedule.kind != "improving")
      throw ConfigError("config.schedule.kind: must be train|frozen|improving");
    c.schedule.improving_target =
        get_or<std::string>(s, "improving_target", c.schedule.improving_target);
    c.schedule.improving_strength =
        get_or<double>(s, "improving_strength", c.schedule.improving_strength);
  }

  if (root.contains("ablations")) {
    const auto& a = root.at("ablations");
    check_keys(a, "config.ablations", {"disable_ash"});
    c.disable_ash = get_or<bool>(a, "disable_ash", false);
  }

  // Cross-field checks.
  if (c.gateway.klass == "simulator") {
    c.gateway.competence.validate(c.pool.size());
  }
  if (c.gateway.klass == "mock" &&
      c.gateway.mocks.size() != static_cast<std::size_t>(c.pool.size()) &&
      c.gateway.mocks.size() != 1)
    throw ConfigError(
        "config.gateway.mocks: need one spec per solver (or a single shared "
        "spec)");
  if (c.gateway.klass == "remote" &&
      c.gateway.endpoints.size() != static_cast<std::size_t>(c.pool.size()))
    throw ConfigError("config.gateway.endpoints: need one endpoint per solver");
  return c;
}

json config_to_json(const RunConfig& c) {
  json pool = json::array();
  for (const auto& d : c.pool.entries)
    pool.push_back({{"id", d.id}, {"name", d.name}});

  json competence = {
      {"base_per_rank", c.gateway.competence.base_per_rank},
      {"action_multiplier", c.gateway.competence.action_multiplier},
      {"tag_difficulty", c.gateway.competence.tag_difficulty},
      {"leak_action_name", c.gateway.competence.leak_action_name}};
  json mocks = json::array();
  for (const auto& m : c.gateway.mocks) mocks.push_back(mock_to_json(m));
  json endpoints = json::array();
  for (const auto& e : c.gateway.endpoints)
    endpoints.push_back(endpoint_to_json(e));

  json rules = json::array();
  for (const auto& r : c.judge.rules)
    rules.push_back({{"contains", r.context_contains}, {"ppl", r.ppl}});

  return {
      {"dataset", c.dataset},
      {"eval_dataset", c.eval_dataset},
      {"demos", c.demos},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"pool", pool},
      {"gateway",
       {{"class", c.gateway.klass},
        {"competence", competence},
        {"mocks", mocks},
        {"endpoints", endpoints}}},
      {"judge",
       {{"class", c.judge.klass},
        {"rules", rules},
        {"default_ppl", c.judge.default_ppl},
        {"sim_leaked_ppl", c.judge.sim_leaked_ppl},
        {"sim_clean_ppl", c.judge.sim_clean_ppl},
        {"endpoint", endpoint_to_json(c.judge.endpoint)}}},
      {"refiner",
       {{"class", c.refiner.klass},
        {"endpoint", endpoint_to_json(c.refiner.endpoint)}}},
      {"policy",
       {{"feature_dim", c.policy.feature_dim},
        {"temperature", c.policy.temperature},
        {"include_leak_action", c.policy.include_leak_action},
        {"catalog", c.policy.catalog}}},
      {"hyperparameters",
       {{"group_size", c.hp.group_size},
        {"kl_beta", c.hp.kl_beta},
        {"lambda", c.hp.lambda},
        {"tau_leak", c.hp.tau_leak},
        {"learning_rate", c.hp.learning_rate},
        {"eps_clip", c.hp.eps_clip},
        {"eps_std", c.hp.eps_std},
        {"ratio_epsilon", c.hp.ratio_epsilon},
        {"batch_size", c.hp.batch_size},
        {"epochs", c.hp.epochs},
        {"init_label_mode", c.hp.init_label_mode},
        {"init_label_fixed", c.hp.init_label_fixed},
        {"theta_old_refresh", c.hp.theta_old_refresh},
        {"solver_temperature", c.hp.solver_temperature},
        {"warm_start_steps", c.hp.warm_start_steps},
        {"warm_start_eta", c.hp.warm_start_eta}}},
      {"schedule",
       {{"kind", c.schedule.kind},
        {"improving_target", c.schedule.improving_target},
        {"improving_strength", c.schedule.improving_strength}}},
      {"ablations", {{"disable_ash", c.disable_ash}}},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded())
    throw ConfigError("config file is not valid JSON: " + path);
  RunConfig c = parse_config(root);
  for (const std::string* p : {&c.dataset, &c.eval_dataset, &c.demos}) {
    if (!p->empty() && !std::filesystem::exists(*p))
      throw ConfigError("referenced path does not exist: " + *p);
  }
  return c;
}

policy::ActionCatalog build_catalog(const PolicyConfig& pc) {
  policy::ActionCatalog catalog;
  if (pc.catalog.empty()) {
    catalog = policy::default_catalog(pc.include_leak_action);
  } else {
    int id = 0;
    for (const auto& name : pc.catalog) catalog.actions.push_back({id++, name});
    if (pc.include_leak_action && catalog.find("leak") < 0)
      catalog.actions.push_back({id++, "leak"});
  }
  catalog.validate();
  return catalog;
}

rollout::RolloutConfig build_rollout_config(const RunConfig& c) {
  rollout::RolloutConfig rc;
  rc.group_size = c.hp.group_size;
  rc.lambda = c.hp.lambda;
  rc.tau_leak = c.hp.tau_leak;
  rc.ratio_epsilon = c.hp.ratio_epsilon;
  rc.eps_std = c.hp.eps_std;
  rc.beta = c.hp.kl_beta;
  rc.eps_clip = c.hp.eps_clip;
  rc.eta = c.hp.learning_rate;
  rc.batch_size = c.hp.batch_size;
  rc.theta_old_refresh = c.hp.theta_old_refresh;
  rc.disable_ash = c.disable_ash;
  rc.solver_temperature = c.hp.solver_temperature;
  rc.feature_dim = c.policy.feature_dim;
  return rc;
}

curriculum::InitMode init_mode_of(const RunConfig& c) {
  if (c.hp.init_label_mode == "ceil-half") return curriculum::InitMode::kCeilHalf;
  if (c.hp.init_label_mode == "floor-half")
    return curriculum::InitMode::kFloorHalf;
  return curriculum::InitMode::kFixed;
}

gateway::GatewayHub build_hub(const RunConfig& c) {
  gateway::GatewayHub hub;
  hub.klass = c.gateway.klass;
  for (int rank = 1; rank <= c.pool.size(); ++rank) {
    if (c.gateway.klass == "simulator") {
      hub.solvers.push_back(
          std::make_unique<gateway::SimulatorSolver>(c.gateway.competence, rank));
    } else if (c.gateway.klass == "mock") {
      const auto& spec = c.gateway.mocks.size() == 1
                             ? c.gateway.mocks[0]
                             : c.gateway.mocks[static_cast<std::size_t>(rank - 1)];
      hub.solvers.push_back(std::make_unique<gateway::ScriptedSolver>(spec));
    } else {
      hub.solvers.push_back(std::make_unique<gateway::RemoteSolver>(
          c.gateway.endpoints[static_cast<std::size_t>(rank - 1)]));
    }
  }
  if (c.judge.klass == "simulator")
    hub.judge = std::make_unique<gateway::SimulatorJudge>(c.judge.sim_leaked_ppl,
                                                          c.judge.sim_clean_ppl);
  else if (c.judge.klass == "mock")
    hub.judge =
        std::make_unique<gateway::MockJudge>(c.judge.rules, c.judge.default_ppl);
  else if (c.judge.klass == "remote")
    hub.judge = std::make_unique<gateway::RemoteJudge>(c.judge.endpoint);
  if (c.refiner.klass == "remote")
    hub.refiner = std::make_unique<gateway::RemoteRefiner>(c.refiner.endpoint);
  return hub;
}

gateway::PolicySchedule build_schedule(const RunConfig& c,
                                       const policy::ActionCatalog& catalog) {
  gateway::PolicySchedule schedule;
  if (c.schedule.kind == "frozen")
    schedule.kind = gateway::PolicySchedule::Kind::kFrozen;
  else if (c.schedule.kind == "improving")
    schedule.kind = gateway::PolicySchedule::Kind::kImproving;
  else
    schedule.kind = gateway::PolicySchedule::Kind::kTrain;
  schedule.initial = policy::zero_params(
      c.policy.feature_dim, static_cast<std::size_t>(catalog.size()),
      c.policy.temperature);
  const int target = catalog.find(c.schedule.improving_target);
  if (schedule.kind == gateway::PolicySchedule::Kind::kImproving && target < 0)
    throw ConfigError("config.schedule.improving_target: action not in catalog");
  schedule.improving_target_action = std::max(target, 0);
  schedule.improving_strength = c.schedule.improving_strength;
  return schedule;
}

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  std::vector<Sample> samples;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": invalid JSON record");
    Sample s;
    try {
      s.id = record.at("id").get<std::string>();
      s.question = record.at("question").get<std::string>();
      s.gold_answer = record.at("answer").get<std::string>();
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (record.contains("tags"))
      s.tags = record.at("tags").get<std::vector<std::string>>();
    if (s.question.empty() || s.gold_answer.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": question and answer must be non-empty");
    if (!ids.insert(s.id).second)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": duplicate sample id " + s.id);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ConfigError(path + ": dataset is empty");
  return samples;
}

std::vector<std::pair<std::string, int>> load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open demos: " + path);
  std::vector<std::pair<std::string, int>> demos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("sample_id") ||
        !record.contains("action_id"))
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected {\"sample_id\", \"action_id\"}");
    demos.emplace_back(record["sample_id"].get<std::string>(),
                       record["action_id"].get<int>());
  }
  if (demos.empty()) throw ConfigError(path + ": demo file is empty");
  return demos;
}

std::vector<reward::LabeledRatio> load_leak_corpus(const std::string& path,
                                                   gateway::JudgeBackend* judge,
                                                   double ratio_epsilon) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open leak corpus: " + path);
  std::vector<reward::LabeledRatio> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": invalid JSON record");
    reward::LabeledRatio item;
    if (!record.contains("is_leak"))
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": missing is_leak");
    item.is_leak = record["is_leak"].get<bool>();
    if (record.contains("ratio")) {
      item.ratio = record["ratio"].get<double>();
    } else if (record.contains("raw_query") &&
               record.contains("refined_query") &&
               record.contains("gold_answer")) {
      if (!judge)
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": unscored record but no judge configured");
      const std::string gold = record["gold_answer"].get<std::string>();
      const auto raw = judge->score_continuation(
          gateway::judge_context(record["raw_query"].get<std::string>()), gold);
      const auto refined = judge->score_continuation(
          gateway::judge_context(record["refined_query"].get<std::string>()),
          gold);
      item.ratio = reward::leak_ratio(
          reward::conditional_perplexity(raw.token_logprobs).ppl,
          reward::conditional_perplexity(refined.token_logprobs).ppl,
          ratio_epsilon);
    } else {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": need ratio or raw/refined/gold fields");
    }
    corpus.push_back(item);
  }
  if (corpus.empty()) throw ConfigError(path + ": leak corpus is empty");
  return corpus;
}

}  // namespace requer::config
