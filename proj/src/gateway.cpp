#include "requer/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "requer/util.hpp"

using nlohmann::json;

namespace requer::gateway {

void EndpointConfig::validate() const {
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
    throw ConfigurationError("endpoint base_url must start with http(s)://: " +
                             base_url);
  if (timeout_s <= 0.0)
    throw ConfigurationError("endpoint timeout must be > 0");
  if (retry_budget < 0)
    throw ConfigurationError("endpoint retry budget must be >= 0");
}

std::string solver_system_prompt() {
  return "You are a math assistant. Please solve the following problem step "
         "by step and put your final answer in \\boxed{} format.";
}

std::string solver_user_prompt(const std::string& question) {
  return "Question:\n" + question + "\nAnswer:\n";
}

std::string refiner_system_prompt() {
  return "# Role\n"
         "You are an expert Reasoning Query Refiner. Your core task is not to "
         "answer questions directly, but to act as a \"cognitive frontend\" "
         "between a human user and a downstream AI Solver. You must rewrite "
         "the user's Raw Query into a Refined Query that is semantically "
         "equivalent but formulated in a way that maximizes the Solver's "
         "success rate.\n"
         "# Objective\n"
         "Translate natural language ambiguity into machine-solvable logic. "
         "Disambiguate intent, make implicit constraints explicit, and "
         "structure the query to trigger the Solver's latent reasoning "
         "capabilities.\n"
         "# Input/Output Format\n"
         "Input: User's raw natural language query.\n"
         "Output: First, analyze how to refine the problem step by step in "
         "<think> tags, then provide the refined query in <rephrase> tags.\n"
         "Format:\n"
         "<think>(step by step thinking on how to rephrase questions)</think>"
         "<rephrase>(rephrased version of the problem)</rephrase>";
}

std::string refiner_user_prompt(const std::string& question) {
  return "Original Problem:\n" + question + "\nRephrase Problem:\n";
}

std::string judge_context(const std::string& question) {
  // Solver user prompt minus the answer; the gold answer is the continuation.
  return solver_user_prompt(question);
}

// ---- scripted mocks ---------------------------------------------------------

SolverResponse ScriptedSolver::solve(const SolveRequest& request) {
  const long call = calls_.fetch_add(1);
  if (call < spec_.fail_transport_first)
    throw TransportError("scripted transport failure (call " +
                         std::to_string(call) + ")");
  if (request.sample == nullptr)
    throw ProtocolError("scripted solver: missing sample");

  SolverResponse response;
  switch (spec_.behavior) {
    case ScriptBehavior::kEchoGold:
      response.full_text =
          "The answer is \\boxed{" + request.sample->gold_answer + "}.";
      break;
    case ScriptBehavior::kWrong:
      response.full_text =
          "The answer is \\boxed{" + request.sample->gold_answer + "_wrong}.";
      break;
    case ScriptBehavior::kAlternate:
      response.full_text =
          call % 2 == 0
              ? "The answer is \\boxed{" + request.sample->gold_answer + "}."
              : "The answer is \\boxed{" + request.sample->gold_answer +
                    "_wrong}.";
      break;
    case ScriptBehavior::kFixedText:
      response.full_text = spec_.fixed_text;
      break;
  }
  if (!spec_.token_sequence.empty()) {
    response.token_count = spec_.token_sequence[static_cast<std::size_t>(
        call % static_cast<long>(spec_.token_sequence.size()))];
  } else {
    response.token_count =
        request.refined ? spec_.refined_tokens : spec_.raw_tokens;
  }
  response.latency_ms = spec_.latency_ms;
  return response;
}

ScoredContinuation MockJudge::score_continuation(
    const std::string& context, const std::string& continuation) {
  if (continuation.empty())
    throw std::invalid_argument("score_continuation: empty continuation");
  double ppl = default_ppl_;
  for (const auto& rule : rules_) {
    if (context.find(rule.context_contains) != std::string::npos) {
      ppl = rule.ppl;
      break;
    }
  }
  return ScoredContinuation{{-std::log(ppl)}, 1};
}

// ---- simulator ---------------------------------------------------------------

double CompetenceModel::success_prob(int rank, const std::string& action_name,
                                     const Sample& sample) const {
  if (action_name == leak_action_name) return 1.0;
  double p = base_per_rank.at(static_cast<std::size_t>(rank - 1));
  auto it = action_multiplier.find(action_name);
  if (it != action_multiplier.end()) p *= it->second;
  for (const auto& tag : sample.tags) {
    auto dt = tag_difficulty.find(tag);
    if (dt != tag_difficulty.end()) p *= dt->second;
  }
  return std::clamp(p, 0.0, 1.0);
}

void CompetenceModel::validate(int pool_size) const {
  if (static_cast<int>(base_per_rank.size()) != pool_size)
    throw ConfigurationError(
        "competence model: base_per_rank size must equal pool size");
  for (double p : base_per_rank)
    if (p < 0.0 || p > 1.0)
      throw ConfigurationError("competence model: probability outside [0,1]");
  for (const auto& [name, m] : action_multiplier)
    if (m < 0.0)
      throw ConfigurationError("competence model: negative multiplier for " +
                               name);
}

SolverResponse simulate_solver(const CompetenceModel& model, int rank,
                               const std::string& action_name,
                               const Sample& sample, std::uint64_t seed) {
  const double p = model.success_prob(rank, action_name, sample);
  auto rng = make_rng(derive_seed({seed, hash_str(sample.id),
                                   static_cast<std::uint64_t>(rank),
                                   hash_str(action_name)}));
  const bool success = next_unit(rng) < p;
  SolverResponse response;
  const std::string answer =
      success ? sample.gold_answer : sample.gold_answer + "_wrong";
  response.full_text = "Working through the problem step by step, the final "
                       "answer is \\boxed{" +
                       answer + "}.";
  const std::uint64_t h = rng();
  response.token_count = 120 + static_cast<long>(h % 80);
  response.latency_ms = 0.0;
  return response;
}

SolverResponse SimulatorSolver::solve(const SolveRequest& request) {
  calls_.fetch_add(1);
  if (request.sample == nullptr)
    throw ProtocolError("simulator solver: missing sample");
  return simulate_solver(model_, rank_, request.action_name, *request.sample,
                         request.seed);
}

ScoredContinuation SimulatorJudge::score_continuation(
    const std::string& context, const std::string& continuation) {
  if (continuation.empty())
    throw std::invalid_argument("score_continuation: empty continuation");
  const bool leaked = context.find(continuation) != std::string::npos;
  const double ppl = leaked ? leaked_ppl_ : clean_ppl_;
  // Two tokens with equal logprobs; ppl is mean-based so the count is free.
  const double lp = -std::log(ppl);
  return ScoredContinuation{{lp, lp}, 2};
}

// ---- remote ------------------------------------------------------------------

namespace {

std::string api_key_of(const EndpointConfig& endpoint) {
  if (endpoint.api_key_env.empty()) return {};
  const char* v = std::getenv(endpoint.api_key_env.c_str());
  return v ? std::string(v) : std::string();
}

struct ParsedUrl {
  std::string host_port;  // scheme://host:port for httplib::Client
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

json post_json(const EndpointConfig& endpoint, const std::string& path,
               const json& body) {
  endpoint.validate();
  const ParsedUrl url = parse_base_url(endpoint.base_url);
  int attempt = 0;
  for (;;) {
    httplib::Client client(url.host_port);
    client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    httplib::Headers headers;
    const std::string key = api_key_of(endpoint);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto result = client.Post(url.path_prefix + path, headers, body.dump(),
                              "application/json");
    if (result) {
      if (result->status == 401 || result->status == 403)
        throw ConfigurationError("endpoint authentication failed (HTTP " +
                                 std::to_string(result->status) + ")");
      if (result->status >= 200 && result->status < 300) {
        json parsed = json::parse(result->body, nullptr, false);
        if (parsed.is_discarded())
          throw ProtocolError("endpoint returned malformed JSON");
        return parsed;
      }
      if (result->status >= 400 && result->status < 500)
        throw ProtocolError("endpoint rejected request (HTTP " +
                            std::to_string(result->status) + ")");
      // 5xx falls through to retry
    }
    if (attempt >= endpoint.retry_budget)
      throw TransportError("endpoint unreachable after " +
                           std::to_string(attempt + 1) + " attempt(s): " +
                           endpoint.base_url);
    std::this_thread::sleep_for(
        std::chrono::milliseconds(50LL << std::min(attempt, 6)));
    ++attempt;
  }
}

long count_ws_tokens(const std::string& text) {
  long n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!ws && !in_token) ++n;
    in_token = !ws;
  }
  return n;
}

}  // namespace

SolverResponse remote_complete(const EndpointConfig& endpoint,
                               const std::string& system_prompt,
                               const std::string& user_prompt,
                               double temperature,
                               std::optional<std::uint64_t> seed) {
  json body = {
      {"model", endpoint.model},
      {"messages",
       json::array({json{{"role", "system"}, {"content", system_prompt}},
                    json{{"role", "user"}, {"content", user_prompt}}})},
      {"temperature", temperature},
      {"max_tokens", endpoint.max_output_tokens},
  };
  if (seed) body["seed"] = *seed;
  const auto started = std::chrono::steady_clock::now();
  json reply = post_json(endpoint, "/v1/chat/completions", body);
  const auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  SolverResponse response;
  try {
    response.full_text =
        reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ProtocolError("chat completion response missing choices[0].message");
  }
  if (reply.contains("usage") && reply["usage"].contains("completion_tokens"))
    response.token_count = reply["usage"]["completion_tokens"].get<long>();
  else
    response.token_count = count_ws_tokens(response.full_text);
  response.latency_ms = elapsed;
  return response;
}

ScoredContinuation remote_score_continuation(const EndpointConfig& endpoint,
                                             const std::string& context,
                                             const std::string& continuation) {
  if (continuation.empty())
    throw std::invalid_argument("score_continuation: empty continuation");
  // Completion-with-echo-logprobs pattern: score the concatenation, keep the
  // tokens that start at or after the continuation boundary.
  json body = {
      {"model", endpoint.model},  {"prompt", context + continuation},
      {"max_tokens", 0},          {"echo", true},
      {"logprobs", 0},
  };
  json reply = post_json(endpoint, "/v1/completions", body);
  json logprobs;
  try {
    logprobs = reply.at("choices").at(0).at("logprobs");
  } catch (const json::exception&) {
    throw CapabilityError("endpoint does not report echo logprobs");
  }
  if (logprobs.is_null() || !logprobs.contains("token_logprobs") ||
      !logprobs.contains("text_offset"))
    throw CapabilityError("endpoint does not report echo logprobs");
  const auto& lps = logprobs["token_logprobs"];
  const auto& offsets = logprobs["text_offset"];
  if (!lps.is_array() || !offsets.is_array() || lps.size() != offsets.size())
    throw ProtocolError("malformed logprob payload");
  ScoredContinuation scored;
  const auto boundary = static_cast<long>(context.size());
  for (std::size_t i = 0; i < lps.size(); ++i) {
    if (offsets[i].get<long>() < boundary) continue;
    if (lps[i].is_null())
      throw ProtocolError("null logprob inside continuation span");
    scored.token_logprobs.push_back(lps[i].get<double>());
  }
  if (scored.token_logprobs.empty())
    throw ProtocolError("no tokens found in continuation span");
  scored.token_count = static_cast<int>(scored.token_logprobs.size());
  return scored;
}

RemoteSolver::RemoteSolver(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
}

SolverResponse RemoteSolver::solve(const SolveRequest& request) {
  calls_.fetch_add(1);
  return remote_complete(config_, solver_system_prompt(),
                         solver_user_prompt(request.query),
                         request.temperature,
                         std::optional<std::uint64_t>(request.seed));
}

RemoteJudge::RemoteJudge(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
}

ScoredContinuation RemoteJudge::score_continuation(
    const std::string& context, const std::string& continuation) {
  return remote_score_continuation(config_, context, continuation);
}

RemoteRefiner::RemoteRefiner(EndpointConfig config)
    : config_(std::move(config)) {
  config_.validate();
}

std::string RemoteRefiner::refine(const std::string& question) {
  return remote_complete(config_, refiner_system_prompt(),
                         refiner_user_prompt(question), config_.temperature,
                         std::nullopt)
      .full_text;
}

SolverBackend& GatewayHub::solver(int rank) const {
  if (rank < 1 || rank > static_cast<int>(solvers.size()))
    throw ConfigurationError("no solver backend for rank " +
                             std::to_string(rank));
  return *solvers[static_cast<std::size_t>(rank - 1)];
}

}  // namespace requer::gateway
