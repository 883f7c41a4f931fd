#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "requer/types.hpp"

namespace requer::gateway {

// Error taxonomy. Rollout maps transport/protocol failures to r_acc = 0;
// capability and configuration errors surface immediately.
struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : GatewayError {
  using GatewayError::GatewayError;
};
struct ProtocolError : GatewayError {
  using GatewayError::GatewayError;
};
struct CapabilityError : GatewayError {
  using GatewayError::GatewayError;
};
struct ConfigurationError : GatewayError {
  using GatewayError::GatewayError;
};

struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;  // environment variable name, never the secret
  double timeout_s = 30.0;
  int retry_budget = 2;
  int max_output_tokens = 2048;
  double temperature = 0.0;

  void validate() const;
};

struct ScoredContinuation {
  std::vector<double> token_logprobs;  // natural log
  int token_count = 0;
};

// Prompt frames. The judge conditions on the solver user prompt minus the
// answer, so raw and refined contexts differ only in the question text.
std::string solver_system_prompt();
std::string solver_user_prompt(const std::string& question);
std::string refiner_system_prompt();
std::string refiner_user_prompt(const std::string& question);
std::string judge_context(const std::string& question);

struct SolveRequest {
  const Sample* sample = nullptr;
  std::string query;  // raw or refined question text
  std::string action_name;
  bool refined = false;
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual SolverResponse solve(const SolveRequest& request) = 0;
  virtual long call_count() const { return 0; }
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual ScoredContinuation score_continuation(
      const std::string& context, const std::string& continuation) = 0;
};

class RefinerBackend {
 public:
  virtual ~RefinerBackend() = default;
  // Returns the raw endpoint output; <rephrase> extraction happens in rollout.
  virtual std::string refine(const std::string& question) = 0;
};

// ---- scripted mocks -------------------------------------------------------

enum class ScriptBehavior { kEchoGold, kWrong, kAlternate, kFixedText };

struct ScriptedSolverSpec {
  ScriptBehavior behavior = ScriptBehavior::kEchoGold;
  std::string fixed_text;  // for kFixedText
  long raw_tokens = 100;
  long refined_tokens = 100;
  std::vector<long> token_sequence;  // overrides tokens when non-empty, cycled
  double latency_ms = 0.0;
  int fail_transport_first = 0;  // throw TransportError for the first n calls
};

class ScriptedSolver : public SolverBackend {
 public:
  explicit ScriptedSolver(ScriptedSolverSpec spec) : spec_(std::move(spec)) {}
  SolverResponse solve(const SolveRequest& request) override;
  long call_count() const override { return calls_.load(); }

 private:
  ScriptedSolverSpec spec_;
  std::atomic<long> calls_{0};
};

struct MockJudgeRule {
  std::string context_contains;
  double ppl = 1.0;
};

// Returns a single-token logprob list of -ln(ppl) for the first matching
// rule, else the default.
class MockJudge : public JudgeBackend {
 public:
  MockJudge(std::vector<MockJudgeRule> rules, double default_ppl)
      : rules_(std::move(rules)), default_ppl_(default_ppl) {}
  ScoredContinuation score_continuation(const std::string& context,
                                        const std::string& continuation) override;

 private:
  std::vector<MockJudgeRule> rules_;
  double default_ppl_;
};

// ---- competence-model simulator -------------------------------------------

// Synthetic mapping from (solver rank, action) to success probability; the
// verification substrate for the curriculum and training dynamics.
struct CompetenceModel {
  std::vector<double> base_per_rank;  // index 0 == rank 1
  std::map<std::string, double> action_multiplier;  // default 1.0
  std::map<std::string, double> tag_difficulty;     // multiplicative, clamped
  std::string leak_action_name = "leak";  // forces success when matched

  double success_prob(int rank, const std::string& action_name,
                      const Sample& sample) const;
  void validate(int pool_size) const;
};

SolverResponse simulate_solver(const CompetenceModel& model, int rank,
                               const std::string& action_name,
                               const Sample& sample, std::uint64_t seed);

class SimulatorSolver : public SolverBackend {
 public:
  SimulatorSolver(CompetenceModel model, int rank)
      : model_(std::move(model)), rank_(rank) {}
  SolverResponse solve(const SolveRequest& request) override;
  long call_count() const override { return calls_.load(); }

 private:
  CompetenceModel model_;
  int rank_;
  std::atomic<long> calls_{0};
};

// Scores the continuation nearly-certain when it appears verbatim in the
// context (the leak signature), otherwise at a fixed moderate surprisal.
class SimulatorJudge : public JudgeBackend {
 public:
  SimulatorJudge(double leaked_ppl = 1.05, double clean_ppl = 20.0)
      : leaked_ppl_(leaked_ppl), clean_ppl_(clean_ppl) {}
  ScoredContinuation score_continuation(const std::string& context,
                                        const std::string& continuation) override;

 private:
  double leaked_ppl_;
  double clean_ppl_;
};

// ---- remote (OpenAI-compatible) -------------------------------------------

class RemoteSolver : public SolverBackend {
 public:
  explicit RemoteSolver(EndpointConfig config);
  SolverResponse solve(const SolveRequest& request) override;
  long call_count() const override { return calls_.load(); }

 private:
  EndpointConfig config_;
  std::atomic<long> calls_{0};
};

class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(EndpointConfig config);
  ScoredContinuation score_continuation(const std::string& context,
                                        const std::string& continuation) override;

 private:
  EndpointConfig config_;
};

class RemoteRefiner : public RefinerBackend {
 public:
  explicit RemoteRefiner(EndpointConfig config);
  std::string refine(const std::string& question) override;

 private:
  EndpointConfig config_;
};

// Low-level remote calls, exposed for tests.
SolverResponse remote_complete(const EndpointConfig& endpoint,
                               const std::string& system_prompt,
                               const std::string& user_prompt,
                               double temperature,
                               std::optional<std::uint64_t> seed);
ScoredContinuation remote_score_continuation(const EndpointConfig& endpoint,
                                             const std::string& context,
                                             const std::string& continuation);

// ---- hub -------------------------------------------------------------------

// Uniform access layer handed to the rollout module: one solver backend per
// pool rank plus a judge and an optional remote refiner.
struct GatewayHub {
  std::vector<std::unique_ptr<SolverBackend>> solvers;  // index 0 == rank 1
  std::unique_ptr<JudgeBackend> judge;
  std::unique_ptr<RefinerBackend> refiner;
  std::string klass = "mock";  // mock | simulator | remote

  SolverBackend& solver(int rank) const;
  bool deterministic() const { return klass != "remote"; }
};

}  // namespace requer::gateway
