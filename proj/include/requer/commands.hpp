#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace requer::commands {

// Exit codes: 0 success, 1 runtime failure, 2 configuration/validation
// failure. Flag overrides win over config-file values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lambda;
  std::optional<bool> disable_ash;
  std::optional<std::string> output_dir;
  std::optional<int> k;
  std::optional<double> temperature;
  std::optional<int> solver_rank;
};

int cmd_train(const std::string& config_path,
              const std::optional<std::string>& resume_path,
              const Overrides& overrides);

int cmd_simulate(const std::string& config_path, const Overrides& overrides);

int cmd_eval(const std::string& config_path, const std::string& mode,
             const Overrides& overrides);

int cmd_leak_check(const std::string& config_path, const std::string& raw_query,
                   const std::string& refined_query,
                   const std::string& gold_answer,
                   std::optional<double> tau_override,
                   std::optional<double> epsilon_override);

int cmd_leak_sweep(const std::string& config_path,
                   const std::string& corpus_path,
                   const std::vector<double>& taus);

int cmd_inspect(const std::string& checkpoint_path);

}  // namespace requer::commands
