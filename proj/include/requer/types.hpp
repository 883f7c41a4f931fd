#pragma once

#include <optional>
#include <string>
#include <vector>

namespace requer {

// One reasoning problem: raw query x and gold answer y*.
struct Sample {
  std::string id;
  std::string question;
  std::string gold_answer;
  std::vector<std::string> tags;
};

struct SolverResponse {
  std::string full_text;
  std::optional<std::string> extracted_answer;
  long token_count = 0;
  double latency_ms = 0.0;
  bool transport_failed = false;
};

}  // namespace requer
