#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "requer/curriculum.hpp"
#include "requer/policy.hpp"

namespace requer::checkpoint {

struct Checkpoint {
  static constexpr const char* kFormatVersion = "requer-checkpoint/1";

  int epoch = 0;  // next epoch to run
  std::uint64_t seed = 0;
  policy::PolicyParams theta;
  policy::PolicyParams theta_old;
  policy::PolicyParams pi_ref;
  std::vector<std::string> catalog_names;
  curriculum::CurriculumState labels;
};

// JSON text with a content digest in a sidecar field; load verifies both the
// format version and the digest.
void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

}  // namespace requer::checkpoint
