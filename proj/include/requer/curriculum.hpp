#pragma once

#include <map>
#include <string>
#include <vector>

namespace requer::curriculum {

struct SolverDescriptor {
  std::string id;
  std::string name;
  int rank = 0;  // 1..K, 1 weakest
};

// Ordered pool of solvers ranked by capability. Rank order is declared by
// configuration and immutable for a run.
struct SolverPool {
  std::vector<SolverDescriptor> entries;

  int size() const { return static_cast<int>(entries.size()); }
  const SolverDescriptor& by_rank(int k) const;
  // Throws std::invalid_argument unless ranks are exactly 1..K.
  void validate() const;
};

enum class InitMode { kCeilHalf, kFloorHalf, kFixed };

struct CurriculumState {
  std::map<std::string, int> labels;  // sample id -> difficulty index k_i
  int epoch = 0;
  int pool_size = 0;
};

struct DistributionSnapshot {
  int epoch = 0;
  std::vector<long> counts;  // per-rank histogram, index 0 == rank 1
};

CurriculumState init_labels(const SolverPool& pool,
                            const std::vector<std::string>& sample_ids,
                            InitMode mode, int fixed_k = 0);

// Escalation/de-escalation rule: total group failure moves the sample to a
// stronger solver, total success to a weaker one, anything in between is a
// no-op. Pure function of its arguments.
int update_label(int k, int success_count, int group_size, int pool_size);

const SolverDescriptor& assign_solver(const CurriculumState& state,
                                      const SolverPool& pool,
                                      const std::string& sample_id);

DistributionSnapshot snapshot_distribution(const CurriculumState& state);

// Versioned text record: "requer-curriculum/1" header, then "id<TAB>label"
// lines in sorted id order.
std::string serialize_labels(const CurriculumState& state);
CurriculumState deserialize_labels(const std::string& text);

}  // namespace requer::curriculum
