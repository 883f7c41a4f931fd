#include "requer/curriculum.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace requer::curriculum {

const SolverDescriptor& SolverPool::by_rank(int k) const {
  if (k < 1 || k > size())
    throw std::out_of_range("solver rank " + std::to_string(k) +
                            " outside pool of size " + std::to_string(size()));
  return entries[static_cast<std::size_t>(k - 1)];
}

void SolverPool::validate() const {
  if (entries.empty()) throw std::invalid_argument("solver pool is empty");
  for (int i = 0; i < size(); ++i) {
    if (entries[static_cast<std::size_t>(i)].rank != i + 1)
      throw std::invalid_argument(
          "solver pool ranks must be exactly 1..K in order");
    if (entries[static_cast<std::size_t>(i)].id.empty())
      throw std::invalid_argument("solver descriptor has empty id");
  }
}

CurriculumState init_labels(const SolverPool& pool,
                            const std::vector<std::string>& sample_ids,
                            InitMode mode, int fixed_k) {
  pool.validate();
  if (sample_ids.empty())
    throw std::invalid_argument("init_labels: empty sample list");
  const int K = pool.size();
  int k = 0;
  switch (mode) {
    case InitMode::kCeilHalf:
      k = (K + 1) / 2;
      break;
    case InitMode::kFloorHalf:
      k = std::max(1, K / 2);
      break;
    case InitMode::kFixed:
      if (fixed_k < 1 || fixed_k > K)
        throw std::invalid_argument("init_labels: fixed label out of range");
      k = fixed_k;
      break;
  }
  CurriculumState state;
  state.pool_size = K;
  for (const auto& id : sample_ids) state.labels[id] = k;
  return state;
}

int update_label(int k, int success_count, int group_size, int pool_size) {
  if (group_size < 1) throw std::invalid_argument("update_label: G < 1");
  if (success_count < 0 || success_count > group_size)
    throw std::invalid_argument("update_label: S outside [0, G]");
  if (k < 1 || k > pool_size)
    throw std::invalid_argument("update_label: label out of range");
  if (success_count == 0) return std::min(pool_size, k + 1);
  if (success_count == group_size) return std::max(1, k - 1);
  return k;
}

const SolverDescriptor& assign_solver(const CurriculumState& state,
                                      const SolverPool& pool,
                                      const std::string& sample_id) {
  auto it = state.labels.find(sample_id);
  if (it == state.labels.end())
    throw std::out_of_range("assign_solver: unknown sample id " + sample_id);
  return pool.by_rank(it->second);
}

DistributionSnapshot snapshot_distribution(const CurriculumState& state) {
  DistributionSnapshot snap;
  snap.epoch = state.epoch;
  snap.counts.assign(static_cast<std::size_t>(state.pool_size), 0);
  for (const auto& [id, k] : state.labels)
    ++snap.counts[static_cast<std::size_t>(k - 1)];
  return snap;
}

static constexpr const char* kLabelHeader = "requer-curriculum/1";

std::string serialize_labels(const CurriculumState& state) {
  std::ostringstream out;
  out << kLabelHeader << '\n'
      << "epoch\t" << state.epoch << '\n'
      << "pool_size\t" << state.pool_size << '\n';
  for (const auto& [id, k] : state.labels) out << id << '\t' << k << '\n';
  return out.str();
}

CurriculumState deserialize_labels(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kLabelHeader)
    throw std::invalid_argument("curriculum record: bad header");
  CurriculumState state;
  auto parse_kv = [&](const char* key) {
    if (!std::getline(in, line))
      throw std::invalid_argument("curriculum record: truncated");
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != key)
      throw std::invalid_argument("curriculum record: expected " +
                                  std::string(key));
    return std::stoi(line.substr(tab + 1));
  };
  state.epoch = parse_kv("epoch");
  state.pool_size = parse_kv("pool_size");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::invalid_argument("curriculum record: malformed label line");
    int k = std::stoi(line.substr(tab + 1));
    if (k < 1 || k > state.pool_size)
      throw std::invalid_argument("curriculum record: label out of range");
    state.labels[line.substr(0, tab)] = k;
  }
  return state;
}

}  // namespace requer::curriculum
