#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <random>

#include "requer/curriculum.hpp"
#include "requer/util.hpp"

using namespace requer;
using namespace requer::curriculum;

namespace {

SolverPool pool3() {
  return SolverPool{{{"a", "A", 1}, {"b", "B", 2}, {"c", "C", 3}}};
}

// Independent one-line recurrence used as the oracle for update_label.
int oracle_update(int k, int s, int g, int pool_size) {
  return std::clamp(k + (s == 0 ? 1 : 0) - (s == g ? 1 : 0), 1, pool_size);
}

}  // namespace

TEST_CASE("init_labels modes") {
  const auto pool = pool3();
  const std::vector<std::string> ids{"x", "y", "z"};

  auto ceil_state = init_labels(pool, ids, InitMode::kCeilHalf);
  for (const auto& [id, k] : ceil_state.labels) CHECK(k == 2);

  auto floor_state = init_labels(pool, ids, InitMode::kFloorHalf);
  for (const auto& [id, k] : floor_state.labels) CHECK(k == 1);

  SolverPool single{{{"only", "Only", 1}}};
  for (auto mode : {InitMode::kCeilHalf, InitMode::kFloorHalf}) {
    auto s = init_labels(single, ids, mode);
    for (const auto& [id, k] : s.labels) CHECK(k == 1);
  }

  auto fixed = init_labels(pool, ids, InitMode::kFixed, 3);
  for (const auto& [id, k] : fixed.labels) CHECK(k == 3);

  CHECK_THROWS_AS(init_labels(pool, {}, InitMode::kCeilHalf),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_labels(pool, ids, InitMode::kFixed, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_labels(pool, ids, InitMode::kFixed, 0),
                  std::invalid_argument);
}

TEST_CASE("update_label branches") {
  CHECK(update_label(2, 0, 8, 3) == 3);
  CHECK(update_label(3, 0, 8, 3) == 3);  // upper clamp
  CHECK(update_label(2, 8, 8, 3) == 1);
  CHECK(update_label(1, 8, 8, 3) == 1);  // lower clamp
  CHECK(update_label(2, 3, 8, 3) == 2);  // otherwise unchanged

  CHECK_THROWS_AS(update_label(2, 9, 8, 3), std::invalid_argument);
  CHECK_THROWS_AS(update_label(0, 0, 8, 3), std::invalid_argument);
  CHECK_THROWS_AS(update_label(4, 0, 8, 3), std::invalid_argument);
}

TEST_CASE("assign_solver lookup") {
  const auto pool = pool3();
  auto state = init_labels(pool, {"x"}, InitMode::kCeilHalf);
  CHECK(assign_solver(state, pool, "x").id == "b");

  state.labels["x"] = update_label(state.labels["x"], 0, 8, 3);
  CHECK(assign_solver(state, pool, "x").id == "c");

  SolverPool single{{{"only", "Only", 1}}};
  auto s1 = init_labels(single, {"x"}, InitMode::kCeilHalf);
  CHECK(assign_solver(s1, single, "x").id == "only");

  CHECK_THROWS_AS(assign_solver(state, pool, "nope"), std::out_of_range);
}

TEST_CASE("snapshot_distribution counting") {
  const auto pool = pool3();
  CurriculumState state;
  state.pool_size = 3;
  state.labels = {{"a", 1}, {"b", 1}, {"c", 3}};
  auto snap = snapshot_distribution(state);
  CHECK(snap.counts == std::vector<long>{2, 0, 1});

  std::vector<std::string> many;
  for (int i = 0; i < 100; ++i) many.push_back("s" + std::to_string(i));
  auto fresh = init_labels(pool, many, InitMode::kCeilHalf);
  CHECK(snapshot_distribution(fresh).counts == std::vector<long>{0, 100, 0});

  for (auto& [id, k] : fresh.labels) k = update_label(k, 0, 8, 3);
  CHECK(snapshot_distribution(fresh).counts == std::vector<long>{0, 0, 100});
}

TEST_CASE("oracle equivalence and clamping over random trajectories") {
  auto rng = make_rng(101);
  for (int trial = 0; trial < 10000; ++trial) {
    const int pool_size = 1 + static_cast<int>(rng() % 5);
    const int g = 1 + static_cast<int>(rng() % 12);
    int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(pool_size));
    int k_oracle = k;
    for (int step = 0; step < 20; ++step) {
      const int s = static_cast<int>(rng() % static_cast<unsigned>(g + 1));
      k = update_label(k, s, g, pool_size);
      k_oracle = oracle_update(k_oracle, s, g, pool_size);
      REQUIRE(k == k_oracle);
      REQUIRE(k >= 1);
      REQUIRE(k <= pool_size);
    }
  }
}

TEST_CASE("monotone escalation and fixed point") {
  // m consecutive total failures from label k land at min(K, k+m)
  for (int pool_size = 1; pool_size <= 5; ++pool_size) {
    for (int start = 1; start <= pool_size; ++start) {
      int k = start;
      for (int m = 1; m <= 8; ++m) {
        k = update_label(k, 0, 4, pool_size);
        CHECK(k == std::min(pool_size, start + m));
      }
    }
  }
  // partial success is a no-op for any label
  for (int k = 1; k <= 3; ++k)
    for (int s = 1; s < 8; ++s) CHECK(update_label(k, s, 8, 3) == k);
}

TEST_CASE("histogram conservation") {
  auto rng = make_rng(7);
  const auto pool = pool3();
  std::vector<std::string> ids;
  for (int i = 0; i < 57; ++i) ids.push_back("s" + std::to_string(i));
  auto state = init_labels(pool, ids, InitMode::kCeilHalf);
  for (int round = 0; round < 50; ++round) {
    for (auto& [id, k] : state.labels)
      k = update_label(k, static_cast<int>(rng() % 9), 8, 3);
    auto snap = snapshot_distribution(state);
    long total = 0;
    for (long c : snap.counts) total += c;
    CHECK(total == 57);
  }
}

TEST_CASE("label record round trip") {
  const auto pool = pool3();
  auto state = init_labels(pool, {"x", "y"}, InitMode::kCeilHalf);
  state.epoch = 4;
  state.labels["y"] = 3;
  auto restored = deserialize_labels(serialize_labels(state));
  CHECK(restored.epoch == 4);
  CHECK(restored.pool_size == 3);
  CHECK(restored.labels == state.labels);

  CHECK_THROWS(deserialize_labels("garbage"));
}

TEST_CASE("pool validation") {
  SolverPool gap{{{"a", "A", 1}, {"b", "B", 3}}};
  CHECK_THROWS_AS(gap.validate(), std::invalid_argument);
  SolverPool empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  CHECK_NOTHROW(pool3().validate());
}
