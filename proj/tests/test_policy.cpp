#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "requer/policy.hpp"
#include "requer/util.hpp"

using namespace requer;
using namespace requer::policy;

namespace {

PolicyParams random_params(std::size_t dim, std::size_t actions,
                           std::mt19937_64& rng, double scale = 1.0) {
  auto p = zero_params(dim, actions);
  for (auto& w : p.weights) w = (next_unit(rng) * 2.0 - 1.0) * scale;
  return p;
}

Features random_features(std::size_t dim, std::mt19937_64& rng) {
  Features f(dim);
  for (auto& x : f) x = next_unit(rng) * 2.0 - 1.0;
  return f;
}

double objective_only(const PolicyParams& theta, const PolicyParams& theta_old,
                      const PolicyParams& ref,
                      const std::vector<GroupBatchItem>& batch, double beta,
                      double eps_clip) {
  return objective_and_gradient(theta, theta_old, ref, batch, beta, eps_clip)
      .objective;
}

}  // namespace

TEST_CASE("action_probabilities") {
  auto theta = zero_params(2, 4);
  Features f{1.0, 0.5};
  auto p = action_probabilities(theta, f);
  for (double x : p) CHECK(x == doctest::Approx(0.25));

  // logits [ln 3, 0] -> [0.75, 0.25]
  auto two = zero_params(1, 2);
  two.at(0, 0) = std::log(3.0);
  auto p2 = action_probabilities(two, {1.0});
  CHECK(p2[0] == doctest::Approx(0.75));
  CHECK(p2[1] == doctest::Approx(0.25));

  // shift invariance
  auto three = zero_params(1, 3);
  for (std::size_t a = 0; a < 3; ++a) three.at(0, a) = 1.0;
  auto p3 = action_probabilities(three, {1.0});
  for (double x : p3) CHECK(x == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(action_probabilities(theta, {1.0}), std::invalid_argument);
}

TEST_CASE("softmax translation invariance") {
  auto rng = make_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto theta = random_params(1, 5, rng);
    auto shifted = theta;
    for (std::size_t a = 0; a < 5; ++a) shifted.at(0, a) += 3.7;
    auto p = action_probabilities(theta, {1.0});
    auto q = action_probabilities(shifted, {1.0});
    for (std::size_t a = 0; a < 5; ++a)
      CHECK(std::abs(p[a] - q[a]) < 1e-10);
  }
}

TEST_CASE("sample_group determinism and degenerate distribution") {
  auto theta = zero_params(1, 3);
  theta.at(0, 0) = 50.0;  // effectively all mass on action 0
  auto g = sample_group(theta, {1.0}, 8, 42);
  for (int a : g) CHECK(a == 0);

  auto uniform = zero_params(1, 4);
  auto g1 = sample_group(uniform, {1.0}, 16, 7);
  auto g2 = sample_group(uniform, {1.0}, 16, 7);
  CHECK(g1 == g2);

  CHECK_THROWS_AS(sample_group(uniform, {1.0}, 1, 7), std::invalid_argument);
}

TEST_CASE("sample_group binomial concentration") {
  // uniform over 2 actions, n = 1e5: P(freq outside [0.49, 0.51]) is below
  // 3e-10 by the exact binomial tail, so a single seeded draw must pass
  auto theta = zero_params(1, 2);
  const auto g = sample_group(theta, {1.0}, 100000, 1234);
  long zeros = 0;
  for (int a : g) zeros += a == 0;
  const double freq = static_cast<double>(zeros) / 100000.0;
  CHECK(freq > 0.49);
  CHECK(freq < 0.51);
}

TEST_CASE("normalize_advantages") {
  const auto g = normalize_advantages({1, 0, 0, 1, 0, 1, 0, 0}, 1e-8);
  CHECK(g.mean == doctest::Approx(0.375));
  CHECK(g.stddev == doctest::Approx(0.484122918).epsilon(1e-6));
  for (std::size_t j = 0; j < g.rewards.size(); ++j) {
    const double expected = g.rewards[j] == 1.0 ? 1.2909944 : -0.7745967;
    CHECK(g.advantages[j] == doctest::Approx(expected).epsilon(1e-5));
  }

  const auto constant = normalize_advantages({1, 1, 1, 1}, 1e-8);
  for (double a : constant.advantages) CHECK(std::abs(a) < 1e-12);

  const auto pair = normalize_advantages({2, 0}, 1e-8);
  CHECK(pair.advantages[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(pair.advantages[1] == doctest::Approx(-1.0).epsilon(1e-7));

  CHECK_THROWS_AS(normalize_advantages({1.0}, 1e-8), std::invalid_argument);
}

TEST_CASE("advantage statistics over random groups") {
  auto rng = make_rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 14;
    std::vector<double> rewards(n);
    for (auto& r : rewards) r = next_unit(rng) * 4.0 - 2.0;
    rewards[0] += 0.5;  // guarantee non-constant
    const auto g = normalize_advantages(rewards, 1e-8);
    double mean = 0.0, var = 0.0;
    for (double a : g.advantages) mean += a;
    mean /= static_cast<double>(n);
    for (double a : g.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-9);
    // std(A) equals exactly std/(std + eps)
    const double expected = g.stddev / (g.stddev + 1e-8);
    CHECK(std::abs(std::sqrt(var) - expected) < 1e-9);
    CHECK(expected <= 1.0);
    CHECK(expected > 1.0 - 1e-6);
  }
}

TEST_CASE("positive reward rescaling preserves advantage signs and order") {
  auto rng = make_rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rewards(8);
    for (auto& r : rewards) r = next_unit(rng) * 2.0 - 1.0;
    rewards[0] += 1.0;
    const double c = 0.1 + next_unit(rng) * 9.9;
    std::vector<double> scaled = rewards;
    for (auto& r : scaled) r *= c;
    const auto a = normalize_advantages(rewards, 1e-8).advantages;
    const auto b = normalize_advantages(scaled, 1e-8).advantages;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i]) > 1e-9) CHECK(std::signbit(a[i]) == std::signbit(b[i]));
      for (std::size_t j = 0; j < a.size(); ++j)
        if (a[i] > a[j] + 1e-12) CHECK(b[i] > b[j]);
    }
  }
}

TEST_CASE("importance_ratio") {
  auto rng = make_rng(41);
  auto theta = random_params(2, 4, rng);
  Features f{1.0, -0.5};
  for (int a = 0; a < 4; ++a)
    CHECK(importance_ratio(theta, theta, f, a) == doctest::Approx(1.0));

  // current 0.6 vs old 0.3 -> 2.0, via two-action constructions
  auto cur = zero_params(1, 2);
  cur.at(0, 0) = std::log(0.6 / 0.4);
  auto old = zero_params(1, 2);
  old.at(0, 0) = std::log(0.3 / 0.7);
  CHECK(importance_ratio(cur, old, {1.0}, 0) == doctest::Approx(2.0));

  auto cur2 = zero_params(1, 2);
  cur2.at(0, 0) = std::log(0.1 / 0.9);
  auto old2 = zero_params(1, 2);
  old2.at(0, 0) = std::log(0.4 / 0.6);
  CHECK(importance_ratio(cur2, old2, {1.0}, 0) == doctest::Approx(0.25));
}

TEST_CASE("clipped_term") {
  CHECK(clipped_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_term(0.7, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(clipped_term(1.0, 3.3, 0.2) == doctest::Approx(3.3));
  CHECK(clipped_term(1.0, -3.3, 0.2) == doctest::Approx(-3.3));
  CHECK_THROWS_AS(clipped_term(1.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clipped_term(1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("kl_to_reference") {
  auto rng = make_rng(51);
  auto theta = random_params(1, 3, rng);
  CHECK(kl_to_reference(theta, theta, {1.0}) == doctest::Approx(0.0));

  // pi = (0.75, 0.25) vs ref uniform
  auto p = zero_params(1, 2);
  p.at(0, 0) = std::log(3.0);
  auto ref = zero_params(1, 2);
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(kl_to_reference(p, ref, {1.0}) == doctest::Approx(expected));

  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_params(2, 5, rng);
    auto b = random_params(2, 5, rng);
    CHECK(kl_to_reference(a, b, random_features(2, rng)) >= -1e-12);
  }
}

TEST_CASE("objective degenerate stationary case") {
  auto theta = zero_params(2, 3);
  GroupBatchItem item;
  item.features = {1.0, 0.5};
  item.actions = {0, 1};
  item.advantages = {0.0, 0.0};
  const auto result =
      objective_and_gradient(theta, theta, theta, {item}, 0.05, 0.2);
  CHECK(result.objective == doctest::Approx(0.0));
  for (double g : result.grad) CHECK(std::abs(g) < 1e-14);
}

TEST_CASE("on-policy gradient reduces to REINFORCE form") {
  auto rng = make_rng(61);
  auto theta = random_params(1, 3, rng);
  GroupBatchItem item;
  item.features = {1.0};
  item.actions = {0, 1};
  item.advantages = {1.0, -1.0};
  const auto result =
      objective_and_gradient(theta, theta, theta, {item}, 0.0, 0.2);
  CHECK(result.objective == doctest::Approx(0.0));
  // expected: 0.5 * (grad ln pi(a0) - grad ln pi(a1))
  const auto p = action_probabilities(theta, item.features);
  for (std::size_t b = 0; b < 3; ++b) {
    const double g0 = (b == 0 ? 1.0 : 0.0) - p[b];
    const double g1 = (b == 1 ? 1.0 : 0.0) - p[b];
    CHECK(result.grad[b] == doctest::Approx(0.5 * (g0 - g1)).epsilon(1e-10));
  }
}

TEST_CASE("on-policy objective equals mean advantage minus beta KL") {
  auto rng = make_rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    auto theta = random_params(2, 4, rng);
    auto ref = random_params(2, 4, rng);
    GroupBatchItem item;
    item.features = random_features(2, rng);
    item.actions = {0, 1, 2, 3, 1};
    item.advantages.resize(5);
    for (auto& a : item.advantages) a = next_unit(rng) * 2.0 - 1.0;
    const double beta = 0.05;
    const auto result =
        objective_and_gradient(theta, theta, ref, {item}, beta, 0.2);
    double mean_adv = 0.0;
    for (double a : item.advantages) mean_adv += a;
    mean_adv /= 5.0;
    const double expected =
        mean_adv - beta * kl_to_reference(theta, ref, item.features);
    CHECK(std::abs(result.objective - expected) < 1e-12);
  }
}

TEST_CASE("objective is non-increasing in beta for a frozen batch") {
  auto rng = make_rng(81);
  auto theta = random_params(2, 4, rng);
  auto theta_old = random_params(2, 4, rng, 0.3);
  auto ref = random_params(2, 4, rng);
  GroupBatchItem item;
  item.features = random_features(2, rng);
  item.actions = {0, 2, 3};
  item.advantages = {0.5, -0.2, 1.1};
  double prev = objective_only(theta, theta_old, ref, {item}, 0.0, 0.2);
  for (double beta : {0.01, 0.05, 0.2, 1.0}) {
    const double j = objective_only(theta, theta_old, ref, {item}, beta, 0.2);
    CHECK(j <= prev + 1e-12);
    prev = j;
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  auto rng = make_rng(91);
  int accepted = 0;
  while (accepted < 100) {
    const std::size_t dim = 1 + rng() % 8;
    const std::size_t actions = 2 + rng() % 7;
    auto theta = random_params(dim, actions, rng);
    auto theta_old = theta;
    for (auto& w : theta_old.weights) w += (next_unit(rng) * 2.0 - 1.0) * 0.05;
    auto ref = random_params(dim, actions, rng);
    const double beta = next_unit(rng) * 0.2;
    const double eps_clip = 0.2;

    std::vector<GroupBatchItem> batch;
    const int n_items = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n_items; ++i) {
      GroupBatchItem item;
      item.features = random_features(dim, rng);
      const int g = 2 + static_cast<int>(rng() % 5);
      for (int j = 0; j < g; ++j) {
        item.actions.push_back(static_cast<int>(rng() % actions));
        item.advantages.push_back(next_unit(rng) * 2.0 - 1.0);
      }
      batch.push_back(std::move(item));
    }

    // exclude configurations near a clip boundary
    bool near_boundary = false;
    for (const auto& item : batch) {
      const auto p = action_probabilities(theta, item.features);
      const auto p_old = action_probabilities(theta_old, item.features);
      for (int a : item.actions) {
        const double r = p[static_cast<std::size_t>(a)] /
                         p_old[static_cast<std::size_t>(a)];
        if (std::abs(r - (1.0 - eps_clip)) < 1e-4 ||
            std::abs(r - (1.0 + eps_clip)) < 1e-4)
          near_boundary = true;
      }
    }
    if (near_boundary) continue;

    const auto result =
        objective_and_gradient(theta, theta_old, ref, batch, beta, eps_clip);
    const double h = 1e-6;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < theta.weights.size(); ++i) {
      auto plus = theta;
      plus.weights[i] += h;
      auto minus = theta;
      minus.weights[i] -= h;
      const double fd =
          (objective_only(plus, theta_old, ref, batch, beta, eps_clip) -
           objective_only(minus, theta_old, ref, batch, beta, eps_clip)) /
          (2.0 * h);
      const double denom = std::max(std::abs(result.grad[i]), 1e-4);
      max_rel = std::max(max_rel, std::abs(fd - result.grad[i]) / denom);
    }
    CHECK(max_rel < 1e-6);
    ++accepted;
  }
}

TEST_CASE("grpo_step") {
  auto theta = zero_params(2, 2);
  std::vector<double> zero_grad(4, 0.0);
  auto same = grpo_step(theta, zero_grad, 1.0);
  CHECK(same.weights == theta.weights);

  std::vector<double> ones(4, 1.0);
  auto up = grpo_step(theta, ones, 1.0);
  for (double w : up.weights) CHECK(w == doctest::Approx(1.0));

  // two half-steps with a frozen gradient equal one full step
  auto half = grpo_step(grpo_step(theta, ones, 0.5), ones, 0.5);
  auto full = grpo_step(theta, ones, 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(half.weights[i] == doctest::Approx(full.weights[i]));
}

TEST_CASE("warm_start MLE concentration") {
  auto theta = zero_params(1, 3);
  std::vector<std::pair<Features, int>> demos;
  for (int i = 0; i < 20; ++i) demos.emplace_back(Features{1.0}, 0);
  auto trained = warm_start(theta, demos, 400, 0.8);
  const auto p = action_probabilities(trained, {1.0});
  CHECK(p[0] > 0.99);

  // zero steps returns the initial parameters
  auto untouched = warm_start(theta, demos, 0, 0.5);
  CHECK(untouched.weights == theta.weights);

  // symmetric demos converge toward the uniform MLE
  std::vector<std::pair<Features, int>> both;
  for (int i = 0; i < 10; ++i) {
    both.emplace_back(Features{1.0}, 0);
    both.emplace_back(Features{1.0}, 1);
  }
  auto sym = warm_start(zero_params(1, 2), both, 200, 0.5);
  const auto ps = action_probabilities(sym, {1.0});
  CHECK(ps[0] == doctest::Approx(0.5).epsilon(1e-3));

  CHECK_THROWS_AS(warm_start(theta, {}, 10, 0.5), std::invalid_argument);
}

TEST_CASE("warm_start never decreases demo likelihood per pass") {
  auto rng = make_rng(101);
  auto theta = random_params(2, 4, rng);
  std::vector<std::pair<Features, int>> demos;
  for (int i = 0; i < 30; ++i)
    demos.emplace_back(random_features(2, rng), static_cast<int>(rng() % 4));
  double ll = demo_log_likelihood(theta, demos);
  for (int pass = 0; pass < 20; ++pass) {
    theta = warm_start(theta, demos, 1, 2.0);  // deliberately large step
    const double next = demo_log_likelihood(theta, demos);
    CHECK(next >= ll - 1e-12);
    ll = next;
  }
}

TEST_CASE("default catalog") {
  auto catalog = default_catalog(false);
  CHECK(catalog.size() == 8);
  CHECK(catalog.find("identity") == 0);
  CHECK(catalog.find("leak") == -1);
  CHECK_NOTHROW(catalog.validate());

  auto with_leak = default_catalog(true);
  CHECK(with_leak.size() == 9);
  CHECK(with_leak.find("leak") == 8);
}
