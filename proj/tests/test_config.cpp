#include <doctest.h>

#include <stdexcept>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "requer/checkpoint.hpp"
#include "requer/commands.hpp"
#include "requer/config.hpp"
#include "requer/metrics.hpp"

using namespace requer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "requer-config-tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const auto path = work_dir() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json base_config() {
  return json{
      {"seed", 7},
      {"pool", json::array({json{{"id", "weak"}, {"name", "Weak"}},
                            json{{"id", "strong"}, {"name", "Strong"}}})},
      {"gateway",
       {{"class", "simulator"},
        {"competence", {{"base_per_rank", json::array({0.3, 0.9})}}}}},
      {"judge", {{"class", "simulator"}}},
      {"hyperparameters", {{"group_size", 4}, {"batch_size", 2}, {"epochs", 2}}},
  };
}

std::string expect_config_error(const json& root) {
  try {
    config::parse_config(root);
  } catch (const config::ConfigError& e) {
    return e.what();
  }
  FAIL("expected ConfigError");
  return "";
}

std::string sample_jsonl() {
  std::string text;
  for (int i = 0; i < 4; ++i) {
    json line = {{"id", "s" + std::to_string(i)},
                 {"question", "What is " + std::to_string(i) + " plus 1?"},
                 {"answer", std::to_string(i + 1)}};
    text += line.dump() + "\n";
  }
  return text;
}

checkpoint::Checkpoint sample_checkpoint() {
  checkpoint::Checkpoint ckpt;
  ckpt.epoch = 3;
  ckpt.seed = 99;
  ckpt.theta = policy::zero_params(2, 3);
  ckpt.theta.at(0, 1) = 0.5;
  ckpt.theta_old = ckpt.theta;
  ckpt.pi_ref = policy::zero_params(2, 3);
  ckpt.catalog_names = {"identity", "a", "b"};
  ckpt.labels.pool_size = 2;
  ckpt.labels.epoch = 3;
  ckpt.labels.labels = {{"s0", 1}, {"s1", 2}};
  return ckpt;
}

}  // namespace

TEST_CASE("parse_config round trip") {
  const auto c = config::parse_config(base_config());
  CHECK(c.seed == 7);
  CHECK(c.pool.size() == 2);
  CHECK(c.pool.entries[0].rank == 1);
  CHECK(c.hp.group_size == 4);
  CHECK(c.hp.kl_beta == 0.05);  // default survives partial hyperparameters

  const auto c2 = config::parse_config(config::config_to_json(c));
  CHECK(config::config_to_json(c2) == config::config_to_json(c));
}

TEST_CASE("unknown keys are rejected with a field path") {
  auto root = base_config();
  root["hyperparameters"]["group_sze"] = 8;
  const auto msg = expect_config_error(root);
  CHECK(msg.find("config.hyperparameters") != std::string::npos);
  CHECK(msg.find("group_sze") != std::string::npos);

  auto root2 = base_config();
  root2["typo_at_top_level"] = 1;
  CHECK(expect_config_error(root2).find("typo_at_top_level") !=
        std::string::npos);

  auto root3 = base_config();
  root3["gateway"]["competence"]["base_rank"] = json::array({0.5});
  CHECK(expect_config_error(root3).find("config.gateway.competence") !=
        std::string::npos);
}

TEST_CASE("config validation") {
  auto bad_group = base_config();
  bad_group["hyperparameters"]["group_size"] = 1;
  CHECK(expect_config_error(bad_group).find("group_size") != std::string::npos);

  auto bad_clip = base_config();
  bad_clip["hyperparameters"]["eps_clip"] = 1.0;
  CHECK(expect_config_error(bad_clip).find("eps_clip") != std::string::npos);

  auto bad_mode = base_config();
  bad_mode["hyperparameters"]["init_label_mode"] = "median";
  CHECK(expect_config_error(bad_mode).find("init_label_mode") !=
        std::string::npos);

  auto bad_fixed = base_config();
  bad_fixed["hyperparameters"]["init_label_mode"] = "fixed";
  bad_fixed["hyperparameters"]["init_label_fixed"] = 5;
  CHECK(expect_config_error(bad_fixed).find("init_label_fixed") !=
        std::string::npos);

  auto no_pool = base_config();
  no_pool.erase("pool");
  CHECK(expect_config_error(no_pool).find("config.pool") != std::string::npos);

  // cross-field: simulator competence must cover the pool
  auto bad_competence = base_config();
  bad_competence["gateway"]["competence"]["base_per_rank"] =
      json::array({0.3});
  CHECK_THROWS(config::parse_config(bad_competence));

  auto bad_mocks = base_config();
  bad_mocks["gateway"]["class"] = "mock";
  bad_mocks["gateway"].erase("competence");
  bad_mocks["gateway"]["mocks"] = json::array(
      {json{{"behavior", "echo-gold"}}, json{{"behavior", "wrong"}},
       json{{"behavior", "wrong"}}});
  CHECK(expect_config_error(bad_mocks).find("mocks") != std::string::npos);

  auto bad_lambda = base_config();
  bad_lambda["hyperparameters"]["lambda"] = -1.0;
  CHECK(expect_config_error(bad_lambda).find("lambda") != std::string::npos);
}

TEST_CASE("load_config file handling") {
  CHECK_THROWS_AS(config::load_config(
                      (work_dir() / "does-not-exist.json").string()),
                  config::ConfigError);
  const auto bad = write_file("bad.json", "{not json");
  CHECK_THROWS_AS(config::load_config(bad), config::ConfigError);

  auto root = base_config();
  root["dataset"] = (work_dir() / "missing.jsonl").string();
  const auto missing_ref = write_file("missing-ref.json", root.dump());
  CHECK_THROWS_AS(config::load_config(missing_ref), config::ConfigError);

  root["dataset"] = write_file("ok-data.jsonl", sample_jsonl());
  const auto good = write_file("good.json", root.dump());
  CHECK_NOTHROW(config::load_config(good));
}

TEST_CASE("load_samples") {
  const auto path = write_file("samples.jsonl", sample_jsonl());
  const auto samples = config::load_samples(path);
  CHECK(samples.size() == 4);
  CHECK(samples[0].id == "s0");
  CHECK(samples[0].gold_answer == "1");

  const auto dup = write_file(
      "dup.jsonl",
      R"({"id":"a","question":"q","answer":"1"})" "\n"
      R"({"id":"a","question":"q","answer":"2"})" "\n");
  try {
    config::load_samples(dup);
    FAIL("expected ConfigError");
  } catch (const config::ConfigError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }

  const auto empty_field = write_file(
      "empty-field.jsonl", R"({"id":"a","question":"","answer":"1"})" "\n");
  CHECK_THROWS_AS(config::load_samples(empty_field), config::ConfigError);
  const auto missing_key =
      write_file("missing-key.jsonl", R"({"id":"a","question":"q"})" "\n");
  CHECK_THROWS_AS(config::load_samples(missing_key), config::ConfigError);
  const auto empty = write_file("empty.jsonl", "");
  CHECK_THROWS_AS(config::load_samples(empty), config::ConfigError);
}

TEST_CASE("load_demos") {
  const auto path = write_file("demos.jsonl",
                               R"({"sample_id":"s0","action_id":2})" "\n"
                               R"({"sample_id":"s1","action_id":0})" "\n");
  const auto demos = config::load_demos(path);
  REQUIRE(demos.size() == 2);
  CHECK(demos[0] == std::pair<std::string, int>("s0", 2));

  const auto bad = write_file("demos-bad.jsonl", R"({"sample_id":"s0"})" "\n");
  CHECK_THROWS_AS(config::load_demos(bad), config::ConfigError);
}

TEST_CASE("load_leak_corpus") {
  const auto scored = write_file("corpus-ratio.jsonl",
                                 R"({"ratio":17.5,"is_leak":true})" "\n"
                                 R"({"ratio":1.17,"is_leak":false})" "\n");
  const auto corpus = config::load_leak_corpus(scored, nullptr, 1e-8);
  REQUIRE(corpus.size() == 2);
  CHECK(corpus[0].ratio == doctest::Approx(17.5));
  CHECK(corpus[0].is_leak);

  json pair = {{"raw_query", "What is 6*7?"},
               {"refined_query", "What is 6*7? The answer is 42."},
               {"gold_answer", "42"},
               {"is_leak", true}};
  const auto unscored = write_file("corpus-pairs.jsonl", pair.dump() + "\n");
  gateway::SimulatorJudge judge;
  const auto judged = config::load_leak_corpus(unscored, &judge, 1e-8);
  REQUIRE(judged.size() == 1);
  CHECK(judged[0].ratio > 5.0);

  CHECK_THROWS_AS(config::load_leak_corpus(unscored, nullptr, 1e-8),
                  config::ConfigError);
  const auto incomplete =
      write_file("corpus-bad.jsonl", R"({"is_leak":true})" "\n");
  CHECK_THROWS_AS(config::load_leak_corpus(incomplete, &judge, 1e-8),
                  config::ConfigError);
}

TEST_CASE("build helpers") {
  auto c = config::parse_config(base_config());
  const auto catalog = config::build_catalog(c.policy);
  CHECK(catalog.size() == 8);
  const auto rc = config::build_rollout_config(c);
  CHECK(rc.group_size == 4);
  CHECK(rc.batch_size == 2);
  CHECK(config::init_mode_of(c) == curriculum::InitMode::kCeilHalf);

  const auto hub = config::build_hub(c);
  CHECK(hub.solvers.size() == 2);
  CHECK(hub.judge != nullptr);
  CHECK(hub.refiner == nullptr);
  CHECK(hub.deterministic());

  c.schedule.kind = "improving";
  c.schedule.improving_target = "not-an-action";
  CHECK_THROWS_AS(config::build_schedule(c, catalog), config::ConfigError);
  c.schedule.improving_target = "cot-structuring";
  const auto schedule = config::build_schedule(c, catalog);
  CHECK(schedule.improving_target_action == catalog.find("cot-structuring"));
}

TEST_CASE("checkpoint round trip and corruption detection") {
  const auto path = (work_dir() / "ckpt.json").string();
  const auto ckpt = sample_checkpoint();
  checkpoint::save(ckpt, path);
  const auto loaded = checkpoint::load(path);
  CHECK(loaded.epoch == ckpt.epoch);
  CHECK(loaded.seed == ckpt.seed);
  CHECK(loaded.theta.weights == ckpt.theta.weights);
  CHECK(loaded.catalog_names == ckpt.catalog_names);
  CHECK(loaded.labels.labels == ckpt.labels.labels);

  // flip one stored weight: the digest must catch it
  auto text = read_file(path);
  const auto pos = text.find("0.5");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 3, "0.7");
  const auto corrupted = write_file("ckpt-corrupt.json", text);
  CHECK_THROWS_WITH_AS(checkpoint::load(corrupted),
                       doctest::Contains("digest mismatch"),
                       std::runtime_error);

  auto versioned = read_file(path);
  const auto vpos = versioned.find("requer-checkpoint/1");
  REQUIRE(vpos != std::string::npos);
  versioned.replace(vpos, 19, "requer-checkpoint/9");
  const auto wrong_version = write_file("ckpt-version.json", versioned);
  CHECK_THROWS_WITH_AS(checkpoint::load(wrong_version),
                       doctest::Contains("version"), std::runtime_error);

  CHECK_THROWS_AS(checkpoint::load((work_dir() / "nope.json").string()),
                  std::runtime_error);
}

TEST_CASE("metrics log schema header and append mode") {
  const auto path = (work_dir() / "metrics.log").string();
  {
    metrics::MetricsLog log(path, false);
    log.event(0, 0, "group", {{"x", 1}});
    log.event(0, 1, "batch", {{"y", 2}});
  }
  {
    metrics::MetricsLog log(path, true);  // append must not rewrite the header
    log.event(1, 0, "epoch-summary", {{"z", 3}});
  }
  std::ifstream in(path);
  std::string line;
  std::vector<json> lines;
  while (std::getline(in, line)) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].at("schema") == metrics::MetricsLog::kSchema);
  CHECK(lines[1].at("kind") == "group");
  CHECK(lines[1].at("ts") == 0);
  CHECK(lines[2].at("ts") == 1);
  CHECK(lines[3].at("epoch") == 1);
  // logical timestamps only: no wall-clock field anywhere
  for (const auto& l : lines) CHECK_FALSE(l.contains("wall_time"));
}

TEST_CASE("secrets never serialize") {
  ::setenv("REQUER_CFG_TEST_KEY", "sk-super-secret-value", 1);
  auto root = base_config();
  root["gateway"]["class"] = "remote";
  root["gateway"].erase("competence");
  root["gateway"]["endpoints"] = json::array(
      {json{{"base_url", "http://127.0.0.1:1"},
            {"model", "m"},
            {"api_key_env", "REQUER_CFG_TEST_KEY"}},
       json{{"base_url", "http://127.0.0.1:1"},
            {"model", "m"},
            {"api_key_env", "REQUER_CFG_TEST_KEY"}}});
  const auto c = config::parse_config(root);
  const std::string dumped = config::config_to_json(c).dump();
  CHECK(dumped.find("sk-super-secret-value") == std::string::npos);
  CHECK(dumped.find("REQUER_CFG_TEST_KEY") != std::string::npos);

  const auto ckpt_path = (work_dir() / "secret-ckpt.json").string();
  checkpoint::save(sample_checkpoint(), ckpt_path);
  CHECK(read_file(ckpt_path).find("sk-super-secret-value") ==
        std::string::npos);
  ::unsetenv("REQUER_CFG_TEST_KEY");
}

namespace {

// Mock-gateway training config written to disk for the command-level tests.
std::string write_train_config(const std::string& tag, int epochs) {
  const auto dataset = write_file("train-" + tag + ".jsonl", sample_jsonl());
  json root = base_config();
  root["dataset"] = dataset;
  root["output_dir"] = (work_dir() / ("out-" + tag)).string();
  root["gateway"] = {{"class", "mock"},
                     {"mocks", json::array({json{{"behavior", "alternate"}}})}};
  root["judge"] = {{"class", "mock"}, {"default_ppl", 1.2}};
  root["hyperparameters"] = {{"group_size", 4},
                             {"batch_size", 2},
                             {"epochs", epochs},
                             {"learning_rate", 0.05}};
  return write_file("train-" + tag + ".json", root.dump());
}

}  // namespace

TEST_CASE("cmd_train exit codes and artifacts") {
  CHECK(commands::cmd_train((work_dir() / "no-such.json").string(),
                            std::nullopt, {}) == 2);

  const auto cfg = write_train_config("basic", 2);
  CHECK(commands::cmd_train(cfg, std::nullopt, {}) == 0);
  const auto out = work_dir() / "out-basic";
  CHECK(fs::exists(out / "metrics.log"));
  CHECK(fs::exists(out / "checkpoint_epoch_0.json"));
  CHECK(fs::exists(out / "checkpoint_epoch_1.json"));
  CHECK(fs::exists(out / "checkpoint_final.json"));
  const auto final_ckpt = checkpoint::load((out / "checkpoint_final.json").string());
  CHECK(final_ckpt.epoch == 2);

  // a dataset-less config is a configuration error
  json root = base_config();
  const auto no_dataset = write_file("train-nodata.json", root.dump());
  CHECK(commands::cmd_train(no_dataset, std::nullopt, {}) == 2);
}

TEST_CASE("cmd_train runs are replayable and resume-equivalent") {
  const auto cfg_a = write_train_config("replay-a", 2);
  const auto cfg_b = write_train_config("replay-b", 2);
  REQUIRE(commands::cmd_train(cfg_a, std::nullopt, {}) == 0);
  REQUIRE(commands::cmd_train(cfg_b, std::nullopt, {}) == 0);
  const auto log_a = read_file((work_dir() / "out-replay-a/metrics.log").string());
  const auto log_b = read_file((work_dir() / "out-replay-b/metrics.log").string());
  CHECK(log_a == log_b);  // byte-identical under a deterministic gateway

  // interrupted run: one epoch, then resume from its checkpoint for epoch 2
  const auto cfg_c = write_train_config("resume", 2);
  commands::Overrides one_epoch;
  one_epoch.epochs = 1;
  REQUIRE(commands::cmd_train(cfg_c, std::nullopt, one_epoch) == 0);
  const auto resume_from =
      (work_dir() / "out-resume/checkpoint_epoch_0.json").string();
  REQUIRE(commands::cmd_train(cfg_c, resume_from, {}) == 0);

  const auto direct = checkpoint::load(
      (work_dir() / "out-replay-a/checkpoint_final.json").string());
  const auto resumed = checkpoint::load(
      (work_dir() / "out-resume/checkpoint_final.json").string());
  CHECK(resumed.theta.weights == direct.theta.weights);
  CHECK(resumed.labels.labels == direct.labels.labels);
  const auto log_c = read_file((work_dir() / "out-resume/metrics.log").string());
  CHECK(log_c == log_a);
}

TEST_CASE("cmd_eval and cmd_leak_check exit codes") {
  const auto cfg = write_train_config("eval", 1);
  CHECK(commands::cmd_eval(cfg, "no-such-mode", {}) == 2);
  CHECK(commands::cmd_eval(cfg, "avg-at-k", {}) == 0);
  CHECK(commands::cmd_eval(cfg, "cross-model", {}) == 0);
  CHECK(commands::cmd_eval(cfg, "length-delta", {}) == 0);

  // verdicts are reported on stdout and never fail the process
  CHECK(commands::cmd_leak_check(cfg, "q", "q leaked", "42", std::nullopt,
                                 std::nullopt) == 0);
  CHECK(commands::cmd_inspect((work_dir() / "nope.json").string()) == 1);

  const auto corpus = write_file("sweep.jsonl",
                                 R"({"ratio":10.0,"is_leak":true})" "\n"
                                 R"({"ratio":1.1,"is_leak":false})" "\n");
  CHECK(commands::cmd_leak_sweep(cfg, corpus, {2.0, 5.0}) == 0);
  CHECK(commands::cmd_leak_sweep(cfg, corpus, {}) == 2);
}
