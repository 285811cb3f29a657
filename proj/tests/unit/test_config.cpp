#include <doctest.h>

#include <filesystem>

#include "config.hpp"
#include "error.hpp"

using namespace aste;

TEST_CASE("defaults describe the reference setting") {
  ModelConfig c;
  CHECK(c.encoder_name == "bert-base-uncased");
  CHECK(c.d_b == 768);
  CHECK(c.gcn_layers == 2);
  CHECK(c.interaction_layers == 2);
  CHECK(c.epochs == 15);
  CHECK(c.d_s == 500);
  CHECK(c.d_p == 100);
  CHECK(c.lr_encoder == 2e-5);
  CHECK(c.lr_head == 1e-3);
  CHECK(c.batch_size == 8);
  CHECK_FALSE(c.select_on_test);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("top-k policy") {
  ModelConfig c;
  CHECK(c.top_k_for(5) == 10);
  CHECK(c.top_k_for(3) == 9);
  CHECK(c.top_k_for(20) == 20);
  c.top_k = 4;
  CHECK(c.top_k_for(20) == 4);
}

TEST_CASE("invalid configurations are rejected") {
  ModelConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.d_p = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.interaction_layers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.ablation.no_interaction = true;
  CHECK_NOTHROW(c.validate());
  c = ModelConfig{};
  c.pooling = "median";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("JSON round-trip preserves every field") {
  ModelConfig c;
  c.encoder_name = "scratch";
  c.d_b = 32;
  c.dropout = 0.137;
  c.lr_encoder = 3.3e-5;
  c.seed = 123456789012345ULL;
  c.ablation.no_gcn = true;
  c.self_loops = false;
  c.pooling = "max";
  CHECK(config_from_json(to_json(c)) == c);
  const auto path = std::filesystem::temp_directory_path() / "aste_config_test.json";
  save_config(c, path.string());
  CHECK(load_config(path.string()) == c);
  std::filesystem::remove(path);
}

TEST_CASE("partial files fall back to defaults and typos fail") {
  auto c = config_from_json(nlohmann::json::parse(R"({"epochs": 3})"));
  CHECK(c.epochs == 3);
  CHECK(c.d_b == 768);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"epoch": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"ablation": {"no_gnc": true}})")),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"epochs": "x"})")), ConfigError);
}
