#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "srender/config.hpp"
#include "test_support.hpp"

namespace srender {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("srender_config_test_" + name);
  if (fs::exists(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      fs::permissions(e.path(), fs::perms::owner_all, fs::perm_options::add);
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

TEST(Config, EmptyFileGivesDefaults) {
  const TrainConfig cfg = parse_config("");
  EXPECT_EQ(cfg.weights.lambda_fm, 100.0);
  EXPECT_EQ(cfg.weights.lambda_rec, 10.0);
  EXPECT_EQ(cfg.weights.lambda_str, 0.002);
  EXPECT_EQ(cfg.lr0, 2e-4);
  EXPECT_EQ(cfg.epochs_const, 100);
  EXPECT_EQ(cfg.epochs_decay, 100);
  EXPECT_EQ(cfg.batch_size, 1);
  EXPECT_EQ(cfg.beta1, 0.5);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(config_to_json(cfg), config_to_json(TrainConfig{}));
}

TEST(Config, SingleOverrideChangesOnlyThatKey) {
  const nlohmann::json base = config_to_json(parse_config(""));
  const nlohmann::json ablated = config_to_json(parse_config("lambda_str = 0\n"));
  EXPECT_EQ(ablated.at("lambda_str").get<double>(), 0.0);
  nlohmann::json a = base, b = ablated;
  a.erase("lambda_str");
  b.erase("lambda_str");
  EXPECT_EQ(a, b);
}

TEST(Config, TypoIsUnknownKey) {
  EXPECT_SRENDER_ERROR(parse_config("lamda_str = 0\n"), Errc::UnknownKey);
}

TEST(Config, MalformedInputIsParseError) {
  EXPECT_SRENDER_ERROR(parse_config("lr0 2e-4\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("lr0 = fast\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("epochs_const = 1.5\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("augment = 1\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("seed = -3\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("lr0 = 1e-3\nlr0 = 2e-3\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("[training]\n"), Errc::ParseError);
  EXPECT_SRENDER_ERROR(parse_config("profile = \n"), Errc::ParseError);
}

TEST(Config, InvalidValuesAreRejected) {
  EXPECT_SRENDER_ERROR(parse_config("lambda_fm = -1\n"), Errc::NegativeWeight);
  EXPECT_SRENDER_ERROR(parse_config("profile = \"huge\"\n"), Errc::BadConfig);
  EXPECT_SRENDER_ERROR(parse_config("stroke_layers = [\"logits\"]\n"), Errc::BadConfig);
}

TEST(Config, TomlSyntax) {
  const TrainConfig cfg = parse_config(
      "# toy run\n"
      "profile = 'micro_8'   # literal string\n"
      "seed = 1_000\n"
      "\"lr0\" = 1e-3\n"
      "perceptual_layers = [0, 2]\n"
      "stroke_layers = [\"final_conv\"]\n"
      "augment = false\n"
      "\n"
      "max_steps = 50\n");
  EXPECT_EQ(cfg.profile, "micro_8");
  EXPECT_EQ(cfg.seed, 1000u);
  EXPECT_EQ(cfg.lr0, 1e-3);
  EXPECT_EQ(cfg.layers.perceptual, (std::vector<int>{0, 2}));
  EXPECT_EQ(cfg.layers.stroke, (std::vector<std::string>{"final_conv"}));
  EXPECT_FALSE(cfg.augment);
  EXPECT_EQ(cfg.max_steps, 50);
}

TEST(Config, TextAndJsonRoundTrip) {
  TrainConfig cfg;
  cfg.lr0 = 3.3e-4;
  cfg.weights.lambda_rec = 7.0;
  cfg.layers.perceptual = {1, 3};
  cfg.profile = "micro_8";
  cfg.seed = 99;
  EXPECT_EQ(config_to_json(parse_config(config_to_text(cfg))), config_to_json(cfg));
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))), config_to_json(cfg));
  nlohmann::json typo = config_to_json(cfg);
  typo["lamda_str"] = 0;
  EXPECT_SRENDER_ERROR(config_from_json(typo), Errc::UnknownKey);
}

TEST(Config, LoadFromFile) {
  const fs::path dir = scratch("load");
  std::ofstream(dir / "run.toml") << "epochs_const = 3\nepochs_decay = 2\n";
  const TrainConfig cfg = load_config(dir / "run.toml");
  EXPECT_EQ(cfg.total_epochs(), 5);
  EXPECT_SRENDER_ERROR(load_config(dir / "missing.toml"), Errc::ParseError);
}

TEST(RunManifest, WrittenOnceAndReadOnly) {
  const fs::path dir = scratch("manifest");
  RunManifest m;
  m.command = "train";
  m.config = config_to_json(TrainConfig{});
  m.data = {{"pairs", "0badf00d"}};
  m.operator_fingerprint = "dog:abc";
  m.seed = 4;
  m.started_at = utc_timestamp();
  const fs::path first = write_run_manifest(dir, m);
  EXPECT_EQ(first.filename(), "run_manifest_train.json");
  EXPECT_EQ(fs::status(first).permissions() & fs::perms::owner_write, fs::perms::none);
  const fs::path second = write_run_manifest(dir, m);
  EXPECT_NE(first, second);
  const RunManifest back = read_run_manifest(first);
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.code_version, SRENDER_VERSION);
}

TEST(RunManifest, SameRunIgnoresTimestamp) {
  RunManifest a;
  a.command = "train";
  a.started_at = "2020-01-01T00:00:00Z";
  RunManifest b = a;
  b.started_at = "2021-01-01T00:00:00Z";
  EXPECT_TRUE(a.same_run(b));
  b.seed = 1;
  EXPECT_FALSE(a.same_run(b));
}

TEST(ContentHash, TracksFileAndDirectoryContents) {
  const fs::path dir = scratch("hash");
  fs::create_directories(dir / "d" / "sub");
  std::ofstream(dir / "d" / "a.txt") << "alpha";
  std::ofstream(dir / "d" / "sub" / "b.txt") << "beta";
  const std::string file_hash = content_hash(dir / "d" / "a.txt");
  EXPECT_EQ(file_hash, crc32_hex("alpha"));
  const std::string dir_hash = content_hash(dir / "d");
  EXPECT_EQ(dir_hash, content_hash(dir / "d"));
  std::ofstream(dir / "d" / "sub" / "b.txt") << "gamma";
  EXPECT_NE(dir_hash, content_hash(dir / "d"));
}

}  // namespace
}  // namespace srender
