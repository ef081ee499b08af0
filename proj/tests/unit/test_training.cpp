#include <doctest.h>

#include <fstream>
#include <limits>

#include "dcorr/core/error.hpp"
#include "dcorr/training/checkpoint.hpp"
#include "dcorr/training/trainer.hpp"
#include "small_config.hpp"
#include "test_util.hpp"

using namespace dcorr;
using dcorr::testing::small_config;
using dcorr::testing::TempDir;
using nlohmann::json;

TEST_CASE("config parsing") {
  auto c = config_from_json(json::object());
  CHECK(c.candidate_fraction == 0.01);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.train.warmup_steps == 500);
  CHECK(c.visibility.top_k == 3);

  auto j = config_to_json(small_config());
  auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(config_hash(back) == config_hash(small_config()));
  CHECK(config_hash(small_config(1)) != config_hash(small_config(2)));

  CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}), ConfigurationError);
  CHECK_THROWS_AS(config_from_json(json{{"train", {{"lr", -1}}}}), ConfigurationError);
  CHECK_THROWS_AS(config_from_json(json{{"matching", {{"candidate_fraction", 1.5}}}}), ConfigurationError);
  CHECK_THROWS_AS(config_from_json(json{{"data", {{"crop", 100}}}}), ConfigurationError);
  try {
    config_from_json(json{{"loss", {{"weights", {{"photo", 1}, {"color", 2}}}}}});
    FAIL("expected a configuration error");
  } catch (const ConfigurationError& e) {
    CHECK(std::string(e.what()).find("loss.weights.color") != std::string::npos);
  }

  TempDir dir;
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigurationError);
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigurationError);
  std::ofstream(dir / "rel.json") << R"({"data": {"root": "videos"}})";
  CHECK(load_config(dir / "rel.json").data.root == std::filesystem::weakly_canonical(dir / "videos"));
}

TEST_CASE("checkpoint schedule") {
  CHECK(checkpoint_schedule(0, 350, 100) == std::vector<int64_t>{100, 200, 300, 350});
  CHECK(checkpoint_schedule(0, 300, 100) == std::vector<int64_t>{100, 200, 300});
  CHECK(checkpoint_schedule(150, 350, 100) == std::vector<int64_t>{200, 300, 350});
}

TEST_CASE("learning rate warmup") {
  auto cfg = small_config();
  cfg.train.warmup_steps = 4;
  CorrespondenceModel model(cfg);
  Trainer t(model);
  CHECK(t.learning_rate_at(0) == doctest::Approx(0.25e-3));
  CHECK(t.learning_rate_at(3) == doctest::Approx(1e-3));
  CHECK(t.learning_rate_at(100) == doctest::Approx(1e-3));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto cfg = small_config();
  auto source = make_pair_source(cfg);
  CorrespondenceModel model(cfg);
  Trainer trainer(model);
  trainer.train_step(source->batch(0, 2));
  auto ck = capture_checkpoint(model, &trainer.optimizer(), trainer.step());
  const auto bytes = encode_checkpoint(ck);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);

  TempDir dir;
  write_checkpoint(ck, dir / "a.dck");
  auto loaded = load_model(dir / "a.dck");
  auto p1 = model.encoder()->parameters(), p2 = loaded->encoder()->parameters();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) CHECK(torch::equal(p1[i], p2[i]));
  write_checkpoint(capture_checkpoint(*loaded, nullptr, 1), dir / "b.dck");

  std::string bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 10)), FormatError);
}

TEST_CASE("frozen components stay fixed during training") {
  auto cfg = small_config();
  CorrespondenceModel model(cfg);
  const auto before = tensor_checksum(model.semantic().frozen_parameters());
  auto enc_before = model.encoder()->parameters()[0].clone();
  auto source = make_pair_source(cfg);
  Trainer t(model);
  for (int s = 0; s < 2; ++s) t.train_step(source->batch(s, 2));
  CHECK(tensor_checksum(model.semantic().frozen_parameters()) == before);
  CHECK_FALSE(torch::equal(enc_before, model.encoder()->parameters()[0]));
}

TEST_CASE("fit is deterministic and resumable") {
  auto cfg = small_config(5);
  auto source = make_pair_source(cfg);
  TempDir a, b;
  FitOptions full_opts;
  full_opts.out_dir = a.path();
  auto full = fit(cfg, *source, full_opts);
  CHECK(full.final_step == 6);
  REQUIRE(full.checkpoints.size() == 2);
  CHECK(full.checkpoints[0].filename() == "ckpt_3.dck");

  FitOptions first;
  first.out_dir = b.path();
  first.stop_after = 3;
  auto part = fit(cfg, *source, first);
  CHECK(part.final_step == 3);
  FitOptions second;
  second.out_dir = b.path();
  second.resume = b / "ckpt_3.dck";
  auto rest = fit(cfg, *source, second);
  CHECK(rest.final_step == 6);

  REQUIRE(full.history.size() == 6);
  REQUIRE(part.history.size() + rest.history.size() == 6);
  for (size_t i = 0; i < 3; ++i) CHECK(std::abs(full.history[i].loss - part.history[i].loss) <= 1e-6);
  for (size_t i = 0; i < 3; ++i) CHECK(std::abs(full.history[i + 3].loss - rest.history[i].loss) <= 1e-6);

  std::ifstream metrics(b / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    auto rec = json::parse(line);
    CHECK(rec.contains("L_p"));
    CHECK(rec["step"].get<int>() == ++lines);
  }
  CHECK(lines == 6);

  auto other = cfg;
  other.train.learning_rate = 5e-4;
  FitOptions bad;
  bad.resume = b / "ckpt_3.dck";
  CHECK_THROWS_AS(fit(other, *source, bad), ConfigurationError);
}

TEST_CASE("non-finite loss aborts the step with the batch ids") {
  auto cfg = small_config();
  cfg.loss.weights.photometric = std::numeric_limits<double>::infinity();
  CorrespondenceModel model(cfg);
  Trainer t(model);
  auto source = make_pair_source(cfg);
  auto batch = source->batch(0, 1);
  batch.ids = {"pair-17"};
  auto before = model.encoder()->parameters()[0].clone();
  try {
    t.train_step(batch);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("pair-17") != std::string::npos);
  }
  CHECK(torch::equal(before, model.encoder()->parameters()[0]));
  CHECK(t.step() == 0);
}
