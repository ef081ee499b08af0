#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include <json.hpp>

#include "../support/small_config_json.hpp"
#include "dcorr/dcorr.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    path = fs::temp_directory_path() / ("dcorr_capi_" + std::to_string(std::rand()) + std::to_string(::time(nullptr)));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

json take(char* s) {
  REQUIRE(s != nullptr);
  auto j = json::parse(s);
  dcorr_string_free(s);
  return j;
}

std::vector<float> pattern_image(int64_t h, int64_t w, int shift) {
  std::vector<float> img(size_t(3 * h * w));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        img[size_t((c * h + y) * w + x)] =
            0.5f + 0.5f * std::sin(0.3f * float(x + shift) * float(c + 1) + 0.2f * float(y) * float(3 - c));
  return img;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strlen(dcorr_version()) > 0);
  CHECK(std::string(dcorr_status_string(DCORR_OK)).size() > 0);
  CHECK(std::string(dcorr_status_string(DCORR_ERR_CONFIGURATION)) != dcorr_status_string(DCORR_ERR_DATA));
  dcorr_set_log_level(3);
  dcorr_model_free(nullptr);
  dcorr_flow_free(nullptr);
  dcorr_string_free(nullptr);
}

TEST_CASE("configuration resolution") {
  Dir d;
  dcorr::testing::write_text(d.path / "c.json", dcorr::testing::small_config_json());
  char* out = nullptr;
  REQUIRE(dcorr_config_resolve((d.path / "c.json").c_str(), R"({"seed": 9})", &out) == DCORR_OK);
  auto j = take(out);
  CHECK(j["config"]["seed"] == 9);
  CHECK(j["config_hash"].get<std::string>().size() == 16);

  CHECK(dcorr_config_resolve((d.path / "missing.json").c_str(), nullptr, &out) == DCORR_ERR_CONFIGURATION);
  CHECK(std::string(dcorr_last_error()).find("missing.json") != std::string::npos);
  CHECK(dcorr_config_resolve((d.path / "c.json").c_str(), "{oops", &out) == DCORR_ERR_ARGUMENT);
  CHECK(dcorr_config_resolve((d.path / "c.json").c_str(), R"({"train": {"speed": 1}})", &out) ==
        DCORR_ERR_CONFIGURATION);
  CHECK(dcorr_config_resolve((d.path / "c.json").c_str(), nullptr, nullptr) == DCORR_ERR_ARGUMENT);
}

TEST_CASE("flow handles") {
  Dir d;
  const int64_t h = 5, w = 7;
  std::vector<float> data(size_t(2 * h * w));
  for (size_t i = 0; i < data.size(); ++i) data[i] = float(i) * 0.37f - 3.0f;
  dcorr_flow* f = nullptr;
  REQUIRE(dcorr_flow_create(h, w, data.data(), &f) == DCORR_OK);
  REQUIRE(dcorr_flow_write(f, (d.path / "f.dfl1").c_str()) == DCORR_OK);
  dcorr_flow* g = nullptr;
  REQUIRE(dcorr_flow_read((d.path / "f.dfl1").c_str(), &g) == DCORR_OK);
  int64_t gh = 0, gw = 0;
  REQUIRE(dcorr_flow_shape(g, &gh, &gw) == DCORR_OK);
  CHECK(gh == h);
  CHECK(gw == w);
  const float* gd = nullptr;
  REQUIRE(dcorr_flow_data(g, &gd) == DCORR_OK);
  CHECK(std::memcmp(gd, data.data(), data.size() * sizeof(float)) == 0);
  dcorr_flow_free(f);
  dcorr_flow_free(g);

  dcorr::testing::write_text(d.path / "bad.dfl1", "NOPE1234");
  CHECK(dcorr_flow_read((d.path / "bad.dfl1").c_str(), &g) == DCORR_ERR_FORMAT);
  CHECK(dcorr_flow_create(0, 3, data.data(), &f) == DCORR_ERR_ARGUMENT);
}

TEST_CASE("models, inference and training") {
  Dir d;
  const auto cfg = (d.path / "c.json").string();
  dcorr::testing::write_text(cfg, dcorr::testing::small_config_json(4));

  dcorr_model* m = nullptr;
  REQUIRE(dcorr_model_from_config(cfg.c_str(), nullptr, &m) == DCORR_OK);
  char* info = nullptr;
  REQUIRE(dcorr_model_info(m, &info) == DCORR_OK);
  auto ij = take(info);
  CHECK(ij["parameters"].get<int64_t>() > 0);

  auto a = pattern_image(64, 64, 0), b = pattern_image(64, 64, 3);
  dcorr_flow* f = nullptr;
  REQUIRE(dcorr_infer_flow(m, a.data(), b.data(), 64, 64, &f) == DCORR_OK);
  int64_t h = 0, w = 0;
  dcorr_flow_shape(f, &h, &w);
  CHECK(h == 64);
  CHECK(w == 64);
  dcorr_flow_free(f);
  CHECK(dcorr_infer_flow(m, nullptr, b.data(), 64, 64, &f) == DCORR_ERR_ARGUMENT);
  dcorr_model_free(m);

  char* summary = nullptr;
  const auto out = (d.path / "run").string();
  REQUIRE(dcorr_train(cfg.c_str(), nullptr, nullptr, out.c_str(), &summary) == DCORR_OK);
  auto s = take(summary);
  CHECK(s["final_step"] == 4);
  CHECK(s["checkpoints"].size() == 2);
  CHECK(fs::exists(fs::path(out) / "metrics.jsonl"));

  dcorr_model* loaded = nullptr;
  REQUIRE(dcorr_model_load((fs::path(out) / "ckpt_4.dck").c_str(), &loaded) == DCORR_OK);
  dcorr_model_free(loaded);
  CHECK(dcorr_model_load((d.path / "nothing.dck").c_str(), &loaded) != DCORR_OK);
  CHECK(loaded == nullptr);

  // A resumed run with a different configuration is refused.
  CHECK(dcorr_train(cfg.c_str(), R"({"train": {"lr": 0.01}})", (fs::path(out) / "ckpt_2.dck").c_str(),
                    (d.path / "run2").c_str(), &summary) == DCORR_ERR_CONFIGURATION);
}

TEST_CASE("revolute fitting") {
  const double kPi = 3.14159265358979323846;
  const double th = 30.0 * kPi / 180.0;
  std::vector<double> src, tgt;
  for (int i = 0; i < 12; ++i) {
    const double x = std::cos(i * 1.3) * 2, y = std::sin(i * 0.7), z = 0.1 * i;
    src.insert(src.end(), {x, y, z});
    // rotate about z through (1, 0, 0)
    const double dx = x - 1, dy = y;
    tgt.insert(tgt.end(), {1 + std::cos(th) * dx - std::sin(th) * dy, std::sin(th) * dx + std::cos(th) * dy, z});
  }
  double axis[3], pivot[3], state = 0;
  REQUIRE(dcorr_fit_revolute(src.data(), tgt.data(), 12, axis, pivot, &state) == DCORR_OK);
  const double sign = axis[2] > 0 ? 1.0 : -1.0;
  CHECK(std::abs(axis[2] * sign - 1.0) < 1e-9);
  CHECK(state * sign == doctest::Approx(30.0));
  CHECK(std::hypot(pivot[0] - 1.0, pivot[1]) < 1e-6);

  CHECK(dcorr_fit_revolute(src.data(), src.data(), 12, axis, pivot, &state) == DCORR_ERR_DATA);
  CHECK(dcorr_last_error_detail() == DCORR_DETAIL_DEGENERATE_MOTION);
  CHECK(dcorr_fit_revolute(src.data(), tgt.data(), 2, axis, pivot, &state) == DCORR_ERR_DATA);
  CHECK(dcorr_last_error_detail() == DCORR_DETAIL_RANK);
}

TEST_CASE("tapvid evaluation needs exactly one flow source") {
  char* report = nullptr;
  CHECK(dcorr_eval_tapvid(nullptr, "/tmp", nullptr, 0, &report) == DCORR_ERR_ARGUMENT);
  CHECK(std::string(dcorr_last_error()).size() > 0);
}
