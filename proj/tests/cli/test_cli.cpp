#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "../support/small_config_json.hpp"
#include "../support/test_util.hpp"
#include "dcorr/datapipe/annotations.hpp"
#include "dcorr/datapipe/image_io.hpp"
#include "dcorr/datapipe/sampling.hpp"
#include "dcorr/datapipe/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const dcorr::testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DCORR_CLI_PATH + "\" --log-level 4 " + args + " > \"" + out.string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// The last non-empty line of stderr, parsed as the error record.
json error_record(const Result& r) {
  std::istringstream in(r.err);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line.front() == '{') last = line;
  REQUIRE_FALSE(last.empty());
  return json::parse(last);
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Three frames of a texture drifting right by 4 px per frame, with tracks.
void make_video(const fs::path& root) {
  dcorr::Rng rng(5);
  const int64_t h = 256, w = 320;
  auto tex = dcorr::procedural_texture(h, w + 16, rng);
  dcorr::TrackAnnotation ann;
  ann.video = "clip";
  ann.height = h;
  ann.width = w;
  for (int f = 0; f < 3; ++f) {
    auto frame = tex.narrow(2, 8 - 4 * f, w).contiguous();
    dcorr::save_image(frame, root / "clip" / "frames" / (std::to_string(f) + ".png"));
  }
  for (int i = 0; i < 6; ++i) {
    dcorr::TrackPoint p;
    p.first_frame = i == 2 ? 1 : 0;
    const double x = 40.0 + 40.0 * i, y = 30.0 + 35.0 * i;
    for (int f = 0; f < 3; ++f) {
      p.coords.emplace_back(x + 4.0 * f, y);
      p.visible.push_back(!(i == 5 && f == 2) && !(i == 2 && f == 0));
    }
    ann.points.push_back(p);
  }
  dcorr::save_track_annotations(ann, root / "clip" / "tracks.json");
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  dcorr::testing::TempDir d;
  auto r = run(d, "");
  CHECK(r.code == 2);
  CHECK(error_record(r)["error"]["kind"] == "usage");

  r = run(d, "frobnicate");
  CHECK(r.code == 2);

  r = run(d, "train --config x.json");
  CHECK(r.code == 2);

  const auto missing = (d / "nope.json").string();
  r = run(d, "train --config " + missing + " --out " + (d / "run").string());
  CHECK(r.code == 2);
  const auto e = error_record(r);
  CHECK(e["error"]["message"].get<std::string>().find(missing) != std::string::npos);
  CHECK(e["error"]["command"] == "train");
  CHECK(read_json(d / "run" / "run_manifest.json")["status"] == "failed");

  r = run(d, "viz --mode overlay --src a.png --tgt b.png --out " + (d / "v.png").string());
  CHECK(r.code == 2);
}

TEST_CASE("train, infer and evaluate end to end") {
  dcorr::testing::TempDir d;
  const auto cfg = d / "c.json";
  dcorr::testing::write_text(cfg, dcorr::testing::small_config_json(4));
  const auto run_dir = d / "run";

  auto r = run(d, "train --config " + cfg.string() + " --out " + run_dir.string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(run_dir / "metrics.jsonl"));
  CHECK(fs::exists(run_dir / "ckpt_4.dck"));
  const auto manifest = read_json(run_dir / "run_manifest.json");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["summary"]["final_step"] == 4);
  const auto ckpt = (run_dir / "ckpt_4.dck").string();

  // A --seed override changes the configuration hash.
  r = run(d, "train --seed 42 --config " + cfg.string() + " --out " + (d / "run42").string());
  REQUIRE(r.code == 0);
  CHECK(read_json(d / "run42" / "run_manifest.json")["config_hash"] != manifest["config_hash"]);

  const auto data = d / "tap";
  make_video(data);
  const auto flows = d / "flows";
  for (int s = 0; s < 3; ++s) {
    for (int t = s + 1; t < 3; ++t) {
      const auto frames = data / "clip" / "frames";
      const auto out = flows / "clip" / (std::to_string(s) + "_" + std::to_string(t) + ".dfl1");
      r = run(d, "infer-flow --ckpt " + ckpt + " --src " + (frames / (std::to_string(s) + ".png")).string() +
                     " --tgt " + (frames / (std::to_string(t) + ".png")).string() + " --out " + out.string());
      REQUIRE_MESSAGE(r.code == 0, r.err);
    }
  }

  r = run(d, "eval-tapvid --ckpt " + ckpt + " --data " + data.string() + " --out " + (d / "a.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run(d, "eval-tapvid --flows " + flows.string() + " --data " + data.string() + " --out " +
                 (d / "b.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto a = read_json(d / "a.json"), b = read_json(d / "b.json");
  CHECK(a["flows_evaluated"] == 3);
  for (const auto* key : {"AD", "delta_avg", "AJ"}) {
    INFO(key);
    CHECK(a[key].get<double>() == doctest::Approx(b[key].get<double>()).epsilon(1e-9));
  }
  CHECK(read_json(d / "run_manifest.json")["status"] == "ok");

  r = run(d, "eval-tapvid --ckpt " + ckpt + " --flows " + flows.string() + " --data " + data.string() +
                 " --out " + (d / "c.json.out").string());
  CHECK(r.code == 2);

  // Wrong data directory is a data error.
  r = run(d, "eval-tapvid --ckpt " + ckpt + " --data " + (d / "absent").string() + " --out " +
                 (d / "x.json").string());
  CHECK(r.code == 1);

  const auto f0 = (data / "clip" / "frames" / "0.png").string();
  const auto f1 = (data / "clip" / "frames" / "1.png").string();
  r = run(d, "viz --mode overlay --flow " + (flows / "clip" / "0_1.dfl1").string() + " --src " + f0 + " --tgt " +
                 f1 + " --out " + (d / "overlay.png").string());
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(d / "overlay.png"));
  r = run(d, "viz --mode pca --ckpt " + ckpt + " --src " + f0 + " --tgt " + f1 + " --out " +
                 (d / "pca.png").string());
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(d / "pca.png"));
}

TEST_CASE("articulation and planning from a configuration") {
  dcorr::testing::TempDir d;
  const auto cfg = d / "c.json";
  dcorr::testing::write_text(cfg, dcorr::testing::small_config_json(2));

  dcorr::Rng rng(8);
  dcorr::RevoluteSceneOptions opts;
  opts.size = 64;
  const auto pair = dcorr::render_revolute_pair(opts, rng);
  dcorr::save_articulated_pair(pair, d / "art" / "door");

  auto r = run(d, "eval-articulation --config " + cfg.string() + " --data " + (d / "art").string() + " --out " +
                      (d / "art.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = read_json(d / "art.json");
  CHECK(report["instances"].size() == 1);

  dcorr::testing::write_text(d / "filter.txt", "ghost\n");
  r = run(d, "eval-articulation --config " + cfg.string() + " --data " + (d / "art").string() + " --filter " +
                 (d / "filter.txt").string() + " --out " + (d / "art2.json").string());
  CHECK(r.code == 1);

  const auto cur = d / "current";
  dcorr::save_image(pair.rgb1, cur / "rgb.png");
  dcorr::save_depth(pair.depth1, cur / "depth.png");
  dcorr::save_intrinsics(pair.intrinsics, cur / "intrinsics.json");
  dcorr::save_image(pair.rgb2, d / "goal.png");
  r = run(d, "plan-action --config " + cfg.string() + " --current " + cur.string() + " --goal " +
                 (d / "goal.png").string() + " --out " + (d / "action.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(d / "action.json").contains("done"));

  // With an enormous threshold any displacement counts as done.
  r = run(d, "plan-action --threshold 1e9 --config " + cfg.string() + " --current " + cur.string() + " --goal " +
                 (cur / "rgb.png").string() + " --out " + (d / "same.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(d / "same.json")["done"] == true);
}
