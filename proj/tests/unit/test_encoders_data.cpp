#include <doctest.h>

#include <fstream>
#include <set>

#include "dcorr/core/error.hpp"
#include "dcorr/datapipe/annotations.hpp"
#include "dcorr/datapipe/image_io.hpp"
#include "dcorr/datapipe/sampling.hpp"
#include "dcorr/datapipe/synthetic.hpp"
#include "dcorr/datapipe/video_index.hpp"
#include "dcorr/encoders/correspondence_encoder.hpp"
#include "dcorr/encoders/segmenter.hpp"
#include "dcorr/encoders/semantic_encoder.hpp"
#include "test_util.hpp"

using namespace dcorr;
using dcorr::testing::TempDir;

namespace {

EncoderOptions small_encoder() {
  EncoderOptions o;
  o.channels = 32;
  o.blocks = 2;
  o.heads = 4;
  o.stem_channels = 8;
  return o;
}

void write_video(const std::filesystem::path& dir, int frames, double fps) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "meta") << "{\"fps\": " << fps << "}";
  auto img = torch::rand({3, 16, 16});
  for (int i = 0; i < frames; ++i) save_image(img, dir / (std::to_string(i * 2) + ".png"));
}

}  // namespace

TEST_CASE("correspondence encoder") {
  torch::manual_seed(0);
  CorrespondenceEncoder enc(small_encoder());
  enc->eval();
  torch::NoGradGuard ng;
  auto a = torch::rand({1, 3, 64, 64}), b = torch::rand({1, 3, 64, 64});
  auto [fa, fa2] = encode_pair(enc, a, a);
  CHECK(fa.data.sizes() == torch::IntArrayRef({1, 32, 8, 8}));
  CHECK(torch::equal(fa.data, fa2.data));

  auto [f1, f2] = encode_pair(enc, a, b);
  auto [g2, g1] = encode_pair(enc, b, a);
  CHECK(testing::max_abs_diff(f1.data, g1.data) < 1e-5);
  CHECK(testing::max_abs_diff(f2.data, g2.data) < 1e-5);

  CHECK_THROWS_AS(encode_pair(enc, a, torch::rand({1, 3, 64, 72})), ArgumentError);
  CHECK_THROWS_AS(encode_pair(enc, torch::rand({1, 3, 60, 64}), torch::rand({1, 3, 60, 64})), ArgumentError);
  CHECK(parameter_count(*CorrespondenceEncoder(EncoderOptions{})) < 1000000);
}

TEST_CASE("handcrafted semantic encoder") {
  HandcraftedSemanticEncoder enc;
  auto img = torch::rand({1, 3, 32, 48});
  auto f = semantic_features(enc, img);
  CHECK(f.data.sizes() == torch::IntArrayRef({1, 64, 4, 6}));
  CHECK(torch::equal(f.data, semantic_features(enc, img).data));

  SUBCASE("two color regions form two clusters") {
    auto two = torch::zeros({1, 3, 64, 64});
    two[0][0].slice(1, 0, 32).fill_(0.9);
    two[0][2].slice(1, 32, 64).fill_(0.8);
    two[0][1].fill_(0.2);
    auto feats = semantic_features(enc, two).data[0].reshape({64, -1}).t().to(torch::kFloat64);  // [cells, c]
    // Two-means with farthest-point initialization.
    const int64_t n = feats.size(0);
    auto c0 = feats[0].clone();
    auto c1 = feats[(feats - c0).norm(2, 1).argmax().item<int64_t>()].clone();
    torch::Tensor assign;
    for (int it = 0; it < 20; ++it) {
      assign = (feats - c1).norm(2, 1) < (feats - c0).norm(2, 1);
      if (assign.all().item<bool>() || !assign.any().item<bool>()) break;
      c0 = feats.index({assign.logical_not()}).mean(0);
      c1 = feats.index({assign}).mean(0);
    }
    auto truth = torch::zeros({8, 8}, torch::kBool);
    truth.slice(1, 4, 8).fill_(true);
    auto agree = (assign == truth.reshape({n})).sum().item<int64_t>();
    const double purity = double(std::max(agree, n - agree)) / double(n);
    CHECK(purity > 0.95);
  }
  SUBCASE("projection never receives a gradient") {
    enc.projection().requires_grad_(true);
    auto x = torch::rand({1, 3, 16, 16}).requires_grad_(true);
    auto feats = semantic_features(enc, x).data;
    CHECK_FALSE(feats.requires_grad());
    auto w = torch::ones({1}, torch::kFloat32).requires_grad_(true);
    (feats * w).sum().backward();
    CHECK_FALSE(enc.projection().grad().defined());
    enc.projection().requires_grad_(false);
  }
  CHECK_THROWS_AS(make_semantic_encoder("nonexistent"), ConfigurationError);
  CHECK_THROWS_AS(make_semantic_encoder("torchscript:/no/such/file.pt"), ConfigurationError);
}

TEST_CASE("segmenters") {
  ColorRegionSegmenter seg(4, 16, 16);
  auto img = torch::zeros({3, 24, 30});
  img[0].slice(1, 0, 10).fill_(0.9);
  img[1].slice(1, 10, 20).fill_(0.9);
  img[2].slice(1, 20, 30).fill_(0.9);
  auto masks = seg.segment(img);
  REQUIRE(masks.size(0) == 3);
  std::set<int64_t> starts;
  for (int i = 0; i < 3; ++i) {
    CHECK(masks[i].sum().item<int64_t>() == 240);
    auto cols = masks[i].any(0).nonzero();
    starts.insert(cols.min().item<int64_t>());
    CHECK(cols.max().item<int64_t>() - cols.min().item<int64_t>() == 9);
  }
  CHECK(starts == std::set<int64_t>{0, 10, 20});
  CHECK((masks.to(torch::kInt).sum(0) <= 1).all().item<bool>());

  auto uniform = seg.segment(torch::full({3, 16, 16}, 0.5));
  CHECK(uniform.size(0) == 1);
  CHECK(uniform[0].all().item<bool>());

  GridSegmenter grid(2, 3);
  auto g = grid.segment(torch::rand({3, 16, 24}));
  CHECK(g.size(0) == 6);
  CHECK(g.to(torch::kInt).sum(0).eq(1).all().item<bool>());

  SegmenterOptions bad;
  bad.backend = "magic";
  CHECK_THROWS_AS(make_segmenter(bad), ConfigurationError);
}

TEST_CASE("video index") {
  TempDir root;
  write_video(root / "a", 10, 30);
  write_video(root / "b", 10, 30);
  std::ofstream(root / "a" / "notes.txt") << "x";
  auto idx = index_videos(root.path());
  REQUIRE(idx.videos.size() == 2);
  CHECK(idx.videos[0].id == "a");
  CHECK(idx.videos[0].frame_numbers.size() == 10);
  CHECK(idx.videos[1].frame_paths.size() == 10);
  CHECK(idx.videos[0].fps == 30.0);
  auto again = index_videos(root.path());
  CHECK(again.videos[1].frame_paths == idx.videos[1].frame_paths);

  std::filesystem::create_directories(root / "empty");
  std::ofstream(root / "empty" / "meta") << "30";
  CHECK_THROWS_AS(index_videos(root.path()), DataError);
}

TEST_CASE("pair sampling") {
  CHECK(frame_gap_bounds(30, {}) == std::pair<int64_t, int64_t>{30, 90});
  VideoEntry v;
  v.id = "v";
  v.fps = 30;
  for (int i = 0; i < 200; ++i) {
    v.frame_numbers.push_back(i);
    v.frame_paths.push_back(std::to_string(i) + ".png");
  }
  Rng rng = make_rng(1, 0, 0);
  int64_t lo = 1000, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    auto p = sample_pair_indices(v, {}, rng);
    CHECK(p.second - p.first == p.gap);
    lo = std::min(lo, p.gap);
    hi = std::max(hi, p.gap);
    if (p.second >= 200) FAIL("index out of range");
  }
  CHECK(lo == 30);
  CHECK(hi == 90);

  VideoEntry short_video = v;
  short_video.frame_numbers.resize(10);
  short_video.frame_paths.resize(10);
  CHECK_THROWS_AS(sample_pair_indices(short_video, {}, rng), DataError);

  Rng r1 = make_rng(7, 0, 3), r2 = make_rng(7, 0, 3);
  for (int i = 0; i < 20; ++i) {
    auto a = sample_pair_indices(v, {}, r1), b = sample_pair_indices(v, {}, r2);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
  CHECK(make_rng(7, 0, 3)() != make_rng(7, 0, 4)());

  auto img1 = torch::rand({3, 32, 40}), img2 = torch::rand({3, 32, 40});
  auto [c1, c2] = random_crop_pair(img1, img2, 32, 40, rng);
  CHECK(torch::equal(c1, img1));
  CHECK(torch::equal(c2, img2));
  auto [s1, s2] = random_crop_pair(img1, img2, 16, 16, rng, true);
  CHECK(s1.sizes() == torch::IntArrayRef({3, 16, 16}));
  CHECK_THROWS_AS(random_crop_pair(img1, img2, 48, 48, rng), ArgumentError);

  CHECK(resize_shorter_side(img1, 64).sizes() == torch::IntArrayRef({3, 64, 80}));
  CHECK(resized_shape(480, 854, 256, 8) == std::pair<int64_t, int64_t>{256, 456});
}

TEST_CASE("annotations") {
  TempDir dir;
  TrackAnnotation t;
  t.video = "v";
  t.height = 20;
  t.width = 30;
  t.points.push_back({0, {{1.5, 2.0}, {3.0, 4.25}}, {true, true}});
  t.points.push_back({1, {{0.0, 0.0}, {5.0, 6.0}}, {false, true}});
  t.points.push_back({0, {{0.0, 0.0}, {0.0, 0.0}}, {false, false}});
  save_track_annotations(t, dir / "tracks.json");
  auto back = load_track_annotations(dir / "tracks.json");
  REQUIRE(back.points.size() == 3);
  CHECK(back.points[0].coords[1] == t.points[0].coords[1]);
  CHECK(back.points[1].visible == t.points[1].visible);
  CHECK(back.points[1].first_frame == 1);
  CHECK(evaluable_points(back) == std::vector<size_t>{0, 1});

  std::ofstream(dir / "k.json") << R"({"fx": 0, "fy": 10, "cx": 1, "cy": 1})";
  CHECK_THROWS_AS(load_intrinsics(dir / "k.json"), DataError);
  std::ofstream(dir / "bad.json") << R"({"video": "v", "height": 5})";
  CHECK_THROWS_AS(load_track_annotations(dir / "bad.json"), DataError);

  Rng rng(3);
  RevoluteSceneOptions opts;
  opts.size = 64;
  auto pair = render_revolute_pair(opts, rng);
  save_articulated_pair(pair, dir / "inst");
  auto loaded = load_articulated_pair(dir / "inst");
  CHECK(loaded.rgb1.sizes() == torch::IntArrayRef({3, 64, 64}));
  CHECK((loaded.ground_truth.axis - pair.ground_truth.axis).norm() < 1e-9);
  CHECK(loaded.ground_truth.state_deg == doctest::Approx(pair.ground_truth.state_deg));
  CHECK(testing::max_abs_diff(loaded.depth1, pair.depth1) <= 0.0005 + 1e-12);
  CHECK(torch::equal(loaded.part_mask, pair.part_mask));
}

TEST_CASE("synthetic translation pairs") {
  auto data = make_translation_dataset(5, 64, 12, 42);
  REQUIRE(data.size() == 5);
  for (const auto& p : data) {
    const int fx = int(p.flow_x), fy = int(p.flow_y);
    CHECK(std::abs(fx) <= 12);
    CHECK(std::abs(fy) <= 12);
    // image1[y][x] == image2[y + fy][x + fx] wherever both exist.
    const int y0 = std::max(0, -fy), y1 = std::min(64, 64 - fy);
    const int x0 = std::max(0, -fx), x1 = std::min(64, 64 - fx);
    auto a = p.image1.slice(1, y0, y1).slice(2, x0, x1);
    auto b = p.image2.slice(1, y0 + fy, y1 + fy).slice(2, x0 + fx, x1 + fx);
    CHECK(torch::equal(a, b));
  }
  auto again = make_translation_dataset(5, 64, 12, 42);
  CHECK(torch::equal(again[3].image2, data[3].image2));
}
