#include <doctest.h>

#include <random>

#include "dcorr/core/error.hpp"
#include "dcorr/evaluation/articulation.hpp"
#include "dcorr/evaluation/planning.hpp"
#include "dcorr/evaluation/tapvid.hpp"
#include "dcorr/evaluation/visualize.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcorr;

namespace {

FlowField constant_flow(int64_t h, int64_t w, double dx, double dy) {
  auto f = torch::zeros({1, 2, h, w}, torch::kFloat64);
  f.select(1, 0).fill_(dx);
  f.select(1, 1).fill_(dy);
  return FlowField{f, FlowResolution::Full};
}

CorrespondenceSet offset_set(int n, double dx, double dy, bool visible = true) {
  CorrespondenceSet s;
  for (int i = 0; i < n; ++i) {
    s.queries.push_back({double(i), 1.0});
    s.ground_truth.push_back({double(i), 2.0});
    s.predictions.push_back({double(i) + dx, 2.0 + dy});
    s.visible.push_back(visible);
  }
  return s;
}

}  // namespace

TEST_CASE("query correspondence") {
  std::vector<Point2D> q{{0, 0}, {3.5, 2.25}, {9.9, 7.9}};
  auto same = query_correspondence(constant_flow(8, 10, 0, 0), q);
  for (size_t i = 0; i < q.size(); ++i) CHECK((same[i] - q[i]).norm() == 0.0);
  auto moved = query_correspondence(constant_flow(8, 10, 5, -2), q);
  for (size_t i = 0; i < q.size(); ++i) CHECK((moved[i] - q[i] - Point2D(5, -2)).norm() < 1e-12);

  auto lin = torch::zeros({1, 2, 8, 10}, torch::kFloat64);
  lin.select(1, 0).copy_(torch::arange(10, torch::kFloat64).view({1, 10}).expand({8, 10}) * 0.5);
  lin.select(1, 1).copy_(torch::arange(8, torch::kFloat64).view({8, 1}).expand({8, 10}) * -1.0);
  auto p = query_correspondence(FlowField{lin, FlowResolution::Full}, {{3.25, 4.5}});
  CHECK(p[0].x() == doctest::Approx(3.25 + 0.5 * 3.25));
  CHECK(p[0].y() == doctest::Approx(4.5 - 4.5));

  CHECK_THROWS_AS(query_correspondence(constant_flow(8, 10, 0, 0), {{10.0, 1.0}}), ArgumentError);
  CHECK_THROWS_AS(query_correspondence(constant_flow(8, 10, 0, 0), {{1.0, -0.1}}), ArgumentError);
}

TEST_CASE("tapvid metrics") {
  auto perfect = tapvid_metrics({offset_set(10, 0, 0)});
  CHECK(perfect.average_distance == 0.0);
  CHECK(perfect.delta_avg == 100.0);
  CHECK(perfect.average_jaccard == 100.0);

  auto off3 = tapvid_metrics({offset_set(10, 3, 0)});
  CHECK(off3.average_distance == doctest::Approx(3.0));
  CHECK(off3.delta_avg == doctest::Approx(60.0));
  CHECK(off3.average_jaccard == doctest::Approx(60.0));
  REQUIRE(off3.per_threshold.size() == 5);
  CHECK(off3.per_threshold[1].false_negatives == 10);

  auto with_occ = tapvid_metrics({offset_set(4, 0, 0), offset_set(4, 50, 50, false)});
  CHECK(with_occ.average_jaccard == doctest::Approx(50.0));
  CHECK(with_occ.delta_avg == 100.0);
  CHECK(with_occ.occluded_points == 4);
  CHECK(tapvid_metrics({offset_set(4, 0, 0), offset_set(4, 50, 50, false)}, {true}).average_jaccard == 100.0);

  CHECK_THROWS_AS(tapvid_metrics({offset_set(3, 0, 0, false)}), DataError);
  CHECK_THROWS_AS(tapvid_metrics({}), DataError);

  SUBCASE("scalar oracle on random sets") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> err(0.0, 6.0);
    std::bernoulli_distribution vis(0.8);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<CorrespondenceSet> sets;
      std::vector<oracle::TapSet> osets;
      for (int s = 0; s < 3; ++s) {
        CorrespondenceSet cs;
        oracle::TapSet os;
        for (int i = 0; i < 15; ++i) {
          const Point2D gt(i * 3.0, s * 2.0), pr = gt + Point2D(err(rng), err(rng));
          const bool v = i == 0 || vis(rng);
          cs.queries.push_back(gt);
          cs.ground_truth.push_back(gt);
          cs.predictions.push_back(pr);
          cs.visible.push_back(v);
          os.ground_truth.push_back({gt.x(), gt.y()});
          os.predictions.push_back({pr.x(), pr.y()});
          os.visible.push_back(v);
        }
        sets.push_back(cs);
        osets.push_back(os);
      }
      auto r = tapvid_metrics(sets);
      auto o = oracle::tapvid(osets, false);
      CHECK(std::abs(r.average_distance - o.ad) < 1e-9);
      CHECK(std::abs(r.delta_avg - o.delta_avg) < 1e-9);
      CHECK(std::abs(r.average_jaccard - o.aj) < 1e-9);
      CHECK(r.average_jaccard <= r.delta_avg);
    }
  }
  auto j = to_json(off3);
  CHECK(j.contains("AD"));
  CHECK(j["per_threshold"].size() == 5);
}

TEST_CASE("lifting correspondences to 3D") {
  CameraIntrinsics k{50, 50, 8, 6};
  auto depth = torch::full({12, 16}, 2.0, torch::kFloat64);
  std::vector<Point2D> q{{3, 4}, {10, 2}, {15, 11}};
  auto lifted = lift_correspondences(q, q, depth, depth, k);
  REQUIRE(lifted.source.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK((lifted.source[i] - lifted.target[i]).norm() == 0.0);
  CHECK((lifted.source[1] - Point3D((10 - 8) * 2.0 / 50, (2 - 6) * 2.0 / 50, 2.0)).norm() < 1e-12);

  auto holes = depth.clone();
  holes[4][3] = 0.0;
  auto dropped = lift_correspondences(q, {{3, 4}, {10, 2}, {40, 2}}, holes, depth, k);
  CHECK(dropped.dropped == 2);
  CHECK(dropped.kept == std::vector<size_t>{1});
  CHECK_THROWS_AS(lift_correspondences(q, q, torch::zeros({12, 16}, torch::kFloat64), depth, k), DataError);
}

TEST_CASE("revolute joint fitting") {
  ArticulationParams gt;
  gt.axis = Eigen::Vector3d::UnitZ();
  gt.pivot = Eigen::Vector3d(1, 0, 0);
  gt.state_deg = 30.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point3D> src, tgt;
  const auto t = joint_transform(gt);
  for (int i = 0; i < 30; ++i) {
    src.emplace_back(u(rng), u(rng), u(rng));
    tgt.push_back(t * src.back());
  }
  auto fit = fit_revolute_joint(src, tgt);
  CHECK(std::abs(std::abs(fit.axis.dot(gt.axis)) - 1.0) < 1e-9);
  CHECK(std::abs(fit.state_deg * (fit.axis.z() > 0 ? 1 : -1) - 30.0) < 1e-6);
  CHECK((fit.pivot - gt.pivot).cross(gt.axis).norm() < 1e-6);

  auto rigid = fit_rigid_transform(src, tgt);
  CHECK((rigid.rotation.transpose() * rigid.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(std::abs(rigid.rotation.determinant() - 1.0) < 1e-9);

  CHECK_THROWS_AS(fit_revolute_joint(src, src), DegenerateMotionError);
  std::vector<Point3D> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  CHECK_THROWS_AS(fit_rigid_transform(line, line), RankError);
  CHECK_THROWS_AS(fit_rigid_transform({src[0], src[1]}, {tgt[0], tgt[1]}), RankError);

  SUBCASE("least-squares rotation beats random rotations") {
    std::normal_distribution<double> n(0, 0.05);
    std::vector<Point3D> s(src.begin(), src.begin() + 10), d;
    for (auto& p : s) d.push_back(t * p + Point3D(n(rng), n(rng), n(rng)));
    auto r = fit_rigid_transform(s, d);
    auto residual = [&](const Eigen::Matrix3d& rot) {
      Point3D cs = Point3D::Zero(), cd = Point3D::Zero();
      for (size_t i = 0; i < s.size(); ++i) {
        cs += s[i];
        cd += d[i];
      }
      cs /= double(s.size());
      cd /= double(s.size());
      double e = 0;
      for (size_t i = 0; i < s.size(); ++i) e += (rot * (s[i] - cs) - (d[i] - cd)).squaredNorm();
      return e;
    };
    const double best = residual(r.rotation);
    for (int i = 0; i < 1000; ++i) {
      Eigen::Quaterniond q(n(rng) * 20, n(rng) * 20, n(rng) * 20, n(rng) * 20);
      CHECK(best <= residual(q.normalized().toRotationMatrix()) + 1e-12);
    }
  }
}

TEST_CASE("articulation errors") {
  ArticulationParams a;
  a.axis = Eigen::Vector3d(0, 0, 1);
  a.pivot = Eigen::Vector3d(0.3, 0.1, 0);
  a.state_deg = 25;
  std::vector<Point3D> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 1}}, tgt;
  for (auto& p : src) tgt.push_back(joint_transform(a) * p);
  auto e = articulation_errors(a, a, src, tgt);
  CHECK(e.angle_deg == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(e.position_m < 1e-12);
  CHECK(e.state_deg < 1e-12);
  CHECK(e.distance_m < 1e-12);

  auto b = a;
  b.axis = Eigen::Vector3d(0, 1, 1).normalized();
  CHECK(articulation_errors(b, a, src, tgt).angle_deg == doctest::Approx(45.0));

  SUBCASE("negating the ground-truth axis and state changes nothing") {
    auto flipped = a;
    flipped.axis = -a.axis;
    flipped.state_deg = -a.state_deg;
    auto c = b;
    c.state_deg = 40;
    auto e1 = articulation_errors(c, a, src, tgt), e2 = articulation_errors(c, flipped, src, tgt);
    CHECK(e1.angle_deg == doctest::Approx(e2.angle_deg));
    CHECK(e1.position_m == doctest::Approx(e2.position_m));
    CHECK(e1.state_deg == doctest::Approx(e2.state_deg));
    CHECK(e1.distance_m == doctest::Approx(e2.distance_m));
  }
  SUBCASE("scalar oracle") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1), s(-170, 170);
    for (int i = 0; i < 20; ++i) {
      ArticulationParams p, g;
      p.axis = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
      g.axis = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
      p.pivot = Eigen::Vector3d(u(rng), u(rng), u(rng));
      g.pivot = Eigen::Vector3d(u(rng), u(rng), u(rng));
      p.state_deg = s(rng);
      g.state_deg = s(rng);
      std::vector<Point3D> ps, pt;
      std::vector<oracle::Vec3> os, ot;
      for (int k = 0; k < 5; ++k) {
        ps.emplace_back(u(rng), u(rng), u(rng));
        pt.emplace_back(u(rng), u(rng), u(rng));
        os.push_back({ps.back().x(), ps.back().y(), ps.back().z()});
        ot.push_back({pt.back().x(), pt.back().y(), pt.back().z()});
      }
      auto r = articulation_errors(p, g, ps, pt);
      auto o = oracle::joint_errors({{p.axis.x(), p.axis.y(), p.axis.z()}, {p.pivot.x(), p.pivot.y(), p.pivot.z()}, p.state_deg},
                                    {{g.axis.x(), g.axis.y(), g.axis.z()}, {g.pivot.x(), g.pivot.y(), g.pivot.z()}, g.state_deg},
                                    os, ot);
      CHECK(std::abs(r.angle_deg - o.angle) < 1e-9);
      CHECK(std::abs(r.position_m - o.pos) < 1e-9);
      CHECK(std::abs(r.position_point_m - o.pos_point) < 1e-9);
      CHECK(std::abs(r.state_deg - o.state) < 1e-9);
      CHECK(std::abs(r.distance_m - o.dist) < 1e-9);
    }
  }
}

TEST_CASE("action planning") {
  CameraIntrinsics k{100, 100, 16, 16};
  auto depth = torch::full({32, 32}, 1.5, torch::kFloat64);
  auto done = plan_action(depth, k, constant_flow(32, 32, 0, 0));
  CHECK(done.done);

  auto flow = constant_flow(32, 32, 0, 0);
  flow.data[0][0].slice(0, 10, 15).slice(1, 10, 15).fill_(20.0);
  auto act = plan_action(depth, k, flow);
  CHECK_FALSE(act.done);
  CHECK(act.pixel == Point2D(10, 10));
  CHECK(act.displacement_px == doctest::Approx(20.0));
  CHECK((act.displacement - Point3D(20 * 1.5 / 100, 0, 0)).norm() < 1e-12);

  auto two = constant_flow(32, 32, 0, 0);
  two.data[0][0].slice(0, 0, 8).fill_(5.0);
  two.data[0][1].slice(0, 20, 28).fill_(30.0);
  auto pick = plan_action(depth, k, two);
  CHECK(pick.pixel.y() >= 20);
  CHECK(pick.pixel.y() < 28);

  auto mask = torch::zeros({32, 32}, torch::kBool);
  mask.slice(0, 0, 8).fill_(true);
  CHECK(plan_action(depth, k, two, mask).pixel.y() < 8);
  CHECK_THROWS_AS(plan_action(torch::zeros({32, 32}, torch::kFloat64), k, two), DataError);
}

TEST_CASE("visualization") {
  auto zero = constant_flow(16, 24, 0, 0);
  auto matches = sample_matches(zero, 8);
  CHECK(matches.size() == 6);
  for (auto& [a, b] : matches) CHECK(a == b);
  auto colors = flow_to_color(constant_flow(8, 8, 3, 0));
  CHECK(colors.sizes() == torch::IntArrayRef({3, 8, 8}));
  CHECK(colors.min().item<double>() >= 0.0);
  auto img = torch::rand({3, 16, 24});
  auto overlay = correspondence_overlay(img, img, zero, 8);
  CHECK(overlay.sizes() == torch::IntArrayRef({3, 32, 48}));
  FeatureMap f{torch::randn({1, 8, 2, 3})};
  auto pca = pca_overlay(img, img, f, f);
  CHECK(pca.sizes() == torch::IntArrayRef({3, 16, 48}));
}
