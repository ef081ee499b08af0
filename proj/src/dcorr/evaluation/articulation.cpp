#include "dcorr/evaluation/articulation.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"

namespace dcorr {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRadToDeg = 180.0 / kPi;

// Nearest-pixel depth, or 0 when the pixel is outside the raster.
double depth_at(const torch::TensorAccessor<double, 2>& d, const Point2D& p) {
  const auto x = std::llround(p.x()), y = std::llround(p.y());
  if (x < 0 || y < 0 || x >= d.size(1) || y >= d.size(0)) return 0.0;
  return d[y][x];
}

}  // namespace

LiftedCorrespondences lift_correspondences(const std::vector<Point2D>& queries,
                                           const std::vector<Point2D>& predictions,
                                           const torch::Tensor& depth1, const torch::Tensor& depth2,
                                           const CameraIntrinsics& k) {
  if (queries.size() != predictions.size()) {
    throw ArgumentError("lift_correspondences: queries and predictions differ in length");
  }
  if (depth1.dim() != 2 || depth2.dim() != 2) throw ArgumentError("lift_correspondences: depth must be [H,W]");
  auto d1 = depth1.to(torch::kFloat64).contiguous(), d2 = depth2.to(torch::kFloat64).contiguous();
  auto a1 = d1.accessor<double, 2>(), a2 = d2.accessor<double, 2>();
  LiftedCorrespondences out;
  for (size_t i = 0; i < queries.size(); ++i) {
    const double z1 = depth_at(a1, queries[i]), z2 = depth_at(a2, predictions[i]);
    if (!(z1 > 0.0) || !(z2 > 0.0) || !std::isfinite(z1) || !std::isfinite(z2)) {
      ++out.dropped;
      continue;
    }
    out.source.push_back(backproject(queries[i], z1, k));
    out.target.push_back(backproject(predictions[i], z2, k));
    out.kept.push_back(i);
  }
  if (out.source.empty()) {
    throw DataError("lift_correspondences: all " + std::to_string(queries.size()) +
                    " points were dropped for lack of valid depth");
  }
  return out;
}

RigidTransform fit_rigid_transform(const std::vector<Point3D>& src, const std::vector<Point3D>& tgt) {
  if (src.size() != tgt.size()) throw ArgumentError("fit_rigid_transform: point lists differ in length");
  const auto n = src.size();
  if (n < 3) throw RankError("fit_rigid_transform: need at least 3 point pairs, got " + std::to_string(n));

  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    cs += src[i];
    ct += tgt[i];
  }
  cs /= double(n);
  ct /= double(n);

  Eigen::MatrixXd centered(n, 3);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    centered.row(Eigen::Index(i)) = (src[i] - cs).transpose();
    cov += (src[i] - cs) * (tgt[i] - ct).transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> spread(centered);
  const auto sv = spread.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0)) {
    throw RankError("fit_rigid_transform: source points are collinear");
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform out;
  out.rotation = v * fix * u.transpose();
  out.translation = ct - out.rotation * cs;
  return out;
}

ArticulationParams fit_revolute_joint(const std::vector<Point3D>& src, const std::vector<Point3D>& tgt) {
  const auto rt = fit_rigid_transform(src, tgt);
  const Eigen::AngleAxisd aa(rt.rotation);
  const double angle_deg = aa.angle() * kRadToDeg;
  if (!(angle_deg >= kMinRevoluteAngleDeg)) {
    throw DegenerateMotionError("fit_revolute_joint: rotation of " + std::to_string(angle_deg) +
                                " deg is below " + std::to_string(kMinRevoluteAngleDeg) +
                                " deg; the axis is unobservable");
  }

  // (I - R) has the axis as its null space, so the pseudoinverse returns the
  // pivot closest to the origin.
  const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - rt.rotation;
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto s = svd.singularValues();
  Eigen::Vector3d inv = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) inv(i) = s(i) > 1e-9 * s(0) ? 1.0 / s(i) : 0.0;
  const Eigen::Vector3d pivot = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * rt.translation;

  ArticulationParams p;
  p.axis = aa.axis().normalized();
  p.pivot = pivot;
  p.state_deg = angle_deg;
  return p;
}

ArticulationErrors articulation_errors(const ArticulationParams& pred, const ArticulationParams& gt,
                                       const std::vector<Point3D>& src,
                                       const std::vector<Point3D>& predicted_tgt) {
  if (src.size() != predicted_tgt.size()) throw ArgumentError("articulation_errors: point lists differ in length");
  const Eigen::Vector3d a1 = pred.axis.normalized(), a2 = gt.axis.normalized();
  ArticulationErrors e;
  const double dot = a1.dot(a2);
  e.angle_deg = std::acos(std::min(1.0, std::abs(dot))) * kRadToDeg;

  const Eigen::Vector3d w = gt.pivot - pred.pivot;
  const Eigen::Vector3d n = a1.cross(a2);
  e.position_m = n.norm() < 1e-12 ? w.cross(a1).norm() : std::abs(w.dot(n)) / n.norm();
  e.position_point_m = w.cross(a1).norm();

  const double pred_state = dot < 0 ? -pred.state_deg : pred.state_deg;
  double d = std::fmod(std::abs(pred_state - gt.state_deg), 360.0);
  e.state_deg = d > 180.0 ? 360.0 - d : d;

  if (!src.empty()) {
    const auto t = joint_transform(gt);
    double sum = 0.0;
    for (size_t i = 0; i < src.size(); ++i) sum += (t * src[i] - predicted_tgt[i]).norm();
    e.distance_m = sum / double(src.size());
  }
  return e;
}

nlohmann::json to_json(const ArticulationParams& p) {
  return {{"axis", {p.axis.x(), p.axis.y(), p.axis.z()}},
          {"pivot", {p.pivot.x(), p.pivot.y(), p.pivot.z()}},
          {"state_deg", p.state_deg}};
}

nlohmann::json to_json(const ArticulationErrors& e) {
  return {{"angle", e.angle_deg},
          {"pos", e.position_m},
          {"pos_point", e.position_point_m},
          {"state", e.state_deg},
          {"dist", e.distance_m}};
}

}  // namespace dcorr
