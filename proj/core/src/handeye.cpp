#include "kpcalib/handeye.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "kpcalib/error.hpp"

namespace kpcalib {
namespace {

constexpr double kParallelAxisTolerance = 1e-6;  // rad
constexpr double kMinMotionAngle = 1e-9;         // rad

}  // namespace

Transform SolveAxxb(std::span<const MotionPair> motions) {
  if (motions.size() < 2) {
    throw Error(ErrorKind::kInsufficientMotion,
                "AX=XB needs at least 2 motion pairs");
  }

  std::vector<Vec3> alpha;  // log(R_A)
  std::vector<Vec3> beta;   // log(R_B)
  for (const MotionPair& m : motions) {
    Vec3 la;
    Vec3 lb;
    try {
      la = So3Log(m.a.rotation());
      lb = So3Log(m.b.rotation());
    } catch (const Error&) {
      // Rotations of ~pi have an ill-defined log; they still constrain the
      // translation below.
      continue;
    }
    if (la.norm() < kMinMotionAngle || lb.norm() < kMinMotionAngle) continue;
    alpha.push_back(la);
    beta.push_back(lb);
  }

  bool independent = false;
  for (size_t i = 0; i < beta.size() && !independent; ++i) {
    for (size_t j = i + 1; j < beta.size(); ++j) {
      const double s = beta[i].normalized().cross(beta[j].normalized()).norm();
      if (std::asin(std::min(1.0, s)) > kParallelAxisTolerance) {
        independent = true;
        break;
      }
    }
  }
  if (!independent) {
    throw Error(ErrorKind::kInsufficientMotion,
                "AX=XB needs two motions with non-parallel rotation axes");
  }

  // R_X = argmin sum |R_X beta_i - alpha_i|^2.
  Mat3 m = Mat3::Zero();
  for (size_t i = 0; i < alpha.size(); ++i) m += alpha[i] * beta[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 rx = svd.matrixU() * d * svd.matrixV().transpose();

  // (R_A - I) t_X = R_X t_B - t_A.
  Eigen::MatrixXd c(3 * motions.size(), 3);
  Eigen::VectorXd rhs(3 * motions.size());
  for (size_t i = 0; i < motions.size(); ++i) {
    c.block<3, 3>(3 * i, 0) = motions[i].a.rotation().matrix() - Mat3::Identity();
    rhs.segment<3>(3 * i) =
        rx * motions[i].b.translation() - motions[i].a.translation();
  }
  const Vec3 tx = c.colPivHouseholderQr().solve(rhs);
  return {Rotation::FromMatrix(rx), tx};
}

HandEyeSolution SolveEyeOnBase(std::span<const HandEyeSample> samples,
                               const HandEyeOptions& options) {
  if (samples.size() < 3) {
    throw Error(ErrorKind::kInsufficientMotion,
                "eye-on-base calibration needs at least 3 samples, got " +
                    std::to_string(samples.size()));
  }

  // With Y = hand_from_marker and M_i = cam_from_marker_i:
  //   (M_j^-1 M_i) Y^-1 = Y^-1 (H_j^-1 H_i),
  // i.e. A X = X B with X = marker_from_hand. The camera pose drops out.
  std::vector<MotionPair> motions;
  auto add_pair = [&](size_t i, size_t j) {
    motions.push_back(
        {samples[j].cam_from_marker.inverse() * samples[i].cam_from_marker,
         samples[j].base_from_hand.inverse() * samples[i].base_from_hand});
  };
  if (options.all_pairs) {
    for (size_t i = 0; i < samples.size(); ++i) {
      for (size_t j = i + 1; j < samples.size(); ++j) add_pair(i, j);
    }
  } else {
    for (size_t i = 0; i + 1 < samples.size(); ++i) add_pair(i, i + 1);
  }
  const Transform marker_from_hand = SolveAxxb(motions);
  const Transform hand_from_marker = marker_from_hand.inverse();

  // Rotation: project the sum of per-sample estimates M_i Y^-1 H_i^-1 onto
  // SO(3). Translation: least squares given that rotation.
  Mat3 r_sum = Mat3::Zero();
  for (const HandEyeSample& s : samples) {
    const Transform c =
        s.cam_from_marker * marker_from_hand * s.base_from_hand.inverse();
    r_sum += c.rotation().matrix();
  }
  const Rotation r_cam_from_base = Rotation::FromMatrix(r_sum);
  Vec3 t_sum = Vec3::Zero();
  for (const HandEyeSample& s : samples) {
    const Vec3 marker_in_base = s.base_from_hand * hand_from_marker.translation();
    t_sum += s.cam_from_marker.translation() - r_cam_from_base * marker_in_base;
  }
  HandEyeSolution sol;
  sol.cam_from_base = {r_cam_from_base,
                       t_sum / static_cast<double>(samples.size())};
  sol.hand_from_marker = hand_from_marker;

  double rot_res = 0.0;
  double trans_res = 0.0;
  for (const HandEyeSample& s : samples) {
    const Transform predicted = sol.cam_from_base * s.base_from_hand * hand_from_marker;
    rot_res += RotationAngleBetween(predicted.rotation(), s.cam_from_marker.rotation());
    trans_res += (predicted.translation() - s.cam_from_marker.translation()).norm();
  }
  sol.rotation_residual = rot_res / static_cast<double>(samples.size());
  sol.translation_residual = trans_res / static_cast<double>(samples.size());
  return sol;
}

}  // namespace kpcalib
