#include "kpcalib/geometry.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "kpcalib/error.hpp"

namespace kpcalib {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kAngleNearPi: return "AngleNearPi";
    case ErrorKind::kBehindCamera: return "BehindCamera";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kInsufficientPoints: return "InsufficientPoints";
    case ErrorKind::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::kAllPointsBehindCamera: return "AllPointsBehindCamera";
    case ErrorKind::kInsufficientMotion: return "InsufficientMotion";
    case ErrorKind::kEmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::kSolverUnavailableForM: return "SolverUnavailableForM";
    case ErrorKind::kMissingLimits: return "MissingLimits";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  // Leave already-unit input untouched so serialized poses read back
  // bit-identical.
  if (std::abs(q_.squaredNorm() - 1.0) > 8 * std::numeric_limits<double>::epsilon()) {
    q_.normalize();
  }
  if (q_.w() < 0.0) {
    q_.coeffs() = -q_.coeffs();
  }
}

Rotation Rotation::FromUnitQuaternion(const Eigen::Quaterniond& q) {
  Rotation r;
  r.q_ = q;
  if (r.q_.w() < 0.0) r.q_.coeffs() = -r.q_.coeffs();
  return r;
}

Rotation Rotation::FromMatrix(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) = -u.col(2);
    r = u * svd.matrixV().transpose();
  }
  return Rotation(Eigen::Quaterniond(r));
}

Rotation Rotation::FromRpy(double roll, double pitch, double yaw) {
  // Extrinsic X then Y then Z == intrinsic Z-Y-X: R = Rz * Ry * Rx.
  const Eigen::Quaterniond q =
      Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
      Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
      Eigen::AngleAxisd(roll, Vec3::UnitX());
  return Rotation(q);
}

Rotation Rotation::FromAxisAngle(const Vec3& axis, double angle) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
}

double QuaternionDistance(const Rotation& a, const Rotation& b) {
  const Eigen::Vector4d qa = a.quaternion().coeffs();
  const Eigen::Vector4d qb = b.quaternion().coeffs();
  return std::min((qa - qb).norm(), (qa + qb).norm());
}

double RotationAngleBetween(const Rotation& a, const Rotation& b) {
  return (a.inverse() * b).angle();
}

Transform Transform::FromMatrix(const Mat4& m) {
  return {Rotation::FromMatrix(m.topLeftCorner<3, 3>()),
          m.topRightCorner<3, 1>()};
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Transform Transform::inverse() const {
  const Rotation r_inv = rotation_.inverse();
  return {r_inv, -(r_inv * translation_)};
}

Vec3 So3Log(const Rotation& r) {
  const Eigen::Quaterniond& q = r.quaternion();
  const double vec_norm = q.vec().norm();
  const double angle = 2.0 * std::atan2(vec_norm, q.w());
  if (angle >= std::numbers::pi - 1e-6) {
    throw Error(ErrorKind::kAngleNearPi,
                "so3 log undefined for rotation angle " + std::to_string(angle));
  }
  if (vec_norm < 1e-12) {
    // First-order expansion: angle * axis ~= 2 * vec / w.
    return 2.0 * q.vec() / q.w();
  }
  return angle / vec_norm * q.vec();
}

Rotation So3Exp(const Vec3& v) {
  const double theta = v.norm();
  const double half = 0.5 * theta;
  double sinc_half;  // sin(theta / 2) / theta
  if (theta < 1e-8) {
    sinc_half = 0.5 - theta * theta / 48.0;
  } else {
    sinc_half = std::sin(half) / theta;
  }
  return Rotation(std::cos(half), sinc_half * v.x(), sinc_half * v.y(),
                  sinc_half * v.z());
}

Mat3 Skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

void CameraIntrinsics::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::kValidationError, "intrinsics: fx and fy must be > 0");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::kValidationError,
                "intrinsics: width and height must be > 0");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorKind::kValidationError,
                "intrinsics: principal point must be finite");
  }
}

Vec2 ProjectCameraPoint(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (p_cam.z() <= kMinDepth) {
    throw Error(ErrorKind::kBehindCamera, "point is behind the camera");
  }
  return {k.fx * p_cam.x() / p_cam.z() + k.cx,
          k.fy * p_cam.y() / p_cam.z() + k.cy};
}

Vec2 Project(const CameraIntrinsics& k, const Transform& cam_from_robot,
             const Vec3& p_robot) {
  return ProjectCameraPoint(k, cam_from_robot * p_robot);
}

bool InImage(const CameraIntrinsics& k, const Vec2& pixel) {
  return pixel.x() >= 0.0 && pixel.x() < static_cast<double>(k.width) &&
         pixel.y() >= 0.0 && pixel.y() < static_cast<double>(k.height);
}

bool InFrustum(const CameraIntrinsics& k, const Transform& cam_from_robot,
               const Vec3& p_robot) {
  const Vec3 p_cam = cam_from_robot * p_robot;
  if (p_cam.z() <= kMinDepth) {
    return false;
  }
  return InImage(k, ProjectCameraPoint(k, p_cam));
}

}  // namespace kpcalib
