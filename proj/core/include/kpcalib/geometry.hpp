#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kpcalib {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Unit quaternion rotation. Always stored normalized with w >= 0 so that two
// equal rotations have bitwise-comparable coefficients.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q);
  Rotation(double w, double x, double y, double z)
      : Rotation(Eigen::Quaterniond(w, x, y, z)) {}

  static Rotation Identity() { return Rotation(); }
  // Projects onto SO(3) first, so slightly non-orthogonal input is accepted.
  static Rotation FromMatrix(const Mat3& m);
  // Extrinsic X-Y-Z (URDF) roll-pitch-yaw.
  static Rotation FromRpy(double roll, double pitch, double yaw);
  static Rotation FromAxisAngle(const Vec3& axis, double angle);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const { return FromUnitQuaternion(q_.conjugate()); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }
  // The product of unit quaternions is unit to within rounding, so only the
  // sign is canonicalized here.
  Rotation operator*(const Rotation& other) const {
    return FromUnitQuaternion(q_ * other.q_);
  }

  // Rotation angle in [0, pi].
  double angle() const;

 private:
  static Rotation FromUnitQuaternion(const Eigen::Quaterniond& q);

  Eigen::Quaterniond q_;
};

// Distance between two rotations on the unit-quaternion sphere, taking the
// double cover into account: min(|qa - qb|, |qa + qb|).
double QuaternionDistance(const Rotation& a, const Rotation& b);

// Geodesic angle of a^-1 * b in radians.
double RotationAngleBetween(const Rotation& a, const Rotation& b);

// Rigid transform p -> R p + t. Named by the frames it maps between at the
// call site, e.g. `cam_from_base` maps base-frame points into the camera.
class Transform {
 public:
  Transform() : translation_(Vec3::Zero()) {}
  Transform(const Rotation& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Transform Identity() { return Transform(); }
  static Transform FromTranslation(const Vec3& t) { return {Rotation(), t}; }
  static Transform FromMatrix(const Mat4& m);

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat4 matrix() const;
  Transform inverse() const;
  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }
  // (a * b)(p) == a(b(p)).
  Transform operator*(const Transform& other) const {
    return {rotation_ * other.rotation_,
            rotation_ * other.translation_ + translation_};
  }

 private:
  Rotation rotation_;
  Vec3 translation_;
};

inline Transform Compose(const Transform& a, const Transform& b) {
  return a * b;
}
inline Transform Invert(const Transform& t) { return t.inverse(); }

// Axis-angle logarithm. Throws ErrorKind::kAngleNearPi when the rotation
// angle is within 1e-6 of pi, where the axis sign is ill-defined.
Vec3 So3Log(const Rotation& r);
Rotation So3Exp(const Vec3& v);

Mat3 Skew(const Vec3& v);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws ErrorKind::kValidationError on non-positive focal length or size.
  void Validate() const;

  Vec2 Normalize(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
  }
};

// Minimum camera-frame depth accepted by projection.
inline constexpr double kMinDepth = 1e-9;

// Pinhole projection, no distortion. Throws ErrorKind::kBehindCamera when
// the camera-frame depth is <= kMinDepth.
Vec2 Project(const CameraIntrinsics& k, const Transform& cam_from_robot,
             const Vec3& p_robot);
Vec2 ProjectCameraPoint(const CameraIntrinsics& k, const Vec3& p_cam);

bool InImage(const CameraIntrinsics& k, const Vec2& pixel);

// True iff the point lies in front of the camera and projects into the
// half-open image rectangle [0, width) x [0, height). Occlusion is ignored.
bool InFrustum(const CameraIntrinsics& k, const Transform& cam_from_robot,
               const Vec3& p_robot);

}  // namespace kpcalib
