#pragma once

// Independent reference computations for tests. Nothing here may call into
// the code paths it is used to check.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace kpcalib::oracle {

using M4 = Eigen::Matrix4d;
using M3 = Eigen::Matrix3d;

inline M3 RotX(double a) {
  M3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline M3 RotY(double a) {
  M3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
inline M3 RotZ(double a) {
  M3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

// Rodrigues' formula.
inline M3 AxisAngle(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d k = axis.normalized();
  M3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return M3::Identity() + std::sin(angle) * kx + (1 - std::cos(angle)) * kx * kx;
}

inline M4 Homogeneous(const M3& r, const Eigen::Vector3d& t) {
  M4 m = M4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

struct OracleJoint {
  std::string kind;  // revolute | prismatic | fixed
  Eigen::Vector3d xyz;
  Eigen::Vector3d rpy;
  Eigen::Vector3d axis;
};

// Product of 4x4 matrices: origin_1 * motion_1 * ... per link.
inline std::vector<M4> MatrixFk(const std::vector<OracleJoint>& joints,
                                const std::vector<double>& q) {
  std::vector<M4> links = {M4::Identity()};
  size_t qi = 0;
  for (const OracleJoint& j : joints) {
    const M4 origin = Homogeneous(RotZ(j.rpy.z()) * RotY(j.rpy.y()) * RotX(j.rpy.x()), j.xyz);
    M4 motion = M4::Identity();
    if (j.kind == "revolute") {
      motion = Homogeneous(AxisAngle(j.axis, q[qi++]), Eigen::Vector3d::Zero());
    } else if (j.kind == "prismatic") {
      motion = Homogeneous(M3::Identity(), j.axis * q[qi++]);
    }
    links.push_back(links.back() * origin * motion);
  }
  return links;
}

inline Eigen::Vector2d PinholeProject(double fx, double fy, double cx, double cy,
                                      const M4& cam_from_world,
                                      const Eigen::Vector3d& p) {
  const Eigen::Vector4d pc = cam_from_world * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
}

// Direct 2D convolution with a truncated Gaussian; taps outside the map are
// dropped and the remaining weights renormalized per axis (the kernel is a
// product, so this equals separable renormalization).
inline std::vector<double> DenseGaussianBlur(const std::vector<double>& img, int w,
                                             int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> out(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0, nx = 0, ny = 0;
      for (int dy = -r; dy <= r; ++dy) {
        if (y + dy < 0 || y + dy >= h) continue;
        ny += std::exp(-dy * dy / (2 * sigma * sigma));
      }
      for (int dx = -r; dx <= r; ++dx) {
        if (x + dx < 0 || x + dx >= w) continue;
        nx += std::exp(-dx * dx / (2 * sigma * sigma));
      }
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
          acc += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) * img[yy * w + xx];
        }
      }
      out[y * w + x] = acc / (nx * ny);
    }
  }
  return out;
}

// Fraction of errors <= t by direct counting.
inline double CountFraction(const std::vector<double>& errors, double t) {
  int c = 0;
  for (double e : errors) c += e <= t ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(errors.size());
}

// Trapezoid rule over `n` equal intervals of [0, max], normalized by max.
inline double TrapezoidAuc(const std::vector<double>& errors, double max, int n) {
  double area = 0;
  for (int i = 0; i < n; ++i) {
    const double a = max * i / n, b = max * (i + 1) / n;
    area += 0.5 * (CountFraction(errors, a) + CountFraction(errors, b)) * (b - a);
  }
  return area / max;
}

}  // namespace kpcalib::oracle
