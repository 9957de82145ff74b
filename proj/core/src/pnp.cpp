#include "kpcalib/pnp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "kpcalib/error.hpp"

namespace kpcalib {
namespace {

// Below this ratio of the smallest to largest principal spread the point
// set is treated as planar and a homography candidate is added.
constexpr double kPlanarRatio = 5e-2;
// Below this ratio of second to first principal spread the set is a line.
constexpr double kCollinearRatio = 1e-8;
// Point sets up to this size also get three-point candidates.
constexpr size_t kP3pMaxPoints = 6;
// Refinement is run from at most this many of the best candidates.
constexpr size_t kMaxRefined = 6;

bool CorrLess(const Correspondence& a, const Correspondence& b) {
  return std::tie(a.p3d.x(), a.p3d.y(), a.p3d.z(), a.p2d.x(), a.p2d.y(), a.weight) <
         std::tie(b.p3d.x(), b.p3d.y(), b.p3d.z(), b.p2d.x(), b.p2d.y(), b.weight);
}

struct PrincipalFrame {
  Vec3 centroid;
  Mat3 axes;              // columns sorted by decreasing spread, det = +1
  Vec3 spread;            // sqrt of covariance eigenvalues, decreasing
};

PrincipalFrame ComputePrincipalFrame(std::span<const Vec3> pts) {
  PrincipalFrame f;
  f.centroid = Vec3::Zero();
  for (const Vec3& p : pts) f.centroid += p;
  f.centroid /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) {
    const Vec3 d = p - f.centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Eigen returns ascending eigenvalues.
  for (int i = 0; i < 3; ++i) {
    f.axes.col(i) = eig.eigenvectors().col(2 - i);
    f.spread(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(2 - i)));
  }
  f.axes.col(2) = f.axes.col(0).cross(f.axes.col(1));
  return f;
}

double TotalReprojectionError(const Mat3& r, const Vec3& t,
                              std::span<const Vec3> pts,
                              std::span<const Vec2> normalized) {
  double err = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec3 pc = r * pts[i] + t;
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    err += (pc.hnormalized() - normalized[i]).norm();
  }
  return err;
}

// Absolute orientation (Procrustes) from matched point sets: pc = R pw + t.
void AbsoluteOrientation(std::span<const Vec3> pw, std::span<const Vec3> pc,
                         std::span<const double> weights, Mat3* r, Vec3* t) {
  Vec3 cw = Vec3::Zero();
  Vec3 cc = Vec3::Zero();
  double wsum = 0.0;
  for (size_t i = 0; i < pw.size(); ++i) {
    cw += weights[i] * pw[i];
    cc += weights[i] * pc[i];
    wsum += weights[i];
  }
  cw /= wsum;
  cc /= wsum;
  Mat3 h = Mat3::Zero();
  for (size_t i = 0; i < pw.size(); ++i) {
    h += weights[i] * (pc[i] - cc) * (pw[i] - cw).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  *r = svd.matrixU() * d * svd.matrixV().transpose();
  *t = cc - *r * cw;
}

struct PoseCandidate {
  Mat3 r;
  Vec3 t;
  double err = 0.0;  // summed normalized reprojection error
};

class EpnpSolver {
 public:
  EpnpSolver(std::span<const Vec3> pts, std::span<const Vec2> normalized,
             std::span<const double> weights, const PrincipalFrame& frame)
      : pts_(pts), uv_(normalized), weights_(weights) {
    control_[0] = frame.centroid;
    for (int i = 1; i < 4; ++i) {
      control_[i] = frame.centroid + frame.spread(i - 1) * frame.axes.col(i - 1);
    }
  }

  // One pose per beta case N = 1..3, in case order.
  void Solve(std::vector<PoseCandidate>* out) {
    Mat3 cc;
    for (int j = 1; j < 4; ++j) cc.col(j - 1) = control_[j] - control_[0];
    Eigen::FullPivLU<Mat3> lu(cc);
    if (lu.rank() < 3) return;
    const Mat3 cc_inv = cc.inverse();

    const size_t n = pts_.size();
    alphas_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const Vec3 a = cc_inv * (pts_[i] - control_[0]);
      alphas_[i] = {1.0 - a.sum(), a(0), a(1), a(2)};
    }

    Eigen::Matrix<double, 12, 12> mtm = Eigen::Matrix<double, 12, 12>::Zero();
    for (size_t i = 0; i < n; ++i) {
      Eigen::Matrix<double, 2, 12> rows;
      for (int j = 0; j < 4; ++j) {
        rows(0, 3 * j) = alphas_[i][j];
        rows(0, 3 * j + 1) = 0.0;
        rows(0, 3 * j + 2) = -alphas_[i][j] * uv_[i].x();
        rows(1, 3 * j) = 0.0;
        rows(1, 3 * j + 1) = alphas_[i][j];
        rows(1, 3 * j + 2) = -alphas_[i][j] * uv_[i].y();
      }
      mtm += weights_[i] * rows.transpose() * rows;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(mtm);
    // Null-space basis: eigenvectors of the 4 smallest eigenvalues, smallest
    // first.
    for (int i = 0; i < 4; ++i) kernel_[i] = eig.eigenvectors().col(i);

    const Eigen::Matrix<double, 6, 10> l = ComputeL6x10();
    const Eigen::Matrix<double, 6, 1> rho = ComputeRho();

    for (int n_case = 1; n_case <= 3; ++n_case) {
      Eigen::Vector4d betas = FindBetas(n_case, l, rho);
      RunGaussNewton(l, rho, &betas);
      PoseCandidate c;
      if (!ComputePose(betas, &c.r, &c.t)) continue;
      c.err = TotalReprojectionError(c.r, c.t, pts_, uv_);
      out->push_back(c);
    }
  }

 private:
  Eigen::Matrix<double, 6, 10> ComputeL6x10() const {
    std::array<std::array<Vec3, 6>, 4> dv;
    for (int i = 0; i < 4; ++i) {
      int a = 0;
      int b = 1;
      for (int j = 0; j < 6; ++j) {
        dv[i][j] = kernel_[i].segment<3>(3 * a) - kernel_[i].segment<3>(3 * b);
        if (++b > 3) {
          ++a;
          b = a + 1;
        }
      }
    }
    Eigen::Matrix<double, 6, 10> l;
    for (int j = 0; j < 6; ++j) {
      l(j, 0) = dv[0][j].dot(dv[0][j]);
      l(j, 1) = 2.0 * dv[0][j].dot(dv[1][j]);
      l(j, 2) = dv[1][j].dot(dv[1][j]);
      l(j, 3) = 2.0 * dv[0][j].dot(dv[2][j]);
      l(j, 4) = 2.0 * dv[1][j].dot(dv[2][j]);
      l(j, 5) = dv[2][j].dot(dv[2][j]);
      l(j, 6) = 2.0 * dv[0][j].dot(dv[3][j]);
      l(j, 7) = 2.0 * dv[1][j].dot(dv[3][j]);
      l(j, 8) = 2.0 * dv[2][j].dot(dv[3][j]);
      l(j, 9) = dv[3][j].dot(dv[3][j]);
    }
    return l;
  }

  Eigen::Matrix<double, 6, 1> ComputeRho() const {
    Eigen::Matrix<double, 6, 1> rho;
    int k = 0;
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        rho(k++) = (control_[a] - control_[b]).squaredNorm();
      }
    }
    return rho;
  }

  // betas10 = [B11 B12 B22 B13 B23 B33 B14 B24 B34 B44]
  static Eigen::Vector4d FindBetas(int n_case,
                                   const Eigen::Matrix<double, 6, 10>& l,
                                   const Eigen::Matrix<double, 6, 1>& rho) {
    Eigen::Vector4d betas = Eigen::Vector4d::Zero();
    if (n_case == 1) {
      // [B11 B12 B13 B14]
      Eigen::Matrix<double, 6, 4> l4;
      l4 << l.col(0), l.col(1), l.col(3), l.col(6);
      const Eigen::Vector4d b4 =
          l4.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(rho);
      const double sign = b4(0) < 0 ? -1.0 : 1.0;
      betas(0) = std::sqrt(std::abs(b4(0)));
      if (betas(0) == 0.0) return betas;
      betas(1) = sign * b4(1) / betas(0);
      betas(2) = sign * b4(2) / betas(0);
      betas(3) = sign * b4(3) / betas(0);
    } else if (n_case == 2) {
      // [B11 B12 B22]
      const Eigen::Matrix<double, 6, 3> l3 = l.leftCols<3>();
      const Eigen::Vector3d b3 =
          l3.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(rho);
      if (b3(0) < 0) {
        betas(0) = std::sqrt(-b3(0));
        betas(1) = b3(2) < 0 ? std::sqrt(-b3(2)) : 0.0;
      } else {
        betas(0) = std::sqrt(b3(0));
        betas(1) = b3(2) > 0 ? std::sqrt(b3(2)) : 0.0;
      }
      if (b3(1) < 0) betas(0) = -betas(0);
    } else {
      // [B11 B12 B22 B13 B23]
      const Eigen::Matrix<double, 6, 5> l5 = l.leftCols<5>();
      const Eigen::Matrix<double, 5, 1> b5 =
          l5.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(rho);
      if (b5(0) < 0) {
        betas(0) = std::sqrt(-b5(0));
        betas(1) = b5(2) < 0 ? std::sqrt(-b5(2)) : 0.0;
      } else {
        betas(0) = std::sqrt(b5(0));
        betas(1) = b5(2) > 0 ? std::sqrt(b5(2)) : 0.0;
      }
      if (b5(1) < 0) betas(0) = -betas(0);
      betas(2) = betas(0) != 0.0 ? b5(3) / betas(0) : 0.0;
    }
    return betas;
  }

  static void RunGaussNewton(const Eigen::Matrix<double, 6, 10>& l,
                             const Eigen::Matrix<double, 6, 1>& rho,
                             Eigen::Vector4d* betas) {
    constexpr int kIterations = 5;
    for (int it = 0; it < kIterations; ++it) {
      const Eigen::Vector4d& b = *betas;
      Eigen::Matrix<double, 6, 4> a;
      Eigen::Matrix<double, 6, 1> res;
      for (int i = 0; i < 6; ++i) {
        a(i, 0) = 2 * l(i, 0) * b(0) + l(i, 1) * b(1) + l(i, 3) * b(2) + l(i, 6) * b(3);
        a(i, 1) = l(i, 1) * b(0) + 2 * l(i, 2) * b(1) + l(i, 4) * b(2) + l(i, 7) * b(3);
        a(i, 2) = l(i, 3) * b(0) + l(i, 4) * b(1) + 2 * l(i, 5) * b(2) + l(i, 8) * b(3);
        a(i, 3) = l(i, 6) * b(0) + l(i, 7) * b(1) + l(i, 8) * b(2) + 2 * l(i, 9) * b(3);
        res(i) = rho(i) - (l(i, 0) * b(0) * b(0) + l(i, 1) * b(0) * b(1) +
                           l(i, 2) * b(1) * b(1) + l(i, 3) * b(0) * b(2) +
                           l(i, 4) * b(1) * b(2) + l(i, 5) * b(2) * b(2) +
                           l(i, 6) * b(0) * b(3) + l(i, 7) * b(1) * b(3) +
                           l(i, 8) * b(2) * b(3) + l(i, 9) * b(3) * b(3));
      }
      const Eigen::Vector4d step = a.colPivHouseholderQr().solve(res);
      if (!step.allFinite()) return;
      *betas += step;
    }
  }

  bool ComputePose(const Eigen::Vector4d& betas, Mat3* r, Vec3* t) const {
    std::array<Vec3, 4> ccam;
    for (int j = 0; j < 4; ++j) {
      ccam[j] = Vec3::Zero();
      for (int i = 0; i < 4; ++i) {
        ccam[j] += betas(i) * kernel_[i].segment<3>(3 * j);
      }
    }
    std::vector<Vec3> pcam(pts_.size());
    int negative = 0;
    for (size_t i = 0; i < pts_.size(); ++i) {
      pcam[i] = alphas_[i][0] * ccam[0] + alphas_[i][1] * ccam[1] +
                alphas_[i][2] * ccam[2] + alphas_[i][3] * ccam[3];
      if (pcam[i].z() < 0.0) ++negative;
    }
    if (2 * negative > static_cast<int>(pts_.size())) {
      for (Vec3& p : pcam) p = -p;
    }
    for (const Vec3& p : pcam) {
      if (!p.allFinite()) return false;
    }
    AbsoluteOrientation(pts_, pcam, weights_, r, t);
    return r->allFinite() && t->allFinite();
  }

  std::span<const Vec3> pts_;
  std::span<const Vec2> uv_;
  std::span<const double> weights_;
  std::array<Vec3, 4> control_;
  std::vector<std::array<double, 4>> alphas_;
  std::array<Eigen::Matrix<double, 12, 1>, 4> kernel_;
};

// Normalized DLT homography mapping plane coordinates to normalized image
// coordinates, decomposed into the plane-to-camera pose.
bool SolvePlanar(std::span<const Vec3> pts, std::span<const Vec2> uv,
                 std::span<const double> weights, const PrincipalFrame& frame,
                 Mat3* r, Vec3* t) {
  const size_t n = pts.size();
  std::vector<Vec2> plane(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 local = frame.axes.transpose() * (pts[i] - frame.centroid);
    plane[i] = local.head<2>();
  }
  auto similarity = [](std::span<const Vec2> xs) {
    Vec2 c = Vec2::Zero();
    for (const Vec2& x : xs) c += x;
    c /= static_cast<double>(xs.size());
    double mean_dist = 0.0;
    for (const Vec2& x : xs) mean_dist += (x - c).norm();
    mean_dist /= static_cast<double>(xs.size());
    const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
    Mat3 m;
    m << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
    return m;
  };
  const Mat3 t_src = similarity(plane);
  const Mat3 t_dst = similarity(uv);

  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 s = t_src * plane[i].homogeneous();
    const Vec3 d = t_dst * uv[i].homogeneous();
    const double w = std::sqrt(weights[i]);
    a.row(2 * i) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
    a.row(2 * i + 1) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(), -d.x();
    a.row(2 * i) *= w;
    a.row(2 * i + 1) *= w;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 hm = t_dst.inverse() * hn * t_src;

  const double scale = 2.0 / (hm.col(0).norm() + hm.col(1).norm());
  if (!std::isfinite(scale)) return false;
  hm *= scale;
  // The plane centroid maps to t; it must lie in front of the camera.
  if (hm(2, 2) < 0) hm = -hm;
  Mat3 rp;
  rp.col(0) = hm.col(0);
  rp.col(1) = hm.col(1);
  rp.col(2) = hm.col(0).cross(hm.col(1));
  const Mat3 r_plane = Rotation::FromMatrix(rp).matrix();
  const Vec3 t_plane = hm.col(2);

  // cam_from_robot = cam_from_plane * plane_from_robot.
  *r = r_plane * frame.axes.transpose();
  *t = t_plane - *r * frame.centroid;
  return r->allFinite() && t->allFinite();
}

// Grunert's three-point solution. Each real root of the quartic gives the
// depths along the three bearing rays; the pose comes from aligning the
// triangle.
void SolveP3p(const std::array<Vec3, 3>& pw, const std::array<Vec2, 3>& uv,
              std::vector<PoseCandidate>* out) {
  std::array<Vec3, 3> ray;
  for (int i = 0; i < 3; ++i) ray[i] = uv[i].homogeneous().normalized();
  const double a2 = (pw[1] - pw[2]).squaredNorm();
  const double b2 = (pw[0] - pw[2]).squaredNorm();
  const double c2 = (pw[0] - pw[1]).squaredNorm();
  if (b2 <= 0.0) return;
  const double ca = ray[1].dot(ray[2]);
  const double cb = ray[0].dot(ray[2]);
  const double cg = ray[0].dot(ray[1]);
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const double bmc = (b2 - c2) / b2;
  const double bma = (b2 - a2) / b2;

  std::array<double, 5> q;  // q[i] multiplies v^i
  q[4] = (amc - 1) * (amc - 1) - 4 * c2 / b2 * ca * ca;
  q[3] = 4 * (amc * (1 - amc) * cb - (1 - apc) * ca * cg + 2 * c2 / b2 * ca * ca * cb);
  q[2] = 2 * (amc * amc - 1 + 2 * amc * amc * cb * cb + 2 * bmc * ca * ca -
              4 * apc * ca * cb * cg + 2 * bma * cg * cg);
  q[1] = 4 * (-amc * (1 + amc) * cb + 2 * a2 / b2 * cg * cg * cb - (1 - apc) * ca * cg);
  q[0] = (1 + amc) * (1 + amc) - 4 * a2 / b2 * cg * cg;
  if (std::abs(q[4]) < 1e-14) return;

  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 3; ++i) companion(i + 1, i) = 1.0;
  for (int i = 0; i < 4; ++i) companion(i, 3) = -q[i] / q[4];
  const Eigen::Vector4cd roots = companion.eigenvalues();
  auto poly = [&](double v) {
    return (((q[4] * v + q[3]) * v + q[2]) * v + q[1]) * v + q[0];
  };
  auto dpoly = [&](double v) {
    return ((4 * q[4] * v + 3 * q[3]) * v + 2 * q[2]) * v + q[1];
  };
  for (int r = 0; r < 4; ++r) {
    if (std::abs(roots(r).imag()) > 1e-6 * (1.0 + std::abs(roots(r).real()))) continue;
    double v = roots(r).real();
    for (int it = 0; it < 3; ++it) {
      const double d = dpoly(v);
      if (d == 0.0) break;
      v -= poly(v) / d;
    }
    if (v <= 0.0) continue;
    const double den = 2 * (cg - v * ca);
    if (std::abs(den) < 1e-14) continue;
    const double u = ((-1 + amc) * v * v - 2 * amc * cb * v + 1 + amc) / den;
    if (u <= 0.0) continue;
    const double s1sq = b2 / (1 + v * v - 2 * v * cb);
    if (!(s1sq > 0.0)) continue;
    const double s1 = std::sqrt(s1sq);
    const std::array<Vec3, 3> pc = {s1 * ray[0], u * s1 * ray[1], v * s1 * ray[2]};
    const std::array<double, 3> w = {1.0, 1.0, 1.0};
    PoseCandidate c;
    AbsoluteOrientation(pw, pc, w, &c.r, &c.t);
    if (c.r.allFinite() && c.t.allFinite()) out->push_back(c);
  }
}

double Cost(const Transform& pose, std::span<const Correspondence> corrs,
            std::span<const char> active, const CameraIntrinsics& k,
            const RefineOptions& opt) {
  double cost = 0.0;
  for (size_t i = 0; i < corrs.size(); ++i) {
    if (!active[i]) continue;
    const Vec3 pc = pose * corrs[i].p3d;
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    const double e = (ProjectCameraPoint(k, pc) - corrs[i].p2d).norm();
    double rho = e * e;
    if (opt.robust && e > opt.huber_delta_px) {
      rho = 2.0 * opt.huber_delta_px * e - opt.huber_delta_px * opt.huber_delta_px;
    }
    cost += corrs[i].weight * rho;
  }
  return cost;
}

std::vector<Correspondence> Sorted(std::span<const Correspondence> corrs) {
  std::vector<Correspondence> sorted(corrs.begin(), corrs.end());
  std::sort(sorted.begin(), sorted.end(), CorrLess);
  return sorted;
}

}  // namespace

namespace {

// EPnP beta cases, the homography pose for near-planar sets, then three-point
// poses for small sets. Only candidates with every point in front of the
// camera are returned.
std::vector<PoseCandidate> Candidates(std::span<const Correspondence> input,
                                      const CameraIntrinsics& k) {
  if (input.size() < 4) {
    throw Error(ErrorKind::kInsufficientPoints,
                "PnP needs at least 4 correspondences, got " +
                    std::to_string(input.size()));
  }
  const std::vector<Correspondence> corrs = Sorted(input);
  const size_t n = corrs.size();
  std::vector<Vec3> pts(n);
  std::vector<Vec2> uv(n);
  std::vector<double> weights(n);
  for (size_t i = 0; i < n; ++i) {
    if (!corrs[i].p3d.allFinite() || !corrs[i].p2d.allFinite() ||
        !(corrs[i].weight > 0.0)) {
      throw Error(ErrorKind::kValidationError,
                  "correspondences must be finite with positive weight");
    }
    pts[i] = corrs[i].p3d;
    uv[i] = k.Normalize(corrs[i].p2d);
    weights[i] = corrs[i].weight;
  }

  const PrincipalFrame frame = ComputePrincipalFrame(pts);
  if (frame.spread(0) <= 0.0 || frame.spread(1) < kCollinearRatio * frame.spread(0)) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "PnP points are collinear or coincident");
  }

  std::vector<PoseCandidate> all;
  EpnpSolver(pts, uv, weights, frame).Solve(&all);
  PoseCandidate planar;
  if (frame.spread(2) < kPlanarRatio * frame.spread(0) &&
      SolvePlanar(pts, uv, weights, frame, &planar.r, &planar.t)) {
    planar.err = TotalReprojectionError(planar.r, planar.t, pts, uv);
    all.push_back(planar);
  }
  // With few points the EPnP kernel is barely constrained and Gauss-Newton on
  // the betas can stall; three-point solutions scored on all points cover it.
  if (n <= kP3pMaxPoints) {
    const double min_area = 1e-6 * frame.spread(0) * frame.spread(0);
    for (size_t a = 0; a < n; ++a) {
      for (size_t b = a + 1; b < n; ++b) {
        for (size_t c = b + 1; c < n; ++c) {
          if ((pts[b] - pts[a]).cross(pts[c] - pts[a]).norm() < min_area) continue;
          std::vector<PoseCandidate> tri;
          SolveP3p({pts[a], pts[b], pts[c]}, {uv[a], uv[b], uv[c]}, &tri);
          for (PoseCandidate& t : tri) {
            t.err = TotalReprojectionError(t.r, t.t, pts, uv);
            all.push_back(t);
          }
        }
      }
    }
  }
  std::vector<PoseCandidate> out;
  for (const PoseCandidate& c : all) {
    if (std::isfinite(c.err)) out.push_back(c);
  }
  if (out.empty()) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "PnP found no pose with points in front of the camera");
  }
  return out;
}

}  // namespace

Transform SolveEpnp(std::span<const Correspondence> corrs,
                    const CameraIntrinsics& k) {
  const std::vector<PoseCandidate> cands = Candidates(corrs, k);
  // Strict comparison keeps the earlier candidate on ties.
  const PoseCandidate* best = &cands.front();
  for (const PoseCandidate& c : cands) {
    if (c.err < best->err) best = &c;
  }
  return {Rotation::FromMatrix(best->r), best->t};
}

double ReprojectionRmse(const Transform& cam_from_robot,
                        std::span<const Correspondence> corrs,
                        const CameraIntrinsics& k) {
  double sum = 0.0;
  size_t count = 0;
  for (const Correspondence& c : corrs) {
    const Vec3 pc = cam_from_robot * c.p3d;
    if (pc.z() <= kMinDepth) continue;
    sum += (ProjectCameraPoint(k, pc) - c.p2d).squaredNorm();
    ++count;
  }
  return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

PnpSolution Refine(const Transform& initial,
                   std::span<const Correspondence> input,
                   const CameraIntrinsics& k, const RefineOptions& opt,
                   RefineTrace* trace) {
  const std::vector<Correspondence> corrs = Sorted(input);
  std::vector<char> active(corrs.size(), 0);
  int n_active = 0;
  for (size_t i = 0; i < corrs.size(); ++i) {
    if ((initial * corrs[i].p3d).z() > kMinDepth) {
      active[i] = 1;
      ++n_active;
    }
  }
  if (n_active == 0) {
    throw Error(ErrorKind::kAllPointsBehindCamera,
                "all points are behind the camera at the initial pose");
  }

  PnpSolution sol;
  sol.cam_from_robot = initial;
  sol.n_points = static_cast<int>(corrs.size());
  sol.refined = true;
  double cost = Cost(initial, corrs, active, k, opt);
  sol.initial_cost = cost;
  if (trace) trace->accepted_costs.push_back(cost);

  double lambda = -1.0;
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (size_t i = 0; i < corrs.size(); ++i) {
      if (!active[i]) continue;
      const Vec3 rp = sol.cam_from_robot.rotation() * corrs[i].p3d;
      const Vec3 pc = rp + sol.cam_from_robot.translation();
      const double iz = 1.0 / pc.z();
      const Vec2 r = ProjectCameraPoint(k, pc) - corrs[i].p2d;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,
               0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dproj * Skew(rp);
      j.rightCols<3>() = dproj;
      double w = corrs[i].weight;
      if (opt.robust) {
        const double e = r.norm();
        if (e > opt.huber_delta_px) w *= opt.huber_delta_px / e;
      }
      h += w * j.transpose() * j;
      g += w * j.transpose() * r;
    }
    if (g.norm() < opt.tol) break;
    if (lambda < 0.0) lambda = 1e-3 * h.diagonal().maxCoeff();

    bool accepted = false;
    while (!accepted && lambda < 1e32) {
      const Eigen::Matrix<double, 6, 6> damped =
          h + lambda * Eigen::Matrix<double, 6, 6>::Identity();
      const Eigen::Matrix<double, 6, 1> step = -damped.ldlt().solve(g);
      if (!step.allFinite()) {
        lambda *= 2.0;
        continue;
      }
      const Transform candidate(
          So3Exp(step.head<3>()) * sol.cam_from_robot.rotation(),
          sol.cam_from_robot.translation() + step.tail<3>());
      const double new_cost = Cost(candidate, corrs, active, k, opt);
      if (new_cost < cost) {
        sol.cam_from_robot = candidate;
        cost = new_cost;
        lambda *= 0.5;
        accepted = true;
        ++sol.iterations;
        if (trace) trace->accepted_costs.push_back(cost);
      } else {
        lambda *= 2.0;
      }
    }
    if (!accepted) break;
  }
  sol.final_cost = cost;
  sol.reprojection_rmse = ReprojectionRmse(sol.cam_from_robot, corrs, k);
  return sol;
}

PnpSolution SolvePnp(std::span<const Correspondence> corrs,
                     const CameraIntrinsics& k, const PnpConfig& cfg) {
  if (!cfg.refine) {
    PnpSolution sol;
    sol.cam_from_robot = SolveEpnp(corrs, k);
    sol.n_points = static_cast<int>(corrs.size());
    sol.reprojection_rmse = ReprojectionRmse(sol.cam_from_robot, corrs, k);
    return sol;
  }
  // The best few candidates are refined; small point sets can put the best
  // unrefined one in the wrong basin.
  std::vector<PoseCandidate> cands = Candidates(corrs, k);
  std::stable_sort(cands.begin(), cands.end(),
                   [](const PoseCandidate& a, const PoseCandidate& b) { return a.err < b.err; });
  if (cands.size() > kMaxRefined) cands.resize(kMaxRefined);
  std::optional<PnpSolution> best;
  for (const PoseCandidate& c : cands) {
    PnpSolution sol = Refine({Rotation::FromMatrix(c.r), c.t}, corrs, k, cfg.refine_options);
    if (!best || sol.final_cost < best->final_cost) best = sol;
  }
  return *best;
}

std::vector<Correspondence> JoinByName(const FrameObservation& frame,
                                       bool confidence_weighting) {
  std::map<std::string, const NamedPoint*> by_name;
  for (const NamedPoint& p : frame.keypoints3d) by_name[p.name] = &p;
  std::vector<const KeypointDetection*> dets;
  for (const KeypointDetection& d : frame.detections) dets.push_back(&d);
  std::sort(dets.begin(), dets.end(),
            [](const auto* a, const auto* b) { return a->name < b->name; });
  std::vector<Correspondence> out;
  for (const KeypointDetection* d : dets) {
    const auto it = by_name.find(d->name);
    if (it == by_name.end()) continue;
    const double w =
        confidence_weighting ? std::max(d->confidence, 1e-12) : 1.0;
    out.push_back({it->second->position, d->pixel, w});
  }
  return out;
}

PnpSolution SolveFrame(const FrameObservation& frame, const CameraIntrinsics& k,
                       const PnpConfig& cfg) {
  const std::vector<Correspondence> corrs =
      JoinByName(frame, cfg.confidence_weighting);
  PnpSolution sol = SolvePnp(corrs, k, cfg);
  sol.frames_used = 1;
  return sol;
}

PnpSolution SolveMultiFrame(std::span<const FrameObservation> frames,
                            const CameraIntrinsics& k, const PnpConfig& cfg) {
  std::vector<Correspondence> corrs;
  int used = 0;
  for (const FrameObservation& f : frames) {
    const std::vector<Correspondence> c = JoinByName(f, cfg.confidence_weighting);
    if (!c.empty()) ++used;
    corrs.insert(corrs.end(), c.begin(), c.end());
  }
  PnpSolution sol = SolvePnp(corrs, k, cfg);
  sol.frames_used = used;
  return sol;
}

}  // namespace kpcalib
