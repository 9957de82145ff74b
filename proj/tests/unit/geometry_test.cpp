#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "kpcalib/error.hpp"
#include "kpcalib/geometry.hpp"
#include "oracles.hpp"

namespace kpcalib {
namespace {

using std::numbers::pi;

CameraIntrinsics K500() { return {500, 500, 320, 240, 640, 480}; }

void ExpectThrowsKind(auto&& fn, ErrorKind kind) {
  try {
    fn();
    FAIL() << "expected " << ErrorKindName(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

TEST(Rotation, CanonicalSign) {
  const Rotation r(-0.5, 0.5, 0.5, 0.5);
  EXPECT_GE(r.w(), 0.0);
  EXPECT_DOUBLE_EQ(r.w(), 0.5);
  EXPECT_DOUBLE_EQ(r.x(), -0.5);
}

TEST(Rotation, RpyMatchesMatrixProduct) {
  const Rotation r = Rotation::FromRpy(0.3, -0.7, 1.1);
  const Mat3 want = oracle::RotZ(1.1) * oracle::RotY(-0.7) * oracle::RotX(0.3);
  EXPECT_LT((r.matrix() - want).norm(), 1e-12);
}

TEST(Transform, ComposeIdentity) {
  const Transform t = Compose(Transform::Identity(), Transform::Identity());
  EXPECT_EQ(t.rotation().w(), 1.0);
  EXPECT_EQ(t.translation(), Vec3::Zero());
}

TEST(Transform, ComposeWithInverseIsIdentity) {
  gen::Gen g(1);
  for (int i = 0; i < 100; ++i) {
    const Transform t = g.RandomTransform();
    const Transform id = Compose(t, Invert(t));
    EXPECT_LT(QuaternionDistance(id.rotation(), Rotation()), 1e-12);
    EXPECT_LT(id.translation().norm(), 1e-12);
  }
}

TEST(Transform, ComposeMatchesPointMapping) {
  gen::Gen g(2);
  for (int i = 0; i < 1000; ++i) {
    const Transform a = g.RandomTransform(), b = g.RandomTransform();
    const Vec3 p = g.Vector(-2, 2);
    EXPECT_LT(((a * b) * p - a * (b * p)).norm(), 1e-12);
    // Matrix form agrees as well.
    const Vec3 viam = (a.matrix() * b.matrix() * p.homogeneous()).head<3>();
    EXPECT_LT((viam - (a * b) * p).norm(), 1e-12);
  }
}

TEST(Transform, InvertIsInvolution) {
  gen::Gen g(3);
  for (int i = 0; i < 1000; ++i) {
    const Transform t = g.RandomTransform(3.0);
    const Transform tt = Invert(Invert(t));
    EXPECT_LT(QuaternionDistance(t.rotation(), tt.rotation()), 1e-12);
    EXPECT_LT((t.translation() - tt.translation()).norm(), 1e-12);
  }
}

TEST(Transform, QuaternionNormPreservedUnderComposition) {
  gen::Gen g(4);
  Transform acc;
  for (int i = 0; i < 1000; ++i) {
    const Transform t = g.RandomTransform();
    const Transform c = acc * t;
    EXPECT_LT(std::abs(c.rotation().quaternion().norm() - 1.0), 1e-12);
    acc = Transform(Rotation(c.rotation().quaternion()), c.translation());
  }
}

TEST(Transform, FromMatrixRoundTrip) {
  gen::Gen g(5);
  const Transform t = g.RandomTransform();
  const Transform back = Transform::FromMatrix(t.matrix());
  EXPECT_LT(QuaternionDistance(t.rotation(), back.rotation()), 1e-12);
  EXPECT_LT((t.translation() - back.translation()).norm(), 1e-15);
}

TEST(So3, LogIdentity) {
  EXPECT_EQ(So3Log(Rotation()), Vec3::Zero());
}

TEST(So3, ExpQuarterTurnAboutX) {
  const Rotation r = So3Exp({pi / 2, 0, 0});
  EXPECT_LT((r * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(So3, RoundTripRandom) {
  gen::Gen g(6);
  double worst_q = 0, worst_v = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 axis = g.UnitVector();
    const double angle = g.Uniform(1e-6, pi - 0.01);
    const Rotation r = Rotation::FromAxisAngle(axis, angle);
    worst_q = std::max(worst_q, QuaternionDistance(So3Exp(So3Log(r)), r));
    const Vec3 v = angle * axis;
    worst_v = std::max(worst_v, (So3Log(So3Exp(v)) - v).norm());
  }
  EXPECT_LT(worst_q, 1e-9);
  EXPECT_LT(worst_v, 1e-9);
}

TEST(So3, ExpMatchesRodrigues) {
  gen::Gen g(7);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = g.UnitVector();
    const double angle = g.Uniform(0, pi);
    EXPECT_LT((So3Exp(angle * axis).matrix() - oracle::AxisAngle(axis, angle)).norm(), 1e-12);
  }
}

TEST(So3, SmallAngles) {
  const Vec3 v(1e-12, -2e-12, 3e-13);
  EXPECT_LT((So3Log(So3Exp(v)) - v).norm(), 1e-20);
}

TEST(So3, LogNearPiThrows) {
  ExpectThrowsKind([] { So3Log(Rotation::FromAxisAngle(Vec3::UnitY(), pi)); },
                   ErrorKind::kAngleNearPi);
  ExpectThrowsKind([] { So3Log(Rotation::FromAxisAngle(Vec3::UnitY(), pi - 1e-7)); },
                   ErrorKind::kAngleNearPi);
  EXPECT_NO_THROW(So3Log(Rotation::FromAxisAngle(Vec3::UnitY(), pi - 1e-4)));
}

TEST(Project, OpticalAxis) {
  const Vec2 px = Project(K500(), Transform(), {0, 0, 1});
  EXPECT_EQ(px, Vec2(320, 240));
}

TEST(Project, OffAxis) {
  const Vec2 px = Project(K500(), Transform(), {0.1, 0, 1});
  EXPECT_NEAR(px.x(), 370.0, 1e-12);
  EXPECT_NEAR(px.y(), 240.0, 1e-12);
}

TEST(Project, Equivariance) {
  gen::Gen g(8);
  const CameraIntrinsics k = K500();
  int checked = 0;
  while (checked < 1000) {
    const Transform t = g.RandomTransform();
    const Vec3 p = g.Vector(-1, 1);
    if ((t * p).z() <= 0.05) continue;
    ++checked;
    const Vec2 a = Project(k, t, p);
    const Vec2 b = Project(k, Transform(), t * p);
    const Vec2 o = oracle::PinholeProject(k.fx, k.fy, k.cx, k.cy, t.matrix(), p);
    EXPECT_LT((a - b).norm(), 1e-9);
    EXPECT_LT((a - o).norm(), 1e-9 * std::max(1.0, o.norm()));
  }
}

TEST(Project, BehindCameraThrows) {
  ExpectThrowsKind([] { Project(K500(), Transform(), {0, 0, -1}); }, ErrorKind::kBehindCamera);
  ExpectThrowsKind([] { Project(K500(), Transform(), {0, 0, 1e-9}); }, ErrorKind::kBehindCamera);
}

TEST(Frustum, Cases) {
  const CameraIntrinsics k = K500();
  EXPECT_TRUE(InFrustum(k, Transform(), {0, 0, 1}));
  EXPECT_FALSE(InFrustum(k, Transform(), {0, 0, -1}));
  // x = 640 exactly is outside the half-open bound.
  EXPECT_FALSE(InFrustum(k, Transform(), {320.0 / 500.0, 0, 1}));
  EXPECT_TRUE(InFrustum(k, Transform(), {-320.0 / 500.0, -240.0 / 500.0, 1}));
  EXPECT_FALSE(InFrustum(k, Transform(), {0, 240.0 / 500.0, 1}));
}

TEST(Intrinsics, Validate) {
  EXPECT_NO_THROW(K500().Validate());
  CameraIntrinsics bad = K500();
  bad.fx = 0;
  ExpectThrowsKind([&] { bad.Validate(); }, ErrorKind::kValidationError);
  bad = K500();
  bad.width = 0;
  ExpectThrowsKind([&] { bad.Validate(); }, ErrorKind::kValidationError);
}

}  // namespace
}  // namespace kpcalib
