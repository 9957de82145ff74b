#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "chain_oracle.hpp"
#include "kpcalib/error.hpp"
#include "kpcalib/handeye.hpp"
#include "kpcalib/metrics.hpp"
#include "kpcalib/pnp.hpp"
#include "kpcalib/rng.hpp"
#include "kpcalib/synth.hpp"

namespace kpcalib {
namespace {

const CameraIntrinsics kK{615, 615, 320, 240, 640, 480};

KinematicChain Panda() { return LoadChainFile(oracle::FixturePath("chains/panda.json")); }

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIoError;
}

// --- rng -------------------------------------------------------------------

TEST(CounterRng, FrozenFirstDraws) {
  // SplitMix64 mixing of a known input.
  EXPECT_EQ(SplitMix64Mix(0), 0u);
  EXPECT_EQ(SplitMix64Mix(0x9E3779B97F4A7C15ull), 0xE220A8397B1DCDAFull);
  CounterRng a(42, 0), b(42, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
  EXPECT_EQ(a.counter(), 100u);
}

TEST(CounterRng, StreamsDiffer) {
  CounterRng a(42, 0), b(42, 1), c(43, 0);
  const auto x = a.NextU64();
  EXPECT_NE(x, b.NextU64());
  EXPECT_NE(x, c.NextU64());
}

TEST(CounterRng, SplitDoesNotAdvance) {
  CounterRng a(1, 2);
  const auto before = a.counter();
  CounterRng child = a.Split(0);
  EXPECT_EQ(a.counter(), before);
  EXPECT_NE(child.key(), a.key());
  EXPECT_EQ(a.Split(0).NextU64(), CounterRng(a.Split(0)).NextU64());
  EXPECT_NE(a.Split(0).NextU64(), a.Split(1).NextU64());
}

TEST(CounterRng, UniformRanges) {
  CounterRng r(7);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.Uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u / 100000;
  }
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_EQ(r.Uniform(0.3, 0.3), 0.3);
}

TEST(CounterRng, NormalMoments) {
  CounterRng r(8);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.Normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(CounterRng, UniformIndexCoversRange) {
  CounterRng r(9);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.UniformIndex(7);
    ASSERT_LT(v, 7u);
    ++hist[v];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

// --- camera shell ------------------------------------------------------------

TEST(SampleCamera, DegenerateRangesCanonicalPose) {
  CameraShellConfig cfg;
  cfg.azimuth_min_deg = cfg.azimuth_max_deg = 0;
  cfg.elevation_min_deg = cfg.elevation_max_deg = 0;
  cfg.distance_min_m = cfg.distance_max_m = 1;
  cfg.jitter_half_angle_deg = 0;
  CounterRng rng(1);
  const Transform t = SampleCameraPose(cfg, rng);
  Mat3 want;
  want << 0, 1, 0, 0, 0, -1, -1, 0, 0;
  EXPECT_LT((t.rotation().matrix() - want).norm(), 1e-12);
  EXPECT_LT((t.translation() - Vec3(0, 0, 1)).norm(), 1e-12);
  // Camera centre at base (1, 0, 0), base origin on the optical axis.
  EXPECT_LT((t.inverse().translation() - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((Project(kK, t, Vec3::Zero()) - Vec2(320, 240)).norm(), 1e-9);
}

TEST(SampleCamera, DefaultRangesContainment) {
  const CameraShellConfig cfg;
  CounterRng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const CameraSample s = SampleCamera(cfg, rng);
    ASSERT_GE(s.azimuth_deg, -135.0);
    ASSERT_LE(s.azimuth_deg, 135.0);
    ASSERT_GE(s.elevation_deg, -10.0);
    ASSERT_LE(s.elevation_deg, 75.0);
    ASSERT_GE(s.distance_m, 0.75);
    ASSERT_LE(s.distance_m, 1.20);
    // Recompute the spherical coordinates from the pose itself.
    const Vec3 c = s.cam_from_base.inverse().translation();
    const double az = std::atan2(c.y(), c.x()) * 180 / std::numbers::pi;
    const double el = std::asin(c.z() / c.norm()) * 180 / std::numbers::pi;
    ASSERT_NEAR(az, s.azimuth_deg, 1e-9);
    ASSERT_NEAR(el, s.elevation_deg, 1e-9);
    ASSERT_NEAR(c.norm(), s.distance_m, 1e-12);
    // Optical axis within the jitter cone of the look-at direction.
    const Vec3 axis = s.cam_from_base.rotation().inverse() * Vec3::UnitZ();
    const double off = std::acos(std::clamp(axis.dot(-c.normalized()), -1.0, 1.0));
    ASSERT_LE(off, 5.0 * std::numbers::pi / 180 + 1e-12);
  }
}

TEST(SampleCamera, FixedSeedBitIdentical) {
  CounterRng a(3), b(3);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(SampleCameraPose({}, a).matrix(), SampleCameraPose({}, b).matrix());
  }
}

TEST(SampleCamera, InvalidConfig) {
  CameraShellConfig cfg;
  cfg.distance_min_m = 0;
  cfg.distance_max_m = 0;
  CounterRng r(1);
  EXPECT_EQ(KindOf([&] { SampleCamera(cfg, r); }), ErrorKind::kValidationError);
  cfg = {};
  cfg.azimuth_min_deg = 10;
  cfg.azimuth_max_deg = -10;
  EXPECT_EQ(KindOf([&] { SampleCamera(cfg, r); }), ErrorKind::kValidationError);
}

// --- joints --------------------------------------------------------------------

TEST(SampleJointConfig, PinnedLimit) {
  const KinematicChain c("p",
                         {JointSpec{"j", JointKind::kRevolute, {}, Vec3::UnitZ(), JointLimits{0.3, 0.3}}},
                         {});
  CounterRng r(4);
  EXPECT_EQ(SampleJointConfig(c, r).values, std::vector<double>{0.3});
}

TEST(SampleJointConfig, ContainmentAndDeterminism) {
  const KinematicChain c = Panda();
  CounterRng r(5), r2(5);
  for (int i = 0; i < 10000; ++i) {
    const JointConfig q = SampleJointConfig(c, r);
    EXPECT_EQ(q.values, SampleJointConfig(c, r2).values);
    int d = 0;
    for (const JointSpec& j : c.joints()) {
      if (j.kind == JointKind::kFixed) continue;
      ASSERT_GE(q.values[d], j.limits->lower);
      ASSERT_LE(q.values[d], j.limits->upper);
      ++d;
    }
  }
}

TEST(SampleJointConfig, MissingLimits) {
  const KinematicChain c("p", {JointSpec{"j", JointKind::kRevolute, {}, Vec3::UnitZ(), std::nullopt}},
                         {});
  CounterRng r(6);
  EXPECT_EQ(KindOf([&] { SampleJointConfig(c, r); }), ErrorKind::kMissingLimits);
}

// --- datasets ------------------------------------------------------------------

GenerateOptions Opts(int n, std::uint64_t seed) {
  GenerateOptions o;
  o.n_frames = n;
  o.seed = seed;
  return o;
}

TEST(GenerateDataset, NoiselessDetectionsEqualGroundTruth) {
  const Dataset d = GenerateDataset(Panda(), kK, {}, {}, Opts(30, 1));
  ASSERT_EQ(d.frames.size(), 30u);
  for (const FrameRecord& f : d.frames) {
    ASSERT_EQ(f.detections.size(), f.gt_pixels.size());
    for (size_t i = 0; i < f.detections.size(); ++i) {
      EXPECT_EQ(f.detections[i].name, f.gt_pixels[i].name);
      EXPECT_EQ(f.detections[i].pixel, f.gt_pixels[i].pixel);
    }
    EXPECT_GE(f.gt_pixels.size(), 4u);
    EXPECT_NO_THROW(f.Validate(Panda(), kK));
    EXPECT_EQ(f.gt_cam_from_base.matrix(), d.frames[0].gt_cam_from_base.matrix());
  }
}

TEST(GenerateDataset, FullDropout) {
  NoiseConfig n;
  n.dropout_prob = 1.0;
  const Dataset d = GenerateDataset(Panda(), kK, {}, n, Opts(20, 2));
  for (const FrameRecord& f : d.frames) {
    EXPECT_TRUE(f.detections.empty());
    EXPECT_FALSE(f.gt_pixels.empty());
  }
}

TEST(GenerateDataset, NoisyDetectionsStayInImage) {
  NoiseConfig n;
  n.pixel_sigma = 2;
  n.outlier_prob = 0.2;
  n.outlier_radius_px = 40;
  const Dataset d = GenerateDataset(Panda(), kK, {}, n, Opts(50, 3));
  size_t far = 0;
  for (const FrameRecord& f : d.frames) {
    for (const NamedPixel& det : f.detections) {
      EXPECT_TRUE(InImage(kK, det.pixel));
      for (const NamedPixel& g : f.gt_pixels) {
        if (g.name == det.name && (g.pixel - det.pixel).norm() > 30) ++far;
      }
    }
  }
  EXPECT_GT(far, 0u);
}

TEST(GenerateDataset, PerFrameCameras) {
  GenerateOptions o = Opts(10, 4);
  o.camera_mode = CameraMode::kPerFrame;
  const Dataset d = GenerateDataset(Panda(), kK, {}, {}, o);
  std::set<double> xs;
  for (const FrameRecord& f : d.frames) xs.insert(f.gt_cam_from_base.translation().x());
  EXPECT_EQ(xs.size(), 10u);
}

TEST(GenerateDataset, DeterministicAndThreadIndependent) {
  NoiseConfig n;
  n.pixel_sigma = 1.5;
  n.dropout_prob = 0.1;
  GenerateOptions o = Opts(25, 5);
  o.marker = MarkerConfig{9, Transform(), {0.01, 0.002}};
  const Dataset a = GenerateDataset(Panda(), kK, {}, n, o);
  o.threads = 4;
  const Dataset b = GenerateDataset(Panda(), kK, {}, n, o);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (size_t i = 0; i < a.frames.size(); ++i) {
    EXPECT_EQ(a.frames[i].joint_config.values, b.frames[i].joint_config.values);
    ASSERT_EQ(a.frames[i].detections.size(), b.frames[i].detections.size());
    for (size_t j = 0; j < a.frames[i].detections.size(); ++j) {
      EXPECT_EQ(a.frames[i].detections[j].pixel, b.frames[i].detections[j].pixel);
    }
    EXPECT_EQ(a.frames[i].handeye->cam_from_marker.matrix(),
              b.frames[i].handeye->cam_from_marker.matrix());
  }
}

TEST(GenerateDataset, TooFewKeypoints) {
  const KinematicChain c(
      "few", {JointSpec{"j", JointKind::kRevolute, {}, Vec3::UnitZ(), JointLimits{-1, 1}}},
      {KeypointSpec{"a", 0, {}}, KeypointSpec{"b", 1, {0.1, 0, 0}}});
  EXPECT_EQ(KindOf([&] { GenerateDataset(c, kK, {}, {}, Opts(1, 0)); }),
            ErrorKind::kValidationError);
}

TEST(GenerateDataset, NoiselessMultiFrameRecoversCamera) {
  const Dataset d = GenerateDataset(Panda(), kK, {}, {}, Opts(100, 6));
  std::vector<FrameObservation> obs;
  for (const auto& f : SweepFramesFromDataset(d)) obs.push_back(f.observation);
  const PnpSolution s = SolveMultiFrame(obs, kK);
  const Transform& gt = d.frames[0].gt_cam_from_base;
  EXPECT_LT((s.cam_from_robot.translation() - gt.translation()).norm(), 1e-5);
  EXPECT_LT(RotationAngleBetween(s.cam_from_robot.rotation(), gt.rotation()), 1e-5);
  EXPECT_EQ(s.frames_used, 100);
}

TEST(GenerateDataset, BeliefMapPipelineIdentity) {
  const KinematicChain chain = Panda();
  const Dataset d = GenerateDataset(chain, kK, {}, {}, Opts(5, 7));
  for (const FrameRecord& f : d.frames) {
    const BeliefMapStack stack = RenderFrameBeliefMaps(f, chain, kK, 1.0);
    const auto dets = ExtractAll(stack, {});
    FrameObservation obs;
    obs.keypoints3d = f.keypoints3d;
    for (const auto& det : dets) {
      if (det) obs.detections.push_back(*det);
    }
    ASSERT_EQ(obs.detections.size(), f.detections.size());
    // Thresholded peak averaging leaves a few hundredths of a pixel of bias;
    // with four or five points that is worth up to ~0.2 mm.
    const PnpSolution s = SolveFrame(obs, kK);
    EXPECT_LT(AddMm(s.cam_from_robot, f.gt_cam_from_base, f.keypoints3d), 0.2);
    // Exact detections must do far better.
    FrameObservation exact;
    exact.keypoints3d = f.keypoints3d;
    for (const auto& d : f.detections) exact.detections.push_back({d.name, d.pixel, 1.0});
    const PnpSolution se = SolveFrame(exact, kK);
    EXPECT_LT(AddMm(se.cam_from_robot, f.gt_cam_from_base, f.keypoints3d), 0.1);
  }
}

// --- hand-eye samples ----------------------------------------------------------

TEST(GenerateHandEyeSamples, IdentityOffsets) {
  const KinematicChain c = Panda();
  CounterRng r(8);
  std::vector<JointConfig> qs;
  for (int i = 0; i < 5; ++i) qs.push_back(SampleJointConfig(c, r));
  const auto s = GenerateHandEyeSamples(c, 9, Transform(), Transform(), qs, {}, r);
  for (const auto& x : s) EXPECT_EQ(x.cam_from_marker.matrix(), x.base_from_hand.matrix());
}

TEST(GenerateHandEyeSamples, NoiselessSolveRecoversInputs) {
  const KinematicChain c = Panda();
  CounterRng r(9);
  std::vector<JointConfig> qs;
  for (int i = 0; i < 10; ++i) qs.push_back(SampleJointConfig(c, r));
  const Transform cam_from_base = SampleCameraPose({}, r);
  const Transform hfm(Rotation::FromRpy(0.2, -0.1, 0.5), {0.01, 0.03, 0.06});
  const auto s = GenerateHandEyeSamples(c, 9, hfm, cam_from_base, qs, {}, r);
  const HandEyeSolution sol = SolveEyeOnBase(s);
  EXPECT_LT((sol.cam_from_base.translation() - cam_from_base.translation()).norm(), 1e-8);
  EXPECT_LT(QuaternionDistance(sol.cam_from_base.rotation(), cam_from_base.rotation()), 1e-8);
  EXPECT_LT((sol.hand_from_marker.translation() - hfm.translation()).norm(), 1e-8);
  EXPECT_LT(QuaternionDistance(sol.hand_from_marker.rotation(), hfm.rotation()), 1e-8);
}

TEST(GenerateHandEyeSamples, SeedReproducible) {
  const KinematicChain c = Panda();
  CounterRng q(10);
  std::vector<JointConfig> qs;
  for (int i = 0; i < 4; ++i) qs.push_back(SampleJointConfig(c, q));
  CounterRng a(11), b(11);
  const MarkerNoise noise{0.01, 0.002};
  const auto sa = GenerateHandEyeSamples(c, 9, Transform(), Transform(), qs, noise, a);
  const auto sb = GenerateHandEyeSamples(c, 9, Transform(), Transform(), qs, noise, b);
  for (size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].cam_from_marker.matrix(), sb[i].cam_from_marker.matrix());
  }
  EXPECT_NE(sa[0].cam_from_marker.matrix(), sa[0].base_from_hand.matrix());
}

TEST(GenerateHandEyeSamples, BadHandLink) {
  const KinematicChain c = Panda();
  CounterRng r(12);
  const std::vector<JointConfig> qs = {SampleJointConfig(c, r)};
  EXPECT_EQ(KindOf([&] { GenerateHandEyeSamples(c, 99, {}, {}, qs, {}, r); }),
            ErrorKind::kValidationError);
}

}  // namespace
}  // namespace kpcalib
