#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "chain_oracle.hpp"
#include "generators.hpp"
#include "kpcalib/error.hpp"
#include "kpcalib/metrics.hpp"
#include "kpcalib/synth.hpp"
#include "oracles.hpp"

namespace kpcalib {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIoError;
}

void ExpectMonotone(const Curve& c) {
  for (size_t i = 1; i < c.fractions.size(); ++i) EXPECT_LE(c.fractions[i - 1], c.fractions[i]);
  EXPECT_GE(c.auc, 0.0);
  EXPECT_LE(c.auc, 1.0);
}

TEST(CurveAndAuc, AllZero) {
  const std::vector<double> e(10, 0.0);
  const Curve c = CurveAndAuc(e, kPckThresholdsPx, kPckAucMaxPx);
  for (double f : c.fractions) EXPECT_EQ(f, 1.0);
  EXPECT_DOUBLE_EQ(c.auc, 1.0);
}

TEST(CurveAndAuc, AllAboveRange) {
  const std::vector<double> e = {13, 20, kInf};
  const Curve c = CurveAndAuc(e, kPckThresholdsPx, kPckAucMaxPx);
  for (double f : c.fractions) EXPECT_EQ(f, 0.0);
  EXPECT_EQ(c.auc, 0.0);
}

TEST(CurveAndAuc, UniformErrorsAnalyticHalf) {
  gen::Gen g(61);
  std::vector<double> e(10000);
  for (double& v : e) v = g.Uniform(0, kAddAucMaxMm);
  const Curve c = CurveAndAuc(e, kAddThresholdsMm, kAddAucMaxMm);
  EXPECT_NEAR(c.auc, 0.5, 0.02);
  ExpectMonotone(c);
}

TEST(CurveAndAuc, MatchesCountingAndTrapezoidOracles) {
  gen::Gen g(62);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> e(200 + trial * 13);
    for (double& v : e) v = std::abs(g.Normal(4.0));
    e[0] = kInf;
    e[1] = 5.0;  // exactly on a threshold counts as correct
    const Curve c = CurveAndAuc(e, kPckThresholdsPx, kPckAucMaxPx, 200);
    for (size_t i = 0; i < c.thresholds.size(); ++i) {
      EXPECT_EQ(c.fractions[i], oracle::CountFraction(e, c.thresholds[i]));
    }
    EXPECT_NEAR(c.auc, oracle::TrapezoidAuc(e, kPckAucMaxPx, 200), 1e-12);
    ExpectMonotone(c);
  }
}

TEST(CurveAndAuc, OrderInvariant) {
  gen::Gen g(63);
  std::vector<double> e(500);
  for (double& v : e) v = g.Uniform(0, 15);
  const Curve a = CurveAndAuc(e, kPckThresholdsPx, kPckAucMaxPx);
  std::shuffle(e.begin(), e.end(), g.engine());
  const Curve b = CurveAndAuc(e, kPckThresholdsPx, kPckAucMaxPx);
  EXPECT_EQ(a.auc, b.auc);
  EXPECT_EQ(a.fractions, b.fractions);
}

TEST(CurveAndAuc, Errors) {
  EXPECT_EQ(KindOf([] { CurveAndAuc(std::vector<double>{}, kPckThresholdsPx, 12); }),
            ErrorKind::kEmptyEvaluation);
  EXPECT_EQ(KindOf([] { CurveAndAuc(std::vector<double>{1}, kPckThresholdsPx, 0); }),
            ErrorKind::kValidationError);
}

PckFrame Frame(std::vector<Vec2> gt, std::vector<Vec2> det, std::vector<bool> in) {
  PckFrame f;
  for (size_t i = 0; i < gt.size(); ++i) f.ground_truth.push_back({"k" + std::to_string(i), gt[i]});
  for (size_t i = 0; i < det.size(); ++i) {
    if (!std::isnan(det[i].x())) f.detections.push_back({"k" + std::to_string(i), det[i]});
  }
  f.in_frustum = std::move(in);
  return f;
}

TEST(Pck, ExactDetections) {
  const std::vector<PckFrame> frames = {
      Frame({{1, 1}, {2, 2}}, {{1, 1}, {2, 2}}, {true, true})};
  const Curve c = Pck(frames);
  for (double f : c.fractions) EXPECT_EQ(f, 1.0);
}

TEST(Pck, HalfOffByThree) {
  const std::vector<PckFrame> frames = {
      Frame({{10, 10}, {20, 20}, {30, 30}, {40, 40}},
            {{13, 10}, {20, 20}, {30, 33}, {40, 40}}, {true, true, true, true})};
  const std::vector<double> th = {2.5, 5.0};
  const Curve c = Pck(frames, th);
  EXPECT_EQ(c.fractions, (std::vector<double>{0.5, 1.0}));
}

TEST(Pck, FrustumMaskAndMissing) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<PckFrame> frames = {
      Frame({{10, 10}, {20, 20}, {-5, 3}}, {{10, 10}, {nan, nan}, {100, 100}}, {true, true, false})};
  const auto errs = PckErrors(frames);
  ASSERT_EQ(errs.size(), 2u);
  EXPECT_EQ(errs[0], 0.0);
  EXPECT_EQ(errs[1], kInf);
  const Curve c = Pck(frames);
  for (double f : c.fractions) EXPECT_EQ(f, 0.5);
}

TEST(Pck, EmptyEvaluation) {
  const std::vector<PckFrame> frames = {Frame({{1, 1}}, {{1, 1}}, {false})};
  EXPECT_EQ(KindOf([&] { Pck(frames); }), ErrorKind::kEmptyEvaluation);
}

TEST(Pck, NoisyDatasetMatchesCountingOracle) {
  const KinematicChain chain = LoadChainFile(oracle::FixturePath("chains/panda.json"));
  const CameraIntrinsics k{615, 615, 320, 240, 640, 480};
  NoiseConfig noise;
  noise.pixel_sigma = 2.0;
  noise.dropout_prob = 0.05;
  GenerateOptions opt;
  opt.n_frames = 40;
  opt.seed = 7;
  const Dataset d = GenerateDataset(chain, k, {}, noise, opt);
  std::vector<PckFrame> frames;
  std::vector<double> oracle_errors;
  for (const FrameRecord& r : d.frames) {
    PckFrame f;
    for (const NamedPoint& kp : r.keypoints3d) {
      // Ground truth recomputed with the oracle projection.
      const Vec2 px = oracle::PinholeProject(k.fx, k.fy, k.cx, k.cy, r.gt_cam_from_base.matrix(),
                                             kp.position);
      const Vec3 pc = r.gt_cam_from_base * kp.position;
      const bool in = pc.z() > 0 && px.x() >= 0 && px.x() < k.width && px.y() >= 0 && px.y() < k.height;
      f.ground_truth.push_back({kp.name, px});
      f.in_frustum.push_back(in);
      if (!in) continue;
      double err = kInf;
      for (const NamedPixel& det : r.detections) {
        if (det.name == kp.name) err = (det.pixel - px).norm();
      }
      oracle_errors.push_back(err);
    }
    f.detections = r.detections;
    frames.push_back(f);
  }
  const Curve c = Pck(frames);
  for (size_t i = 0; i < c.thresholds.size(); ++i) {
    EXPECT_EQ(c.fractions[i], oracle::CountFraction(oracle_errors, c.thresholds[i]));
  }
  EXPECT_NEAR(c.auc, oracle::TrapezoidAuc(oracle_errors, kPckAucMaxPx, kDefaultAucIntervals), 1e-12);
  ExpectMonotone(c);
}

TEST(Add, Basics) {
  gen::Gen g(64);
  std::vector<Vec3> pts;
  for (int i = 0; i < 7; ++i) pts.push_back(g.Vector(-0.5, 0.5));
  const Transform gt = g.RandomTransform();
  EXPECT_EQ(AddMm(gt, gt, pts), 0.0);
  const Vec3 t(0.003, -0.004, 0.012);  // 13 mm
  EXPECT_NEAR(AddMm(Transform::FromTranslation(t) * gt, gt, pts), 13.0, 1e-9);
}

TEST(Add, DirectSumOracleAndSymmetry) {
  gen::Gen g(65);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 7; ++i) pts.push_back(g.Vector(-0.5, 0.5));
    const Transform a = g.RandomTransform(), b = g.RandomTransform();
    double sum = 0;
    for (const Vec3& p : pts) {
      sum += ((a.matrix() * p.homogeneous()) - (b.matrix() * p.homogeneous())).norm();
    }
    EXPECT_NEAR(AddMm(a, b, pts), 1000 * sum / 7, 1e-12 * std::max(1.0, 1000 * sum / 7));
    EXPECT_EQ(AddMm(a, b, pts), AddMm(b, a, pts));
  }
}

TEST(Add, ThresholdColumns) {
  EXPECT_EQ(std::vector<double>(std::begin(kPckThresholdsPx), std::end(kPckThresholdsPx)),
            (std::vector<double>{2.5, 5.0, 10.0}));
  EXPECT_EQ(std::vector<double>(std::begin(kAddThresholdsMm), std::end(kAddThresholdsMm)),
            (std::vector<double>{20, 40, 60}));
}

TEST(Combinations, Binomial) {
  EXPECT_EQ(BinomialSaturating(4, 2), 6u);
  EXPECT_EQ(BinomialSaturating(18, 9), 48620u);
  EXPECT_EQ(BinomialSaturating(18, 0), 1u);
  EXPECT_EQ(BinomialSaturating(3, 5), 0u);
  EXPECT_EQ(BinomialSaturating(200, 100), UINT64_MAX);
  EXPECT_EQ(BinomialSaturating(62, 31), 465428353255261088u);
}

TEST(Combinations, ExhaustiveLexicographic) {
  const auto c = SelectCombinations(4, 2, 2500, 0);
  const std::vector<std::vector<int>> want = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(c, want);
  EXPECT_EQ(SelectCombinations(18, 18, 2500, 0).size(), 1u);
}

TEST(Combinations, CappedSamplingDistinctAndDeterministic) {
  const auto a = SelectCombinations(18, 9, 2500, 99);
  ASSERT_EQ(a.size(), 2500u);
  const std::set<std::vector<int>> uniq(a.begin(), a.end());
  EXPECT_EQ(uniq.size(), 2500u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  for (const auto& c : a) {
    ASSERT_EQ(c.size(), 9u);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
    EXPECT_GE(c.front(), 0);
    EXPECT_LT(c.back(), 18);
  }
  EXPECT_EQ(a, SelectCombinations(18, 9, 2500, 99));
  EXPECT_NE(a, SelectCombinations(18, 9, 2500, 100));
}

// Noiseless synthetic frames with marker samples.
Dataset NoiselessDataset(int n) {
  const KinematicChain chain = LoadChainFile(oracle::FixturePath("chains/panda.json"));
  const CameraIntrinsics k{615, 615, 320, 240, 640, 480};
  GenerateOptions opt;
  opt.n_frames = n;
  opt.seed = 3;
  opt.marker = MarkerConfig{9, Transform(Rotation::FromRpy(0.1, 0.2, 0.3), {0.0, 0.02, 0.05}), {}};
  return GenerateDataset(chain, k, {}, {}, opt);
}

TEST(Sweep, ExhaustiveCountAndNoiselessAccuracy) {
  const Dataset d = NoiselessDataset(6);
  const auto frames = SweepFramesFromDataset(d);
  const CameraIntrinsics& k = d.header.intrinsics;
  const Transform gt = d.frames[0].gt_cam_from_base;
  const std::vector<int> ms = {1, 2, 3};
  const SweepResult r = CombinationSweep(frames, 4, SweepSolver::kDreamPnp, ms, gt, k);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[1].n_combinations_used, 6u);
  EXPECT_EQ(r.rows[1].n_combinations_total, 6u);
  for (const SweepRow& row : r.rows) {
    EXPECT_EQ(row.n_failed, 0u);
    EXPECT_LT(row.max, 0.1);
    EXPECT_GE(row.min, 0.0);
    EXPECT_LE(row.min, row.median);
    EXPECT_LE(row.median, row.max);
  }
  const std::vector<int> hec_ms = {3, 4};
  const SweepResult h = CombinationSweep(frames, 4, SweepSolver::kHandEye, hec_ms, gt, k);
  for (const SweepRow& row : h.rows) EXPECT_LT(row.max, 0.1);
}

TEST(Sweep, SolverUnavailableForM) {
  const Dataset d = NoiselessDataset(4);
  const auto frames = SweepFramesFromDataset(d);
  const std::vector<int> ms = {1, 2};
  EXPECT_EQ(KindOf([&] {
              CombinationSweep(frames, 4, SweepSolver::kHandEye, ms,
                               d.frames[0].gt_cam_from_base, d.header.intrinsics);
            }),
            ErrorKind::kSolverUnavailableForM);
  const std::vector<int> too_big = {5};
  EXPECT_EQ(KindOf([&] {
              CombinationSweep(frames, 4, SweepSolver::kDreamPnp, too_big,
                               d.frames[0].gt_cam_from_base, d.header.intrinsics);
            }),
            ErrorKind::kSolverUnavailableForM);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  const KinematicChain chain = LoadChainFile(oracle::FixturePath("chains/panda.json"));
  const CameraIntrinsics k{615, 615, 320, 240, 640, 480};
  NoiseConfig noise;
  noise.pixel_sigma = 2.0;
  GenerateOptions opt;
  opt.n_frames = 10;
  opt.seed = 5;
  const Dataset d = GenerateDataset(chain, k, {}, noise, opt);
  const auto frames = SweepFramesFromDataset(d);
  const std::vector<int> ms = {1, 5};
  SweepOptions so;
  so.n_cap = 50;
  so.seed = 1;
  const SweepResult a = CombinationSweep(frames, 10, SweepSolver::kDreamPnp, ms,
                                         d.frames[0].gt_cam_from_base, k, so);
  so.threads = 4;
  const SweepResult b = CombinationSweep(frames, 10, SweepSolver::kDreamPnp, ms,
                                         d.frames[0].gt_cam_from_base, k, so);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean, b.rows[i].mean);
    EXPECT_EQ(a.rows[i].median, b.rows[i].median);
    EXPECT_EQ(a.rows[i].min, b.rows[i].min);
    EXPECT_EQ(a.rows[i].max, b.rows[i].max);
  }
  EXPECT_EQ(a.rows[1].n_combinations_used, 50u);
}

TEST(Workspace, Basics) {
  gen::Gen g(66);
  const Transform gt = g.RandomTransform();
  std::vector<Vec3> ref, cam;
  for (int i = 0; i < 20; ++i) {
    ref.push_back(g.Vector(-0.5, 0.5));
    cam.push_back(gt * ref.back());
  }
  const Vec3 off = 0.010 * g.UnitVector();
  const std::vector<NamedTransform> est = {{"exact", gt},
                                           {"offset", Transform::FromTranslation(off) * gt}};
  const auto stats = WorkspaceErrorReport(est, cam, ref);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0].method, "exact");
  EXPECT_LT(stats[0].max_mm, 1e-9);
  EXPECT_NEAR(stats[1].mean_mm, 10.0, 1e-9);
  EXPECT_NEAR(stats[1].std_mm, 0.0, 1e-9);
  ref.pop_back();
  EXPECT_EQ(KindOf([&] { WorkspaceErrorReport(est, cam, ref); }), ErrorKind::kDimensionMismatch);
}

TEST(Workspace, DirectComputationOracle) {
  gen::Gen g(67);
  const Transform gt = g.RandomTransform();
  std::vector<Vec3> ref, cam;
  for (int i = 0; i < 30; ++i) {
    ref.push_back(g.Vector(-0.5, 0.5));
    cam.push_back(gt * ref.back());
  }
  std::vector<NamedTransform> est;
  for (int m = 0; m < 3; ++m) {
    est.push_back({"m" + std::to_string(m),
                   Transform(Rotation::FromAxisAngle(g.UnitVector(), 0.01) * gt.rotation(),
                             gt.translation() + 0.01 * g.UnitVector())});
  }
  const auto stats = WorkspaceErrorReport(est, cam, ref);
  for (size_t m = 0; m < est.size(); ++m) {
    const Eigen::Matrix4d inv = est[m].cam_from_base.matrix().inverse();
    std::vector<double> e;
    for (size_t i = 0; i < ref.size(); ++i) {
      e.push_back(1000 * ((inv * cam[i].homogeneous()).head<3>() - ref[i]).norm());
    }
    double mean = 0, var = 0;
    for (double v : e) mean += v / e.size();
    for (double v : e) var += (v - mean) * (v - mean) / e.size();
    EXPECT_NEAR(stats[m].mean_mm, mean, 1e-9);
    EXPECT_NEAR(stats[m].std_mm, std::sqrt(var), 1e-9);
    EXPECT_NEAR(stats[m].min_mm, *std::min_element(e.begin(), e.end()), 1e-9);
    EXPECT_NEAR(stats[m].max_mm, *std::max_element(e.begin(), e.end()), 1e-9);
  }
}

}  // namespace
}  // namespace kpcalib
