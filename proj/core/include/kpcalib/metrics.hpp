#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpcalib/geometry.hpp"
#include "kpcalib/handeye.hpp"
#include "kpcalib/kinematics.hpp"
#include "kpcalib/pnp.hpp"
#include "kpcalib/synth.hpp"

namespace kpcalib {

// Threshold columns of the standard results table and the default AUC
// integration ranges (the latter are a configuration choice).
inline constexpr double kPckThresholdsPx[] = {2.5, 5.0, 10.0};
inline constexpr double kAddThresholdsMm[] = {20.0, 40.0, 60.0};
inline constexpr double kPckAucMaxPx = 12.0;
inline constexpr double kAddAucMaxMm = 80.0;
inline constexpr int kDefaultAucIntervals = 1000;

// Accuracy-vs-threshold curve. fraction[i] is the share of samples with
// error <= thresholds[i].
struct Curve {
  std::vector<double> thresholds;
  std::vector<double> fractions;
  double auc = 0.0;
  double auc_max = 0.0;
  int auc_intervals = kDefaultAucIntervals;
  std::size_t n_samples = 0;
};

// fraction(t) = mean(error <= t). AUC is the trapezoidal integral of
// fraction over `auc_intervals` equal steps of [0, auc_max], divided by
// auc_max. Infinite errors never count as correct. Throws kEmptyEvaluation on
// no samples.
Curve CurveAndAuc(std::span<const double> errors,
                  std::span<const double> thresholds, double auc_max,
                  int auc_intervals = kDefaultAucIntervals);

// Per-frame 2D evaluation input. Only keypoints whose ground truth is inside
// the frustum are counted; a counted keypoint with no detection is wrong at
// every threshold.
struct PckFrame {
  std::vector<NamedPixel> ground_truth;
  std::vector<bool> in_frustum;  // parallel to ground_truth
  std::vector<NamedPixel> detections;
};

// Pixel error per counted keypoint, pooled over frames in frame order;
// +infinity marks a missing detection.
std::vector<double> PckErrors(std::span<const PckFrame> frames);

Curve Pck(std::span<const PckFrame> frames,
          std::span<const double> thresholds_px = kPckThresholdsPx,
          double auc_max_px = kPckAucMaxPx,
          int auc_intervals = kDefaultAucIntervals);

// Mean distance in millimeters between est(p) and gt(p) over all points.
double AddMm(const Transform& est, const Transform& gt,
             std::span<const NamedPoint> keypoints3d);
double AddMm(const Transform& est, const Transform& gt,
             std::span<const Vec3> points);

// --- combination sweep ---------------------------------------------------

enum class SweepSolver { kDreamPnp, kHandEye };

std::string_view SweepSolverName(SweepSolver s);
// Smallest frame count a solver can work with (1 for PnP, 3 for hand-eye).
int MinFramesFor(SweepSolver s);

// C(n, k), saturating at UINT64_MAX.
std::uint64_t BinomialSaturating(int n, int k);

// Every combination (lexicographic) when C(M, m) <= n_cap; otherwise n_cap
// distinct combinations drawn with CounterRng(seed, m) and returned sorted.
std::vector<std::vector<int>> SelectCombinations(int big_m, int m,
                                                 std::size_t n_cap,
                                                 std::uint64_t seed);

struct SweepFrame {
  FrameObservation observation;
  std::optional<HandEyeSample> handeye;
};

// Detections (confidence 1) and FK keypoints of a generated frame, plus its
// marker sample if any.
SweepFrame SweepFrameFromRecord(const FrameRecord& record);
std::vector<SweepFrame> SweepFramesFromDataset(const Dataset& dataset);

struct SweepOptions {
  std::size_t n_cap = 2500;
  std::uint64_t seed = 0;
  int threads = 1;
  PnpConfig pnp;
  HandEyeOptions handeye;
};

struct SweepRow {
  int m = 0;
  std::uint64_t n_combinations_total = 0;
  std::size_t n_combinations_used = 0;
  std::size_t n_failed = 0;  // combinations where the solver raised
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  // ADD of every successful combination, in combination order.
  std::vector<double> errors_mm;
};

struct SweepResult {
  SweepSolver solver = SweepSolver::kDreamPnp;
  int big_m = 0;
  std::size_t n_cap = 0;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
};

// Runs the solver on the selected combinations of the first `big_m` frames
// for every m and aggregates ADD (mm) against `gt_cam_from_base`. The ADD of
// one estimate is the mean of the per-frame ADD over all `big_m` frames.
// Throws kSolverUnavailableForM if any m is below the solver minimum or
// above big_m.
SweepResult CombinationSweep(std::span<const SweepFrame> frames, int big_m,
                             SweepSolver solver, std::span<const int> m_values,
                             const Transform& gt_cam_from_base,
                             const CameraIntrinsics& k,
                             const SweepOptions& options = {});

// --- workspace error -----------------------------------------------------

struct NamedTransform {
  std::string name;
  Transform cam_from_base;
};

struct WorkspaceStats {
  std::string method;
  double min_mm = 0.0;
  double max_mm = 0.0;
  double mean_mm = 0.0;
  double std_mm = 0.0;  // population standard deviation
};

// Maps each camera-frame target into the base frame with every estimate and
// compares against the reference base-frame positions.
std::vector<WorkspaceStats> WorkspaceErrorReport(
    std::span<const NamedTransform> estimates,
    std::span<const Vec3> targets_cam, std::span<const Vec3> reference_base);

}  // namespace kpcalib
