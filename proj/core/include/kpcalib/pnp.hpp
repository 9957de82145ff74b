#pragma once

#include <span>
#include <string>
#include <vector>

#include "kpcalib/beliefmap.hpp"
#include "kpcalib/geometry.hpp"
#include "kpcalib/kinematics.hpp"

namespace kpcalib {

struct Correspondence {
  Vec3 p3d;  // robot base frame, meters
  Vec2 p2d;  // pixels
  double weight = 1.0;
};

struct PnpSolution {
  Transform cam_from_robot;
  double reprojection_rmse = 0.0;  // unweighted, pixels
  int n_points = 0;
  int frames_used = 0;
  bool refined = false;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

struct RefineOptions {
  int max_iters = 50;
  double tol = 1e-10;
  // Huber loss in refinement (IRLS). Off by default.
  bool robust = false;
  double huber_delta_px = 5.0;
};

struct PnpConfig {
  bool refine = true;
  // Weight correspondences by detection confidence.
  bool confidence_weighting = false;
  RefineOptions refine_options;
};

// Accepted refinement steps and their costs, for monitoring convergence.
struct RefineTrace {
  std::vector<double> accepted_costs;
};

// EPnP: four control points, barycentric coordinates, null space of the
// 12x12 system, beta cases N = 1..3 picked by reprojection error. Planar
// point sets are initialized from a plane homography instead.
// Throws kInsufficientPoints (< 4) and kDegenerateConfiguration (collinear).
Transform SolveEpnp(std::span<const Correspondence> corrs,
                    const CameraIntrinsics& k);

// Levenberg-damped Gauss-Newton on the pose minimizing the weighted squared
// reprojection error. A step is kept only if the cost decreases; the damping
// doubles on rejection and halves on acceptance.
PnpSolution Refine(const Transform& initial,
                   std::span<const Correspondence> corrs,
                   const CameraIntrinsics& k, const RefineOptions& options = {},
                   RefineTrace* trace = nullptr);

// Unweighted RMS of the pixel residual norms.
double ReprojectionRmse(const Transform& cam_from_robot,
                        std::span<const Correspondence> corrs,
                        const CameraIntrinsics& k);

// EPnP (plus P3P on every triple when n <= 6) followed by refinement if
// enabled. Correspondences are sorted internally so the result does not
// depend on input order.
PnpSolution SolvePnp(std::span<const Correspondence> corrs,
                     const CameraIntrinsics& k, const PnpConfig& cfg = {});

// One camera frame: detections joined by name against that frame's FK
// keypoints. Keypoints without a detection are dropped.
struct FrameObservation {
  std::vector<KeypointDetection> detections;
  std::vector<NamedPoint> keypoints3d;
};

std::vector<Correspondence> JoinByName(const FrameObservation& frame,
                                       bool confidence_weighting);

PnpSolution SolveFrame(const FrameObservation& frame, const CameraIntrinsics& k,
                       const PnpConfig& cfg = {});

// All frames' correspondences in one solve. Requires a static camera and
// robot base across frames.
PnpSolution SolveMultiFrame(std::span<const FrameObservation> frames,
                            const CameraIntrinsics& k,
                            const PnpConfig& cfg = {});

}  // namespace kpcalib
