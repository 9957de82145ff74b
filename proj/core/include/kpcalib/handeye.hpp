#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kpcalib/geometry.hpp"

namespace kpcalib {

// Eye-on-base sample: the camera is fixed in the world and observes a marker
// carried by the robot hand.
struct HandEyeSample {
  Transform base_from_hand;   // forward kinematics
  Transform cam_from_marker;  // fiducial measurement
};

struct HandEyeSolution {
  Transform cam_from_base;
  Transform hand_from_marker;
  double rotation_residual = 0.0;     // rad, mean over samples
  double translation_residual = 0.0;  // m, mean over samples
  std::string method = "park-martin";
};

struct MotionPair {
  Transform a;
  Transform b;
};

// Least-squares X with A_i X = X B_i (Park & Martin). Rotation from the
// log-vector Procrustes problem, translation from the stacked linear system.
// Throws kInsufficientMotion for fewer than two pairs or parallel axes.
Transform SolveAxxb(std::span<const MotionPair> motions);

struct HandEyeOptions {
  // Use every sample pair instead of consecutive pairs (i, i+1).
  bool all_pairs = false;
};

// Solves cam_from_base * base_from_hand_i * hand_from_marker = cam_from_marker_i.
// Needs at least 3 samples (two independent motions).
HandEyeSolution SolveEyeOnBase(std::span<const HandEyeSample> samples,
                               const HandEyeOptions& options = {});

}  // namespace kpcalib
