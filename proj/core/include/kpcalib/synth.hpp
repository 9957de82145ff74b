#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpcalib/beliefmap.hpp"
#include "kpcalib/geometry.hpp"
#include "kpcalib/handeye.hpp"
#include "kpcalib/kinematics.hpp"
#include "kpcalib/rng.hpp"

namespace kpcalib {

// Camera placement on a truncated spherical shell around the chain base
// origin. Azimuth 0 is the base +x axis, measured counter-clockwise about +z;
// elevation is measured from the base xy-plane. The camera looks at the base
// origin with image "down" along -z where possible, then its optical axis is
// tilted uniformly within a cone of `jitter_half_angle_deg`.
struct CameraShellConfig {
  double azimuth_min_deg = -135.0;
  double azimuth_max_deg = 135.0;
  double elevation_min_deg = -10.0;
  double elevation_max_deg = 75.0;
  double distance_min_m = 0.75;
  double distance_max_m = 1.20;
  double jitter_half_angle_deg = 5.0;

  void Validate() const;
};

// Stand-in for detector error, applied to projected keypoints.
struct NoiseConfig {
  double pixel_sigma = 0.0;
  double dropout_prob = 0.0;
  double outlier_prob = 0.0;
  double outlier_radius_px = 0.0;

  void Validate() const;
};

struct CameraSample {
  Transform cam_from_base;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance_m = 0.0;
};

CameraSample SampleCamera(const CameraShellConfig& cfg, CounterRng& rng);
Transform SampleCameraPose(const CameraShellConfig& cfg, CounterRng& rng);

// Independent uniform draw per non-fixed joint; kMissingLimits if a joint has
// no limits.
JointConfig SampleJointConfig(const KinematicChain& chain, CounterRng& rng);

enum class CameraMode { kStatic, kPerFrame };

// Pose noise on synthetic marker measurements: rotation perturbation
// exp(v) with v ~ N(0, rotation_sigma_rad^2 I3), translation N(0, sigma^2 I3).
struct MarkerNoise {
  double rotation_sigma_rad = 0.0;
  double translation_sigma_m = 0.0;
};

struct MarkerConfig {
  int hand_link = 0;
  Transform hand_from_marker;
  MarkerNoise noise;
};

struct FrameRecord {
  int index = 0;
  JointConfig joint_config;
  Transform gt_cam_from_base;
  std::vector<NamedPoint> keypoints3d;
  std::vector<NamedPixel> gt_pixels;   // in-frustum keypoints only
  std::vector<NamedPixel> detections;  // after noise
  std::optional<std::string> belief_maps;  // sidecar BMAP path
  std::optional<HandEyeSample> handeye;

  // Throws kValidationError if the record breaks its invariants against the
  // chain and intrinsics.
  void Validate(const KinematicChain& chain, const CameraIntrinsics& k) const;
};

struct DatasetHeader {
  std::string chain_name;
  std::string chain_path;
  std::string chain_hash;
  CameraIntrinsics intrinsics;
  CameraShellConfig shell;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  CameraMode camera_mode = CameraMode::kStatic;
  int min_visible_keypoints = 4;
  std::optional<MarkerConfig> marker;
};

struct Dataset {
  DatasetHeader header;
  std::vector<FrameRecord> frames;
};

struct GenerateOptions {
  int n_frames = 1;
  CameraMode camera_mode = CameraMode::kStatic;
  std::uint64_t seed = 0;
  // Joint configurations (and per-frame cameras) are redrawn until this many
  // keypoints fall inside the frustum.
  int min_visible_keypoints = 4;
  int max_attempts = 1000;
  std::optional<MarkerConfig> marker;
  int threads = 1;
};

// Frame i draws from stream i + 1 of the seed; the static camera from stream 0.
Dataset GenerateDataset(const KinematicChain& chain, const CameraIntrinsics& k,
                        const CameraShellConfig& shell, const NoiseConfig& noise,
                        const GenerateOptions& options);

// base_from_hand from FK; cam_from_marker = cam_from_base * base_from_hand *
// hand_from_marker, perturbed by `noise`.
std::vector<HandEyeSample> GenerateHandEyeSamples(
    const KinematicChain& chain, int hand_link, const Transform& hand_from_marker,
    const Transform& cam_from_base, std::span<const JointConfig> joint_configs,
    const MarkerNoise& noise, CounterRng& rng);

// One map per chain keypoint, rendered at the frame's detections (keypoints
// without a detection get an empty map). Default sigma is 2 px.
BeliefMapStack RenderFrameBeliefMaps(const FrameRecord& frame,
                                     const KinematicChain& chain,
                                     const CameraIntrinsics& k, double scale,
                                     double sigma = 2.0);

}  // namespace kpcalib
