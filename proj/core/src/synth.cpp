#include "kpcalib/synth.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "kpcalib/error.hpp"
#include "kpcalib/parallel.hpp"

namespace kpcalib {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

// Rotation taking +z onto the unit vector `dir`.
Rotation AlignZ(const Vec3& dir) {
  return Rotation(Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), dir));
}

}  // namespace

void CameraShellConfig::Validate() const {
  if (!(azimuth_min_deg <= azimuth_max_deg) ||
      !(elevation_min_deg <= elevation_max_deg) ||
      !(distance_min_m <= distance_max_m)) {
    throw Error(ErrorKind::kValidationError, "camera shell: empty range");
  }
  if (!(distance_min_m > 0.0)) {
    throw Error(ErrorKind::kValidationError, "camera shell: distance must be > 0");
  }
  if (!(jitter_half_angle_deg >= 0.0) || jitter_half_angle_deg >= 90.0) {
    throw Error(ErrorKind::kValidationError,
                "camera shell: jitter half-angle must be in [0, 90)");
  }
}

void NoiseConfig::Validate() const {
  if (!IsProbability(dropout_prob) || !IsProbability(outlier_prob)) {
    throw Error(ErrorKind::kValidationError, "noise: probabilities must be in [0, 1]");
  }
  if (!(pixel_sigma >= 0.0) || !(outlier_radius_px >= 0.0)) {
    throw Error(ErrorKind::kValidationError, "noise: magnitudes must be >= 0");
  }
}

CameraSample SampleCamera(const CameraShellConfig& cfg, CounterRng& rng) {
  cfg.Validate();
  CameraSample s;
  s.azimuth_deg = rng.Uniform(cfg.azimuth_min_deg, cfg.azimuth_max_deg);
  s.elevation_deg = rng.Uniform(cfg.elevation_min_deg, cfg.elevation_max_deg);
  s.distance_m = rng.Uniform(cfg.distance_min_m, cfg.distance_max_m);
  const double az = s.azimuth_deg * kDegToRad;
  const double el = s.elevation_deg * kDegToRad;
  const Vec3 position = s.distance_m * Vec3(std::cos(el) * std::cos(az),
                                            std::cos(el) * std::sin(az),
                                            std::sin(el));

  // Camera axes: x right, y down, z forward.
  const Vec3 forward = -position.normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 base_from_cam_r;
  base_from_cam_r << right, down, forward;

  const double cos_max = std::cos(cfg.jitter_half_angle_deg * kDegToRad);
  const double cos_tilt = rng.Uniform(cos_max, 1.0);
  const double phi = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double sin_tilt = std::sqrt(std::max(0.0, 1.0 - cos_tilt * cos_tilt));
  const Rotation jitter =
      AlignZ(Vec3(sin_tilt * std::cos(phi), sin_tilt * std::sin(phi), cos_tilt));

  const Transform base_from_cam(Rotation::FromMatrix(base_from_cam_r) * jitter,
                                position);
  s.cam_from_base = base_from_cam.inverse();
  return s;
}

Transform SampleCameraPose(const CameraShellConfig& cfg, CounterRng& rng) {
  return SampleCamera(cfg, rng).cam_from_base;
}

JointConfig SampleJointConfig(const KinematicChain& chain, CounterRng& rng) {
  JointConfig q;
  for (const JointSpec& j : chain.joints()) {
    if (j.kind == JointKind::kFixed) continue;
    if (!j.limits) {
      throw Error(ErrorKind::kMissingLimits,
                  "joint '" + j.name + "' has no limits to sample within");
    }
    q.values.push_back(rng.Uniform(j.limits->lower, j.limits->upper));
  }
  return q;
}

void FrameRecord::Validate(const KinematicChain& chain,
                           const CameraIntrinsics& k) const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorKind::kValidationError,
                "frame " + std::to_string(index) + ": " + what);
  };
  if (static_cast<int>(joint_config.values.size()) != chain.dof()) {
    fail("joint config length does not match chain");
  }
  std::map<std::string, Vec3> points;
  for (const NamedPoint& p : keypoints3d) {
    if (!chain.FindKeypoint(p.name)) fail("unknown keypoint '" + p.name + "'");
    points[p.name] = p.position;
  }
  for (const NamedPixel& g : gt_pixels) {
    const auto it = points.find(g.name);
    if (it == points.end()) fail("ground-truth pixel without 3D keypoint: " + g.name);
    if (!InFrustum(k, gt_cam_from_base, it->second)) {
      fail("ground-truth pixel for out-of-frustum keypoint " + g.name);
    }
    if ((Project(k, gt_cam_from_base, it->second) - g.pixel).norm() > 1e-6) {
      fail("ground-truth pixel disagrees with projection for " + g.name);
    }
  }
  for (const NamedPixel& d : detections) {
    if (!chain.FindKeypoint(d.name)) fail("detection for unknown keypoint '" + d.name + "'");
    if (!d.pixel.allFinite()) fail("non-finite detection");
  }
}

std::vector<HandEyeSample> GenerateHandEyeSamples(
    const KinematicChain& chain, int hand_link, const Transform& hand_from_marker,
    const Transform& cam_from_base, std::span<const JointConfig> joint_configs,
    const MarkerNoise& noise, CounterRng& rng) {
  if (hand_link < 0 || hand_link >= chain.num_links()) {
    throw Error(ErrorKind::kValidationError,
                "hand link " + std::to_string(hand_link) + " out of range");
  }
  std::vector<HandEyeSample> samples;
  samples.reserve(joint_configs.size());
  for (const JointConfig& q : joint_configs) {
    const Transform base_from_hand = ForwardKinematics(chain, q)[hand_link];
    Transform cam_from_marker = cam_from_base * base_from_hand * hand_from_marker;
    const Vec3 v(rng.Normal(), rng.Normal(), rng.Normal());
    const Vec3 n(rng.Normal(), rng.Normal(), rng.Normal());
    cam_from_marker = Transform(
        So3Exp(noise.rotation_sigma_rad * v) * cam_from_marker.rotation(),
        cam_from_marker.translation() + noise.translation_sigma_m * n);
    samples.push_back({base_from_hand, cam_from_marker});
  }
  return samples;
}

Dataset GenerateDataset(const KinematicChain& chain, const CameraIntrinsics& k,
                        const CameraShellConfig& shell, const NoiseConfig& noise,
                        const GenerateOptions& options) {
  k.Validate();
  shell.Validate();
  noise.Validate();
  if (chain.keypoints().size() < 4) {
    throw Error(ErrorKind::kValidationError,
                "chain must define at least 4 keypoints");
  }
  if (options.n_frames < 0) {
    throw Error(ErrorKind::kValidationError, "frame count must be >= 0");
  }

  Dataset ds;
  ds.header.chain_name = chain.name();
  ds.header.intrinsics = k;
  ds.header.shell = shell;
  ds.header.noise = noise;
  ds.header.seed = options.seed;
  ds.header.camera_mode = options.camera_mode;
  ds.header.min_visible_keypoints = options.min_visible_keypoints;
  ds.header.marker = options.marker;

  std::optional<Transform> static_camera;
  if (options.camera_mode == CameraMode::kStatic) {
    CounterRng cam_rng(options.seed, 0);
    static_camera = SampleCameraPose(shell, cam_rng);
  }

  ds.frames.resize(static_cast<size_t>(options.n_frames));
  ParallelFor(ds.frames.size(), options.threads, [&](size_t i) {
    CounterRng frame_rng(options.seed, i + 1);
    CounterRng pose_rng = frame_rng.Split(0);
    CounterRng noise_rng = frame_rng.Split(1);
    CounterRng marker_rng = frame_rng.Split(2);

    FrameRecord& f = ds.frames[i];
    f.index = static_cast<int>(i);
    bool ok = false;
    for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
      f.gt_cam_from_base =
          static_camera ? *static_camera : SampleCameraPose(shell, pose_rng);
      f.joint_config = SampleJointConfig(chain, pose_rng);
      f.keypoints3d = KeypointPositions(chain, f.joint_config, true);
      f.gt_pixels.clear();
      for (const NamedPoint& p : f.keypoints3d) {
        if (InFrustum(k, f.gt_cam_from_base, p.position)) {
          f.gt_pixels.push_back({p.name, Project(k, f.gt_cam_from_base, p.position)});
        }
      }
      ok = static_cast<int>(f.gt_pixels.size()) >= options.min_visible_keypoints;
    }
    if (!ok) {
      throw Error(ErrorKind::kValidationError,
                  "frame " + std::to_string(i) + ": no configuration with " +
                      std::to_string(options.min_visible_keypoints) +
                      " visible keypoints after " +
                      std::to_string(options.max_attempts) + " attempts");
    }

    f.detections.clear();
    for (const NamedPixel& g : f.gt_pixels) {
      // Fixed number of draws per keypoint keeps streams aligned whatever
      // the noise settings.
      const double u_drop = noise_rng.Uniform01();
      const double u_out = noise_rng.Uniform01();
      const double angle = noise_rng.Uniform(0.0, 2.0 * std::numbers::pi);
      const double nx = noise_rng.Normal();
      const double ny = noise_rng.Normal();
      if (u_drop < noise.dropout_prob) continue;
      Vec2 px = g.pixel;
      if (u_out < noise.outlier_prob) {
        px += noise.outlier_radius_px * Vec2(std::cos(angle), std::sin(angle));
      } else {
        px += noise.pixel_sigma * Vec2(nx, ny);
      }
      if (!InImage(k, px)) continue;
      f.detections.push_back({g.name, px});
    }

    if (options.marker) {
      const JointConfig q[] = {f.joint_config};
      f.handeye = GenerateHandEyeSamples(chain, options.marker->hand_link,
                                         options.marker->hand_from_marker,
                                         f.gt_cam_from_base, q,
                                         options.marker->noise, marker_rng)
                      .front();
    }
    f.Validate(chain, k);
  });
  return ds;
}

BeliefMapStack RenderFrameBeliefMaps(const FrameRecord& frame,
                                     const KinematicChain& chain,
                                     const CameraIntrinsics& k, double scale,
                                     double sigma) {
  const auto [w, h] = MapDimensions(k.width, k.height, scale);
  BeliefMapStack stack;
  stack.scale = scale;
  for (const KeypointSpec& kp : chain.keypoints()) {
    stack.names.push_back(kp.name);
    const NamedPixel* det = nullptr;
    for (const NamedPixel& d : frame.detections) {
      if (d.name == kp.name) det = &d;
    }
    if (det) {
      stack.maps.push_back(RenderGroundTruth(k.width, k.height, scale, det->pixel, sigma));
    } else {
      stack.maps.emplace_back(w, h, scale);
    }
  }
  return stack;
}

}  // namespace kpcalib
