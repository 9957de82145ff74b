#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kpcalib/geometry.hpp"

namespace kpcalib {

enum class JointKind { kRevolute, kPrismatic, kFixed };

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
};

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::kFixed;
  // Static offset from the parent link frame, applied before the motion.
  Transform origin;
  Vec3 axis = Vec3::UnitZ();
  std::optional<JointLimits> limits;
};

// A keypoint rigidly attached to a link. Link 0 is the base; link i is the
// frame after joint i.
struct KeypointSpec {
  std::string name;
  int link = 0;
  Vec3 offset = Vec3::Zero();
};

struct NamedPoint {
  std::string name;
  Vec3 position;
};

struct NamedPixel {
  std::string name;
  Vec2 pixel;
};

// Joint positions for the non-fixed joints, in chain order.
struct JointConfig {
  std::vector<double> values;
};

class KinematicChain {
 public:
  KinematicChain() = default;
  // Validates and throws ErrorKind::kValidationError on bad axes, inverted
  // limits or keypoints referring to links that do not exist.
  KinematicChain(std::string name, std::vector<JointSpec> joints,
                 std::vector<KeypointSpec> keypoints);

  const std::string& name() const { return name_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<KeypointSpec>& keypoints() const { return keypoints_; }

  // Number of non-fixed joints, i.e. the expected JointConfig length.
  int dof() const { return dof_; }
  // Number of link frames including the base.
  int num_links() const { return static_cast<int>(joints_.size()) + 1; }

  std::optional<int> FindKeypoint(std::string_view name) const;

 private:
  std::string name_;
  std::vector<JointSpec> joints_;
  std::vector<KeypointSpec> keypoints_;
  int dof_ = 0;
};

// Parses the chain JSON document. ErrorKind::kParseError carries the JSON
// path of the offending field; semantic problems raise kValidationError.
KinematicChain LoadChain(std::string_view document);
KinematicChain LoadChainFile(const std::string& path);

// Base-frame pose of every link frame; element 0 is the base (identity).
// Throws kDimensionMismatch on a wrong-sized config and, with
// `validate_limits`, kValidationError for out-of-limit values.
std::vector<Transform> ForwardKinematics(const KinematicChain& chain,
                                         const JointConfig& q,
                                         bool validate_limits = false);

// Keypoints in declaration order, in the base frame.
std::vector<NamedPoint> KeypointPositions(const KinematicChain& chain,
                                          const JointConfig& q,
                                          bool validate_limits = false);

}  // namespace kpcalib
