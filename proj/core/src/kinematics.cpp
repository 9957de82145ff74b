#include "kpcalib/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kpcalib/error.hpp"

namespace kpcalib {
namespace {

using nlohmann::json;

[[noreturn]] void ParseFail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kParseError, "chain " + where + ": " + what);
}

const json& Require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    ParseFail(where, std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

double ReadNumber(const json& v, const std::string& where) {
  if (!v.is_number()) ParseFail(where, "expected a number");
  return v.get<double>();
}

Vec3 ReadVec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) ParseFail(where, "expected an array of 3 numbers");
  return {ReadNumber(v[0], where + "[0]"), ReadNumber(v[1], where + "[1]"),
          ReadNumber(v[2], where + "[2]")};
}

JointKind ParseKind(const json& v, const std::string& where) {
  if (!v.is_string()) ParseFail(where, "expected a string");
  const auto s = v.get<std::string>();
  if (s == "revolute") return JointKind::kRevolute;
  if (s == "prismatic") return JointKind::kPrismatic;
  if (s == "fixed") return JointKind::kFixed;
  ParseFail(where, "unknown joint kind '" + s + "'");
}

Transform JointMotion(const JointSpec& joint, double value) {
  switch (joint.kind) {
    case JointKind::kRevolute:
      return {Rotation::FromAxisAngle(joint.axis, value), Vec3::Zero()};
    case JointKind::kPrismatic:
      return Transform::FromTranslation(joint.axis * value);
    case JointKind::kFixed:
      break;
  }
  return Transform::Identity();
}

}  // namespace

KinematicChain::KinematicChain(std::string name, std::vector<JointSpec> joints,
                               std::vector<KeypointSpec> keypoints)
    : name_(std::move(name)),
      joints_(std::move(joints)),
      keypoints_(std::move(keypoints)) {
  for (const JointSpec& j : joints_) {
    if (j.kind == JointKind::kFixed) continue;
    ++dof_;
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::kValidationError,
                  "joint '" + j.name + "': axis must have unit norm");
    }
    if (j.limits && !(j.limits->lower <= j.limits->upper)) {
      throw Error(ErrorKind::kValidationError,
                  "joint '" + j.name + "': lower limit exceeds upper limit");
    }
  }
  for (const KeypointSpec& kp : keypoints_) {
    if (kp.link < 0 || kp.link >= num_links()) {
      throw Error(ErrorKind::kValidationError,
                  "keypoint '" + kp.name + "': link index " +
                      std::to_string(kp.link) + " out of range");
    }
  }
}

std::optional<int> KinematicChain::FindKeypoint(std::string_view name) const {
  for (size_t i = 0; i < keypoints_.size(); ++i) {
    if (keypoints_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

KinematicChain LoadChain(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    ParseFail("document", e.what());
  }
  if (!doc.is_object()) ParseFail("document", "expected a JSON object");

  std::string name;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) ParseFail("name", "expected a string");
    name = doc["name"].get<std::string>();
  }

  const json& joints_json = Require(doc, "joints", "document");
  if (!joints_json.is_array()) ParseFail("joints", "expected an array");
  std::vector<JointSpec> joints;
  for (size_t i = 0; i < joints_json.size(); ++i) {
    const std::string where = "joints[" + std::to_string(i) + "]";
    const json& jj = joints_json[i];
    JointSpec joint;
    const json& jname = Require(jj, "name", where);
    if (!jname.is_string()) ParseFail(where + ".name", "expected a string");
    joint.name = jname.get<std::string>();
    joint.kind = ParseKind(Require(jj, "kind", where), where + ".kind");
    if (jj.contains("origin")) {
      const json& o = jj["origin"];
      Vec3 xyz = Vec3::Zero();
      Vec3 rpy = Vec3::Zero();
      if (o.contains("xyz")) xyz = ReadVec3(o["xyz"], where + ".origin.xyz");
      if (o.contains("rpy")) rpy = ReadVec3(o["rpy"], where + ".origin.rpy");
      joint.origin = {Rotation::FromRpy(rpy.x(), rpy.y(), rpy.z()), xyz};
    }
    if (joint.kind != JointKind::kFixed) {
      joint.axis = ReadVec3(Require(jj, "axis", where), where + ".axis");
    } else if (jj.contains("axis")) {
      joint.axis = ReadVec3(jj["axis"], where + ".axis");
    }
    if (jj.contains("limits") && !jj["limits"].is_null()) {
      const json& lim = jj["limits"];
      if (!lim.is_array() || lim.size() != 2) {
        ParseFail(where + ".limits", "expected [lower, upper]");
      }
      joint.limits = JointLimits{ReadNumber(lim[0], where + ".limits[0]"),
                                 ReadNumber(lim[1], where + ".limits[1]")};
    }
    joints.push_back(std::move(joint));
  }

  std::vector<KeypointSpec> keypoints;
  const json& kps_json = Require(doc, "keypoints", "document");
  if (!kps_json.is_array()) ParseFail("keypoints", "expected an array");
  for (size_t i = 0; i < kps_json.size(); ++i) {
    const std::string where = "keypoints[" + std::to_string(i) + "]";
    const json& kj = kps_json[i];
    KeypointSpec kp;
    const json& kname = Require(kj, "name", where);
    if (!kname.is_string()) ParseFail(where + ".name", "expected a string");
    kp.name = kname.get<std::string>();
    const json& link = Require(kj, "link", where);
    if (!link.is_number_integer()) ParseFail(where + ".link", "expected an integer");
    kp.link = link.get<int>();
    if (kj.contains("offset")) kp.offset = ReadVec3(kj["offset"], where + ".offset");
    keypoints.push_back(std::move(kp));
  }

  return KinematicChain(std::move(name), std::move(joints), std::move(keypoints));
}

KinematicChain LoadChainFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open chain file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return LoadChain(ss.str());
}

std::vector<Transform> ForwardKinematics(const KinematicChain& chain,
                                         const JointConfig& q,
                                         bool validate_limits) {
  if (static_cast<int>(q.values.size()) != chain.dof()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "joint config has " + std::to_string(q.values.size()) +
                    " values, chain expects " + std::to_string(chain.dof()));
  }
  std::vector<Transform> links;
  links.reserve(chain.joints().size() + 1);
  links.push_back(Transform::Identity());
  size_t qi = 0;
  for (const JointSpec& joint : chain.joints()) {
    double value = 0.0;
    if (joint.kind != JointKind::kFixed) {
      value = q.values[qi++];
      if (validate_limits && joint.limits &&
          (value < joint.limits->lower || value > joint.limits->upper)) {
        throw Error(ErrorKind::kValidationError,
                    "joint '" + joint.name + "' value outside limits");
      }
    }
    links.push_back(links.back() * joint.origin * JointMotion(joint, value));
  }
  return links;
}

std::vector<NamedPoint> KeypointPositions(const KinematicChain& chain,
                                          const JointConfig& q,
                                          bool validate_limits) {
  const std::vector<Transform> links = ForwardKinematics(chain, q, validate_limits);
  std::vector<NamedPoint> out;
  out.reserve(chain.keypoints().size());
  for (const KeypointSpec& kp : chain.keypoints()) {
    out.push_back({kp.name, links[kp.link] * kp.offset});
  }
  return out;
}

}  // namespace kpcalib
