#include "kpcalib/serialization.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "kpcalib/error.hpp"

namespace kpcalib {
namespace {

[[noreturn]] void ParseFail(std::string_view where, std::string_view what) {
  throw Error(ErrorKind::kParseError, std::string(where) + ": " + std::string(what));
}

const Json& Field(const Json& j, const char* key, std::string_view where) {
  if (!j.is_object()) ParseFail(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) ParseFail(where, std::string("missing field '") + key + "'");
  return *it;
}

double Number(const Json& j, std::string_view where) {
  if (!j.is_number()) ParseFail(where, "expected a number");
  return j.get<double>();
}

int Integer(const Json& j, std::string_view where) {
  if (!j.is_number_integer()) ParseFail(where, "expected an integer");
  return j.get<int>();
}

std::string String(const Json& j, std::string_view where) {
  if (!j.is_string()) ParseFail(where, "expected a string");
  return j.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> Vector(const Json& j, std::string_view where) {
  if (!j.is_array() || j.size() != N) {
    ParseFail(where, "expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = Number(j[i], where);
  return v;
}

template <typename V>
Json Array(const V& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void ReadOptional(const Json& j, const char* key, double* out, std::string_view where) {
  if (j.contains(key)) *out = Number(j[key], std::string(where) + "." + key);
}

std::vector<NamedPixel> PixelsFromJson(const Json& j, std::string_view where) {
  if (!j.is_array()) ParseFail(where, "expected an array");
  std::vector<NamedPixel> out;
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string w = std::string(where) + "[" + std::to_string(i) + "]";
    out.push_back({String(Field(j[i], "name", w), w + ".name"),
                   Vector<2>(Field(j[i], "pixel", w), w + ".pixel")});
  }
  return out;
}

Json PixelsToJson(const std::vector<NamedPixel>& pixels) {
  Json a = Json::array();
  for (const NamedPixel& p : pixels) a.push_back({{"name", p.name}, {"pixel", Array(p.pixel)}});
  return a;
}

// Formats doubles for CSV with round-trip precision.
std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace

Json ToJson(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics IntrinsicsFromJson(const Json& j) {
  CameraIntrinsics k;
  k.fx = Number(Field(j, "fx", "intrinsics"), "intrinsics.fx");
  k.fy = Number(Field(j, "fy", "intrinsics"), "intrinsics.fy");
  k.cx = Number(Field(j, "cx", "intrinsics"), "intrinsics.cx");
  k.cy = Number(Field(j, "cy", "intrinsics"), "intrinsics.cy");
  k.width = Integer(Field(j, "width", "intrinsics"), "intrinsics.width");
  k.height = Integer(Field(j, "height", "intrinsics"), "intrinsics.height");
  k.Validate();
  return k;
}

Json ToJson(const Transform& t) {
  const Rotation& r = t.rotation();
  return {{"rotation_quat_wxyz", {r.w(), r.x(), r.y(), r.z()}},
          {"translation_m", Array(t.translation())}};
}

Transform TransformFromJson(const Json& j) {
  const Eigen::Vector4d q = Vector<4>(Field(j, "rotation_quat_wxyz", "pose"),
                                      "pose.rotation_quat_wxyz");
  if (q.norm() < 1e-12) ParseFail("pose.rotation_quat_wxyz", "zero quaternion");
  return {Rotation(q(0), q(1), q(2), q(3)),
          Vector<3>(Field(j, "translation_m", "pose"), "pose.translation_m")};
}

Json ToJson(const PnpSolution& s) {
  Json j = ToJson(s.cam_from_robot);
  j["reprojection_rmse_px"] = s.reprojection_rmse;
  j["n_points"] = s.n_points;
  j["frames_used"] = s.frames_used;
  return j;
}

PnpSolution PnpSolutionFromJson(const Json& j) {
  PnpSolution s;
  s.cam_from_robot = TransformFromJson(j);
  s.reprojection_rmse = Number(Field(j, "reprojection_rmse_px", "pose"), "pose.reprojection_rmse_px");
  s.n_points = Integer(Field(j, "n_points", "pose"), "pose.n_points");
  s.frames_used = Integer(Field(j, "frames_used", "pose"), "pose.frames_used");
  return s;
}

Json ToJson(const CameraShellConfig& c) {
  return {{"azimuth_deg", {c.azimuth_min_deg, c.azimuth_max_deg}},
          {"elevation_deg", {c.elevation_min_deg, c.elevation_max_deg}},
          {"distance_m", {c.distance_min_m, c.distance_max_m}},
          {"jitter_half_angle_deg", c.jitter_half_angle_deg}};
}

CameraShellConfig ShellConfigFromJson(const Json& j) {
  if (!j.is_object()) ParseFail("shell", "expected an object");
  CameraShellConfig c;
  auto range = [&](const char* key, double* lo, double* hi) {
    if (!j.contains(key)) return;
    const Eigen::Vector2d v = Vector<2>(j[key], std::string("shell.") + key);
    *lo = v(0);
    *hi = v(1);
  };
  range("azimuth_deg", &c.azimuth_min_deg, &c.azimuth_max_deg);
  range("elevation_deg", &c.elevation_min_deg, &c.elevation_max_deg);
  range("distance_m", &c.distance_min_m, &c.distance_max_m);
  ReadOptional(j, "jitter_half_angle_deg", &c.jitter_half_angle_deg, "shell");
  c.Validate();
  return c;
}

Json ToJson(const NoiseConfig& c) {
  return {{"pixel_sigma", c.pixel_sigma},
          {"dropout_prob", c.dropout_prob},
          {"outlier_prob", c.outlier_prob},
          {"outlier_radius_px", c.outlier_radius_px}};
}

NoiseConfig NoiseConfigFromJson(const Json& j) {
  if (!j.is_object()) ParseFail("noise", "expected an object");
  NoiseConfig c;
  ReadOptional(j, "pixel_sigma", &c.pixel_sigma, "noise");
  ReadOptional(j, "dropout_prob", &c.dropout_prob, "noise");
  ReadOptional(j, "outlier_prob", &c.outlier_prob, "noise");
  ReadOptional(j, "outlier_radius_px", &c.outlier_radius_px, "noise");
  c.Validate();
  return c;
}

Json ToJson(const HandEyeSample& s) {
  return {{"base_from_hand", ToJson(s.base_from_hand)},
          {"cam_from_marker", ToJson(s.cam_from_marker)}};
}

HandEyeSample HandEyeSampleFromJson(const Json& j) {
  return {TransformFromJson(Field(j, "base_from_hand", "sample")),
          TransformFromJson(Field(j, "cam_from_marker", "sample"))};
}

Json HandEyeSamplesToJson(const std::vector<HandEyeSample>& samples) {
  Json a = Json::array();
  for (const HandEyeSample& s : samples) a.push_back(ToJson(s));
  return a;
}

std::vector<HandEyeSample> HandEyeSamplesFromJson(const Json& j) {
  if (!j.is_array()) ParseFail("samples", "expected an array");
  std::vector<HandEyeSample> out;
  for (const Json& s : j) out.push_back(HandEyeSampleFromJson(s));
  return out;
}

Json ToJson(const HandEyeSolution& s) {
  return {{"cam_from_base", ToJson(s.cam_from_base)},
          {"hand_from_marker", ToJson(s.hand_from_marker)},
          {"rotation_residual_rad", s.rotation_residual},
          {"translation_residual_m", s.translation_residual},
          {"method", s.method}};
}

Json ToJson(const MarkerConfig& m) {
  return {{"hand_link", m.hand_link},
          {"hand_from_marker", ToJson(m.hand_from_marker)},
          {"rotation_sigma_rad", m.noise.rotation_sigma_rad},
          {"translation_sigma_m", m.noise.translation_sigma_m}};
}

MarkerConfig MarkerConfigFromJson(const Json& m) {
  MarkerConfig mc;
  mc.hand_link = Integer(Field(m, "hand_link", "marker"), "marker.hand_link");
  mc.hand_from_marker = TransformFromJson(Field(m, "hand_from_marker", "marker"));
  ReadOptional(m, "rotation_sigma_rad", &mc.noise.rotation_sigma_rad, "marker");
  ReadOptional(m, "translation_sigma_m", &mc.noise.translation_sigma_m, "marker");
  return mc;
}

Json ToJson(const FrameRecord& f) {
  Json j;
  j["index"] = f.index;
  j["joint_config"] = f.joint_config.values;
  j["gt_cam_from_base"] = ToJson(f.gt_cam_from_base);
  Json kps = Json::array();
  for (const NamedPoint& p : f.keypoints3d) {
    kps.push_back({{"name", p.name}, {"position", Array(p.position)}});
  }
  j["keypoints3d"] = kps;
  j["gt_pixels"] = PixelsToJson(f.gt_pixels);
  j["detections"] = PixelsToJson(f.detections);
  if (f.belief_maps) j["belief_maps"] = *f.belief_maps;
  if (f.handeye) j["handeye"] = ToJson(*f.handeye);
  return j;
}

FrameRecord FrameRecordFromJson(const Json& j) {
  FrameRecord f;
  const std::string where = "frame";
  if (j.contains("index")) f.index = Integer(j["index"], "frame.index");
  const Json& q = Field(j, "joint_config", where);
  if (!q.is_array()) ParseFail("frame.joint_config", "expected an array");
  for (const Json& v : q) f.joint_config.values.push_back(Number(v, "frame.joint_config"));
  if (j.contains("gt_cam_from_base")) f.gt_cam_from_base = TransformFromJson(j["gt_cam_from_base"]);
  if (j.contains("keypoints3d")) {
    const Json& kps = j["keypoints3d"];
    if (!kps.is_array()) ParseFail("frame.keypoints3d", "expected an array");
    for (const Json& p : kps) {
      f.keypoints3d.push_back({String(Field(p, "name", "frame.keypoints3d"), "frame.keypoints3d.name"),
                               Vector<3>(Field(p, "position", "frame.keypoints3d"),
                                         "frame.keypoints3d.position")});
    }
  }
  if (j.contains("gt_pixels")) f.gt_pixels = PixelsFromJson(j["gt_pixels"], "frame.gt_pixels");
  if (j.contains("detections")) f.detections = PixelsFromJson(j["detections"], "frame.detections");
  if (j.contains("belief_maps")) f.belief_maps = String(j["belief_maps"], "frame.belief_maps");
  if (j.contains("handeye")) f.handeye = HandEyeSampleFromJson(j["handeye"]);
  return f;
}

std::string_view CameraModeName(CameraMode mode) {
  return mode == CameraMode::kStatic ? "static" : "per-frame";
}

CameraMode CameraModeFromName(std::string_view name) {
  if (name == "static") return CameraMode::kStatic;
  if (name == "per-frame") return CameraMode::kPerFrame;
  ParseFail("camera_mode", "expected 'static' or 'per-frame'");
}

Json ToJson(const Dataset& d) {
  const DatasetHeader& h = d.header;
  Json header = {
      {"format", "kpcalib-dataset"},
      {"version", 1},
      {"chain", {{"name", h.chain_name}, {"path", h.chain_path}, {"sha256", h.chain_hash}}},
      {"intrinsics", ToJson(h.intrinsics)},
      {"shell", ToJson(h.shell)},
      {"noise", ToJson(h.noise)},
      {"noise_model", "synthetic detection-space noise standing in for detector error"},
      {"seed", h.seed},
      {"camera_mode", CameraModeName(h.camera_mode)},
      {"min_visible_keypoints", h.min_visible_keypoints},
      {"conventions",
       {{"azimuth", "0 deg along base +x, counter-clockwise about +z"},
        {"elevation", "from base xy-plane"},
        {"aim_point", "chain base origin"},
        {"camera_axes", "x right, y down, z forward"}}},
  };
  if (h.marker) {
    header["marker"] = ToJson(*h.marker);
  }
  Json frames = Json::array();
  for (const FrameRecord& f : d.frames) frames.push_back(ToJson(f));
  return {{"header", header}, {"frames", frames}};
}

Dataset DatasetFromJson(const Json& j) {
  Dataset d;
  const Json& h = Field(j, "header", "dataset");
  if (h.contains("chain")) {
    const Json& c = h["chain"];
    if (c.contains("name")) d.header.chain_name = String(c["name"], "header.chain.name");
    if (c.contains("path")) d.header.chain_path = String(c["path"], "header.chain.path");
    if (c.contains("sha256")) d.header.chain_hash = String(c["sha256"], "header.chain.sha256");
  }
  d.header.intrinsics = IntrinsicsFromJson(Field(h, "intrinsics", "header"));
  if (h.contains("shell")) d.header.shell = ShellConfigFromJson(h["shell"]);
  if (h.contains("noise")) d.header.noise = NoiseConfigFromJson(h["noise"]);
  if (h.contains("seed")) {
    if (!h["seed"].is_number_unsigned()) ParseFail("header.seed", "expected an unsigned integer");
    d.header.seed = h["seed"].get<std::uint64_t>();
  }
  if (h.contains("camera_mode")) {
    d.header.camera_mode = CameraModeFromName(String(h["camera_mode"], "header.camera_mode"));
  }
  if (h.contains("min_visible_keypoints")) {
    d.header.min_visible_keypoints = Integer(h["min_visible_keypoints"], "header.min_visible_keypoints");
  }
  if (h.contains("marker")) {
    d.header.marker = MarkerConfigFromJson(h["marker"]);
  }
  const Json& frames = Field(j, "frames", "dataset");
  if (!frames.is_array()) ParseFail("dataset.frames", "expected an array");
  for (const Json& f : frames) d.frames.push_back(FrameRecordFromJson(f));
  return d;
}

Json ToJson(const Curve& c) {
  return {{"thresholds", c.thresholds},
          {"fractions", c.fractions},
          {"auc", c.auc},
          {"auc_range", {0.0, c.auc_max}},
          {"auc_intervals", c.auc_intervals},
          {"n_samples", c.n_samples}};
}

Json ToJson(const SweepResult& r) {
  Json rows = Json::array();
  for (const SweepRow& row : r.rows) {
    auto num = [](double v) { return std::isnan(v) ? Json(nullptr) : Json(v); };
    rows.push_back({{"m", row.m},
                    {"mean_mm", num(row.mean)},
                    {"median_mm", num(row.median)},
                    {"min_mm", num(row.min)},
                    {"max_mm", num(row.max)},
                    {"n_combinations_total", row.n_combinations_total},
                    {"n_combinations_used", row.n_combinations_used},
                    {"n_failed", row.n_failed}});
  }
  return {{"solver", SweepSolverName(r.solver)},
          {"M", r.big_m},
          {"n_cap", r.n_cap},
          {"seed", r.seed},
          {"rows", rows}};
}

std::string SweepCsv(const SweepResult& r) {
  std::string out = "m,mean,median,min,max,n_combinations_used,n_combinations_total,n_failed\n";
  for (const SweepRow& row : r.rows) {
    out += std::to_string(row.m) + "," + Num(row.mean) + "," + Num(row.median) + "," +
           Num(row.min) + "," + Num(row.max) + "," +
           std::to_string(row.n_combinations_used) + "," +
           std::to_string(row.n_combinations_total) + "," +
           std::to_string(row.n_failed) + "\n";
  }
  return out;
}

std::string CurveCsv(const Curve& c, std::string_view threshold_unit) {
  std::string out = "threshold_" + std::string(threshold_unit) + ",fraction\n";
  for (size_t i = 0; i < c.thresholds.size(); ++i) {
    out += Num(c.thresholds[i]) + "," + Num(c.fractions[i]) + "\n";
  }
  return out;
}

Json ToJson(const WorkspaceStats& s) {
  return {{"method", s.method},
          {"min_mm", s.min_mm},
          {"max_mm", s.max_mm},
          {"mean_mm", s.mean_mm},
          {"std_mm", s.std_mm}};
}

std::vector<std::string> SchemaNames() {
  return {"intrinsics", "chain", "pose", "handeye-samples", "dataset",
          "shell-config", "noise-config", "bmap-sidecar"};
}

Json Schema(std::string_view name) {
  const Json number = {{"type", "number"}};
  const Json integer = {{"type", "integer"}};
  const Json str = {{"type", "string"}};
  auto vec = [&](int n) {
    return Json{{"type", "array"}, {"items", number}, {"minItems", n}, {"maxItems", n}};
  };
  const Json pose = {
      {"type", "object"},
      {"required", {"rotation_quat_wxyz", "translation_m"}},
      {"properties",
       {{"rotation_quat_wxyz", vec(4)},
        {"translation_m", vec(3)},
        {"reprojection_rmse_px", number},
        {"n_points", integer},
        {"frames_used", integer}}}};
  const Json named_pixel = {{"type", "object"},
                            {"required", {"name", "pixel"}},
                            {"properties", {{"name", str}, {"pixel", vec(2)}}}};
  const std::string base = "https://kpcalib.invalid/schema/";
  Json s;
  if (name == "intrinsics") {
    s = {{"type", "object"},
         {"required", {"fx", "fy", "cx", "cy", "width", "height"}},
         {"properties",
          {{"fx", number}, {"fy", number}, {"cx", number}, {"cy", number},
           {"width", integer}, {"height", integer}}}};
  } else if (name == "chain") {
    s = {{"type", "object"},
         {"required", {"joints", "keypoints"}},
         {"properties",
          {{"name", str},
           {"joints",
            {{"type", "array"},
             {"items",
              {{"type", "object"},
               {"required", {"name", "kind"}},
               {"properties",
                {{"name", str},
                 {"kind", {{"enum", {"revolute", "prismatic", "fixed"}}}},
                 {"origin",
                  {{"type", "object"},
                   {"properties", {{"xyz", vec(3)}, {"rpy", vec(3)}}}}},
                 {"axis", vec(3)},
                 {"limits", vec(2)}}}}}}},
           {"keypoints",
            {{"type", "array"},
             {"items",
              {{"type", "object"},
               {"required", {"name", "link"}},
               {"properties", {{"name", str}, {"link", integer}, {"offset", vec(3)}}}}}}}}}};
  } else if (name == "pose") {
    s = pose;
  } else if (name == "handeye-samples") {
    s = {{"type", "array"},
         {"items",
          {{"type", "object"},
           {"required", {"base_from_hand", "cam_from_marker"}},
           {"properties", {{"base_from_hand", pose}, {"cam_from_marker", pose}}}}}};
  } else if (name == "dataset") {
    s = {{"type", "object"},
         {"required", {"header", "frames"}},
         {"properties",
          {{"header",
            {{"type", "object"},
             {"required", {"intrinsics"}},
             {"properties",
              {{"chain", {{"type", "object"}}},
               {"intrinsics", {{"$ref", base + "intrinsics"}}},
               {"shell", {{"$ref", base + "shell-config"}}},
               {"noise", {{"$ref", base + "noise-config"}}},
               {"seed", integer},
               {"camera_mode", {{"enum", {"static", "per-frame"}}}},
               {"min_visible_keypoints", integer},
               {"marker", {{"type", "object"}}}}}}},
           {"frames",
            {{"type", "array"},
             {"items",
              {{"type", "object"},
               {"required", {"joint_config"}},
               {"properties",
                {{"index", integer},
                 {"joint_config", {{"type", "array"}, {"items", number}}},
                 {"gt_cam_from_base", pose},
                 {"keypoints3d",
                  {{"type", "array"},
                   {"items",
                    {{"type", "object"},
                     {"properties", {{"name", str}, {"position", vec(3)}}}}}}},
                 {"gt_pixels", {{"type", "array"}, {"items", named_pixel}}},
                 {"detections", {{"type", "array"}, {"items", named_pixel}}},
                 {"belief_maps", str},
                 {"handeye",
                  {{"type", "object"},
                   {"properties", {{"base_from_hand", pose}, {"cam_from_marker", pose}}}}}}}}}}}}}};
  } else if (name == "shell-config") {
    s = {{"type", "object"},
         {"properties",
          {{"azimuth_deg", vec(2)},
           {"elevation_deg", vec(2)},
           {"distance_m", vec(2)},
           {"jitter_half_angle_deg", number}}}};
  } else if (name == "noise-config") {
    s = {{"type", "object"},
         {"properties",
          {{"pixel_sigma", number},
           {"dropout_prob", number},
           {"outlier_prob", number},
           {"outlier_radius_px", number}}}};
  } else if (name == "bmap-sidecar") {
    s = {{"type", "object"},
         {"required", {"names", "scale"}},
         {"properties",
          {{"version", integer},
           {"names", {{"type", "array"}, {"items", str}}},
           {"scale", {{"enum", {1.0, 0.5, 0.25}}}}}}};
  } else {
    throw Error(ErrorKind::kValidationError, "unknown schema '" + std::string(name) + "'");
  }
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["$id"] = base + std::string(name);
  return s;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::kIoError, "write failed for " + path);
}

Json ReadJsonFile(const std::string& path) {
  const std::string text = ReadTextFile(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kParseError, path + ": " + e.what());
  }
}

void WriteJsonFile(const std::string& path, const Json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIoError, "SHA-256 computation failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace kpcalib
