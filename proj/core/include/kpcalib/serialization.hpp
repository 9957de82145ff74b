#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "kpcalib/geometry.hpp"
#include "kpcalib/handeye.hpp"
#include "kpcalib/metrics.hpp"
#include "kpcalib/pnp.hpp"
#include "kpcalib/synth.hpp"

// JSON and CSV forms of every on-disk format. Readers translate malformed
// input into Error(kParseError) naming the offending field.
namespace kpcalib {

using Json = nlohmann::json;

Json ToJson(const CameraIntrinsics& k);
CameraIntrinsics IntrinsicsFromJson(const Json& j);

// {"rotation_quat_wxyz":[4],"translation_m":[3]}
Json ToJson(const Transform& t);
Transform TransformFromJson(const Json& j);

// Pose schema plus reprojection_rmse_px, n_points and frames_used.
Json ToJson(const PnpSolution& s);
PnpSolution PnpSolutionFromJson(const Json& j);

// Missing fields keep their defaults.
Json ToJson(const CameraShellConfig& c);
CameraShellConfig ShellConfigFromJson(const Json& j);
Json ToJson(const NoiseConfig& c);
NoiseConfig NoiseConfigFromJson(const Json& j);

Json ToJson(const HandEyeSample& s);
HandEyeSample HandEyeSampleFromJson(const Json& j);
Json HandEyeSamplesToJson(const std::vector<HandEyeSample>& samples);
std::vector<HandEyeSample> HandEyeSamplesFromJson(const Json& j);
Json ToJson(const HandEyeSolution& s);

// hand_link, hand_from_marker and the two noise sigmas.
Json ToJson(const MarkerConfig& m);
MarkerConfig MarkerConfigFromJson(const Json& j);

Json ToJson(const FrameRecord& f);
FrameRecord FrameRecordFromJson(const Json& j);
Json ToJson(const Dataset& d);
Dataset DatasetFromJson(const Json& j);

Json ToJson(const Curve& c);
Json ToJson(const SweepResult& r);
// Columns: m,mean,median,min,max (mm), followed by bookkeeping columns.
std::string SweepCsv(const SweepResult& r);
std::string CurveCsv(const Curve& c, std::string_view threshold_unit);
Json ToJson(const WorkspaceStats& s);

std::string_view CameraModeName(CameraMode mode);
CameraMode CameraModeFromName(std::string_view name);

// JSON Schema documents for the external formats, keyed by format name.
std::vector<std::string> SchemaNames();
Json Schema(std::string_view name);

// File helpers. Throw kIoError / kParseError.
std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, std::string_view contents);
Json ReadJsonFile(const std::string& path);
void WriteJsonFile(const std::string& path, const Json& j);

// Hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);

}  // namespace kpcalib
