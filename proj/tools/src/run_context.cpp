#include "run_context.hpp"

#include <chrono>
#include <ctime>

namespace kpcalib::cli {

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParseError:
    case ErrorKind::kIoError:
    case ErrorKind::kValidationError:
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kMissingLimits:
      return 1;
    case ErrorKind::kInsufficientPoints:
    case ErrorKind::kDegenerateConfiguration:
    case ErrorKind::kAllPointsBehindCamera:
    case ErrorKind::kInsufficientMotion:
    case ErrorKind::kSolverUnavailableForM:
    case ErrorKind::kBehindCamera:
    case ErrorKind::kAngleNearPi:
      return 2;
    case ErrorKind::kEmptyEvaluation:
      return 3;
  }
  return 1;
}

std::string ErrorJson(std::string_view kind, std::string_view message, int exit_code) {
  const Json j = {{"error",
                   {{"kind", std::string(kind)},
                    {"message", std::string(message)},
                    {"exit_code", exit_code}}}};
  return j.dump();
}

std::string UtcTimestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunContext::RunContext(std::string command)
    : command_(std::move(command)), started_at_(UtcTimestamp()) {}

std::string RunContext::ReadInput(const std::string& path) {
  std::string text = ReadTextFile(path);
  inputs_.push_back({{"path", path}, {"sha256", Sha256Hex(text)}});
  return text;
}

Json RunContext::ReadJsonInput(const std::string& path) {
  const std::string text = ReadInput(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kParseError, path + ": " + e.what());
  }
}

void RunContext::RecordInput(const std::string& path) {
  ReadInput(path);
}

void RunContext::WriteManifest(const std::string& output) const {
  Json m;
  m["command"] = command_;
  m["config"] = config_;
  m["inputs"] = inputs_;
  m["tool_version"] = KPCALIB_VERSION;
  m["seed"] = seed_ ? Json(*seed_) : Json(nullptr);
  m["started_at"] = started_at_;
  m["finished_at"] = UtcTimestamp();
  WriteJsonFile(output + ".manifest.json", m);
}

}  // namespace kpcalib::cli
