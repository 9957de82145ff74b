#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kpcalib/error.hpp"
#include "kpcalib/serialization.hpp"

namespace kpcalib::cli {

// 0 success, 1 I/O or parse, 2 solver precondition, 3 empty evaluation.
int ExitCodeFor(ErrorKind kind);

// {"error": {"kind", "message", "exit_code"}} on one line.
std::string ErrorJson(std::string_view kind, std::string_view message, int exit_code);

// Collects what a command read and how it was configured, then writes the
// manifest next to the command's primary output.
class RunContext {
 public:
  explicit RunContext(std::string command);

  // Reads a file and records its hash.
  std::string ReadInput(const std::string& path);
  Json ReadJsonInput(const std::string& path);
  // Hash an input read through another path (binary files).
  void RecordInput(const std::string& path);

  Json& config() { return config_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  // Writes <output>.manifest.json.
  void WriteManifest(const std::string& output) const;

 private:
  std::string command_;
  Json config_ = Json::object();
  Json inputs_ = Json::array();
  std::optional<std::uint64_t> seed_;
  std::string started_at_;
};

std::string UtcTimestamp();

}  // namespace kpcalib::cli
