#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kpcalib::cli {

struct CalibrateArgs {
  std::string chain;
  std::string intrinsics;
  std::string frames;
  std::string belief_maps;  // directory, optional
  bool multiframe = false;
  bool refine = true;
  bool confidence_weighting = false;
  bool robust = false;
  double peak_threshold = 0.03;
  std::string out;
};

struct ExtractArgs {
  std::string input;  // BMAP file
  double peak_threshold = 0.03;
  double smooth_sigma = 1.0;
  int window_radius = 5;
  std::string out;
};

struct EvaluateArgs {
  std::string chain;
  std::string intrinsics;
  std::string dataset;
  std::string pose;
  std::string per_frame_poses;
  std::string report;
  std::string csv;  // prefix, optional
};

struct SweepArgs {
  std::string dataset;
  std::string solver = "dream";
  std::string m_range = "1,3,6,9,12,18";
  int big_m = 0;  // 0: all frames
  std::size_t n_cap = 2500;
  std::uint64_t seed = 0;
  bool refine = true;
  bool all_pairs = false;
  std::string out;
};

struct HandEyeArgs {
  std::string samples;
  bool all_pairs = false;
  std::string out;
};

struct SynthArgs {
  std::string chain;
  std::string intrinsics;
  std::string shell_config;
  std::string noise_config;
  std::string marker_config;
  int frames = 1;
  std::string camera_mode = "static";
  std::uint64_t seed = 0;
  int min_visible = 4;
  bool emit_belief_maps = false;
  double belief_scale = 1.0;
  std::string out;  // directory
};

struct CompareArgs {
  std::string dataset;
  std::string hec_samples;
  std::string m_range;  // optional sweep
  std::size_t n_cap = 2500;
  std::uint64_t seed = 0;
  std::string out;
};

// Each returns the process exit code; library errors propagate as exceptions.
int RunCalibrate(const CalibrateArgs& a, int threads);
int RunExtract(const ExtractArgs& a);
int RunEvaluate(const EvaluateArgs& a);
int RunSweep(const SweepArgs& a, int threads);
int RunHandEye(const HandEyeArgs& a);
int RunSynth(const SynthArgs& a, int threads);
int RunCompare(const CompareArgs& a, int threads);
int RunSchema(const std::string& name);

// "1,3,6" or "1..18" (inclusive), or a mix: "1,3..5".
std::vector<int> ParseMRange(const std::string& text);

}  // namespace kpcalib::cli
