#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kpcalib/geometry.hpp"

namespace kpcalib {

// Belief maps use the sample-grid convention: map cell (x, y) is the
// continuous map coordinate (x, y), and full-resolution pixel p corresponds
// to map coordinate scale * p. Renderer and extractor both follow it.
class BeliefMap {
 public:
  BeliefMap() = default;
  // Zero-filled map.
  BeliefMap(int width, int height, double scale);
  BeliefMap(int width, int height, double scale, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  double scale() const { return scale_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double at(int x, int y) const { return values_[Index(x, y)]; }
  double& at(int x, int y) { return values_[Index(x, y)]; }

 private:
  size_t Index(int x, int y) const {
    return static_cast<size_t>(y) * static_cast<size_t>(width_) +
           static_cast<size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  double scale_ = 1.0;
  std::vector<double> values_;
};

struct BeliefMapStack {
  std::vector<std::string> names;
  std::vector<BeliefMap> maps;
  double scale = 1.0;

  // Throws kValidationError if names/maps disagree in count or maps differ in
  // dimensions or scale.
  void Validate() const;
};

struct KeypointDetection {
  std::string name;
  Vec2 pixel;  // full image resolution
  double confidence = 0.0;
};

struct PeakExtractConfig {
  double peak_threshold = 0.03;
  double smooth_sigma = 1.0;  // map pixels
  int window_radius = 5;      // map pixels, Chebyshev

  void Validate() const;
};

// Only 1, 1/2 and 1/4 are supported output resolutions.
bool IsSupportedScale(double scale);

// Map dimensions for a full-resolution image at `scale`. Throws
// kValidationError if the scaled size is not integral.
std::pair<int, int> MapDimensions(int image_width, int image_height,
                                  double scale);

// Ground-truth Gaussian belief map for a keypoint at full-resolution `pixel`.
// `sigma` is in full-resolution pixels.
BeliefMap RenderGroundTruth(int image_width, int image_height, double scale,
                            const Vec2& pixel, double sigma);

// Separable Gaussian blur, kernel truncated at ceil(3 sigma) and renormalized
// over the in-bounds taps. sigma == 0 returns the input unchanged.
BeliefMap Smooth(const BeliefMap& map, double sigma);

// Global-maximum subpixel peak. Returns nullopt when the smoothed maximum is
// below the threshold.
std::optional<KeypointDetection> ExtractPeak(const BeliefMap& map,
                                             const PeakExtractConfig& cfg,
                                             const std::string& name = {});

std::vector<std::optional<KeypointDetection>> ExtractAll(
    const BeliefMapStack& stack, const PeakExtractConfig& cfg);

// BMAP binary stack: "BMAP", u16 version (1), u16 n, u16 height, u16 width,
// then n*height*width little-endian f32, keypoint-major then row-major.
// Names and scale live in a JSON sidecar next to the binary file.
inline constexpr std::uint16_t kBmapVersion = 1;

std::vector<std::uint8_t> EncodeBmap(const BeliefMapStack& stack);
// Names are filled with empty strings and scale is left at 1; callers merge
// in the sidecar.
BeliefMapStack DecodeBmap(const std::vector<std::uint8_t>& bytes);

// Writes `path` and `path + ".json"`.
void WriteBeliefMapStack(const std::string& path, const BeliefMapStack& stack);
BeliefMapStack ReadBeliefMapStack(const std::string& path);

}  // namespace kpcalib
