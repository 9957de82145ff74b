#include "kpcalib/beliefmap.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "kpcalib/error.hpp"

namespace kpcalib {

BeliefMap::BeliefMap(int width, int height, double scale)
    : width_(width),
      height_(height),
      scale_(scale),
      values_(static_cast<size_t>(width) * static_cast<size_t>(height), 0.0) {}

BeliefMap::BeliefMap(int width, int height, double scale,
                     std::vector<double> values)
    : width_(width), height_(height), scale_(scale), values_(std::move(values)) {
  if (values_.size() != static_cast<size_t>(width) * static_cast<size_t>(height)) {
    throw Error(ErrorKind::kDimensionMismatch,
                "belief map value count does not match width*height");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kValidationError, "belief map values must be finite");
    }
  }
}

void BeliefMapStack::Validate() const {
  if (names.size() != maps.size()) {
    throw Error(ErrorKind::kValidationError,
                "belief map stack: name count differs from map count");
  }
  for (const BeliefMap& m : maps) {
    if (m.width() != maps.front().width() || m.height() != maps.front().height() ||
        m.scale() != scale) {
      throw Error(ErrorKind::kValidationError,
                  "belief map stack: maps must share dimensions and scale");
    }
  }
}

void PeakExtractConfig::Validate() const {
  if (!(peak_threshold > 0.0) || !(smooth_sigma >= 0.0) || window_radius < 1) {
    throw Error(ErrorKind::kValidationError, "invalid peak extraction config");
  }
}

bool IsSupportedScale(double scale) {
  return scale == 1.0 || scale == 0.5 || scale == 0.25;
}

std::pair<int, int> MapDimensions(int image_width, int image_height,
                                  double scale) {
  if (!IsSupportedScale(scale)) {
    throw Error(ErrorKind::kValidationError,
                "belief map scale must be 1, 1/2 or 1/4");
  }
  const double w = image_width * scale;
  const double h = image_height * scale;
  if (w != std::floor(w) || h != std::floor(h) || w < 1 || h < 1) {
    throw Error(ErrorKind::kValidationError,
                "image size is not divisible by the belief map scale");
  }
  return {static_cast<int>(w), static_cast<int>(h)};
}

BeliefMap RenderGroundTruth(int image_width, int image_height, double scale,
                            const Vec2& pixel, double sigma) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorKind::kValidationError, "render sigma must be > 0");
  }
  const auto [w, h] = MapDimensions(image_width, image_height, scale);
  BeliefMap map(w, h, scale);
  const Vec2 center = scale * pixel;
  const double s = scale * sigma;
  const double inv_two_var = 1.0 / (2.0 * s * s);
  for (int y = 0; y < h; ++y) {
    const double dy = y - center.y();
    for (int x = 0; x < w; ++x) {
      const double dx = x - center.x();
      map.at(x, y) = std::exp(-(dx * dx + dy * dy) * inv_two_var);
    }
  }
  return map;
}

BeliefMap Smooth(const BeliefMap& map, double sigma) {
  if (sigma == 0.0) return map;
  if (!(sigma > 0.0)) {
    throw Error(ErrorKind::kValidationError, "smoothing sigma must be >= 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  }

  const int w = map.width();
  const int h = map.height();
  BeliefMap tmp(w, h, map.scale());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int i = std::max(-radius, -x); i <= std::min(radius, w - 1 - x); ++i) {
        acc += kernel[i + radius] * map.at(x + i, y);
        norm += kernel[i + radius];
      }
      tmp.at(x, y) = acc / norm;
    }
  }
  BeliefMap out(w, h, map.scale());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int i = std::max(-radius, -y); i <= std::min(radius, h - 1 - y); ++i) {
        acc += kernel[i + radius] * tmp.at(x, y + i);
        norm += kernel[i + radius];
      }
      out.at(x, y) = acc / norm;
    }
  }
  return out;
}

std::optional<KeypointDetection> ExtractPeak(const BeliefMap& map,
                                             const PeakExtractConfig& cfg,
                                             const std::string& name) {
  cfg.Validate();
  if (map.values().empty()) return std::nullopt;
  const BeliefMap smoothed = Smooth(map, cfg.smooth_sigma);

  int peak_x = 0;
  int peak_y = 0;
  double peak = smoothed.at(0, 0);
  for (int y = 0; y < smoothed.height(); ++y) {
    for (int x = 0; x < smoothed.width(); ++x) {
      if (smoothed.at(x, y) > peak) {
        peak = smoothed.at(x, y);
        peak_x = x;
        peak_y = y;
      }
    }
  }
  if (peak < cfg.peak_threshold) return std::nullopt;

  const int r = cfg.window_radius;
  double sum_w = 0.0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (int y = std::max(0, peak_y - r); y <= std::min(smoothed.height() - 1, peak_y + r); ++y) {
    for (int x = std::max(0, peak_x - r); x <= std::min(smoothed.width() - 1, peak_x + r); ++x) {
      const double v = smoothed.at(x, y);
      if (v < cfg.peak_threshold) continue;
      sum_w += v;
      sum_x += v * x;
      sum_y += v * y;
    }
  }
  const Vec2 map_coord(sum_x / sum_w, sum_y / sum_w);
  return KeypointDetection{name, map_coord / map.scale(), peak};
}

std::vector<std::optional<KeypointDetection>> ExtractAll(
    const BeliefMapStack& stack, const PeakExtractConfig& cfg) {
  stack.Validate();
  std::vector<std::optional<KeypointDetection>> out;
  out.reserve(stack.maps.size());
  for (size_t i = 0; i < stack.maps.size(); ++i) {
    out.push_back(ExtractPeak(stack.maps[i], cfg, stack.names[i]));
  }
  return out;
}

namespace {

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t GetU16(const std::vector<std::uint8_t>& in, size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

std::uint16_t CheckedU16(int v, const char* what) {
  if (v < 0 || v > 0xffff) {
    throw Error(ErrorKind::kValidationError,
                std::string("BMAP ") + what + " does not fit in u16");
  }
  return static_cast<std::uint16_t>(v);
}

}  // namespace

std::vector<std::uint8_t> EncodeBmap(const BeliefMapStack& stack) {
  stack.Validate();
  const int n = static_cast<int>(stack.maps.size());
  const int h = n ? stack.maps.front().height() : 0;
  const int w = n ? stack.maps.front().width() : 0;
  std::vector<std::uint8_t> out = {'B', 'M', 'A', 'P'};
  out.reserve(12 + static_cast<size_t>(n) * h * w * 4);
  PutU16(out, kBmapVersion);
  PutU16(out, CheckedU16(n, "count"));
  PutU16(out, CheckedU16(h, "height"));
  PutU16(out, CheckedU16(w, "width"));
  for (const BeliefMap& m : stack.maps) {
    for (double v : m.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
      }
    }
  }
  return out;
}

BeliefMapStack DecodeBmap(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || bytes[0] != 'B' || bytes[1] != 'M' ||
      bytes[2] != 'A' || bytes[3] != 'P') {
    throw Error(ErrorKind::kParseError, "BMAP: bad magic");
  }
  const std::uint16_t version = GetU16(bytes, 4);
  if (version != kBmapVersion) {
    throw Error(ErrorKind::kParseError,
                "BMAP: unsupported version " + std::to_string(version));
  }
  const size_t n = GetU16(bytes, 6);
  const int h = GetU16(bytes, 8);
  const int w = GetU16(bytes, 10);
  const size_t cells = static_cast<size_t>(h) * static_cast<size_t>(w);
  if (bytes.size() != 12 + n * cells * 4) {
    throw Error(ErrorKind::kParseError, "BMAP: payload size mismatch");
  }
  BeliefMapStack stack;
  size_t at = 12;
  for (size_t k = 0; k < n; ++k) {
    std::vector<double> values(cells);
    for (size_t c = 0; c < cells; ++c, at += 4) {
      const std::uint32_t bits = static_cast<std::uint32_t>(bytes[at]) |
                                 (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
      values[c] = std::bit_cast<float>(bits);
    }
    stack.maps.emplace_back(w, h, 1.0, std::move(values));
    stack.names.emplace_back();
  }
  return stack;
}

void WriteBeliefMapStack(const std::string& path, const BeliefMapStack& stack) {
  const std::vector<std::uint8_t> bytes = EncodeBmap(stack);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));

  nlohmann::json sidecar = {{"version", kBmapVersion},
                            {"names", stack.names},
                            {"scale", stack.scale}};
  std::ofstream side(path + ".json");
  if (!side) throw Error(ErrorKind::kIoError, "cannot write " + path + ".json");
  side << sidecar.dump(2) << "\n";
}

BeliefMapStack ReadBeliefMapStack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  BeliefMapStack stack = DecodeBmap(bytes);

  std::ifstream side(path + ".json");
  if (!side) throw Error(ErrorKind::kIoError, "cannot open " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, path + ".json: " + e.what());
  }
  if (!meta.contains("names") || !meta["names"].is_array() ||
      meta["names"].size() != stack.maps.size()) {
    throw Error(ErrorKind::kParseError,
                path + ".json: 'names' must list one name per map");
  }
  if (!meta.contains("scale") || !meta["scale"].is_number()) {
    throw Error(ErrorKind::kParseError, path + ".json: missing 'scale'");
  }
  stack.scale = meta["scale"].get<double>();
  if (!IsSupportedScale(stack.scale)) {
    throw Error(ErrorKind::kValidationError, path + ".json: unsupported scale");
  }
  for (size_t i = 0; i < stack.maps.size(); ++i) {
    stack.names[i] = meta["names"][i].get<std::string>();
    stack.maps[i] = BeliefMap(stack.maps[i].width(), stack.maps[i].height(),
                              stack.scale, std::move(stack.maps[i].values()));
  }
  return stack;
}

}  // namespace kpcalib
