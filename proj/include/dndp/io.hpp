#pragma once

#include "dndp/eps_net.hpp"
#include "dndp/image.hpp"
#include "dndp/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace dndp::io {

/// Dataset file: "DNDPDSET" magic, u32 version, u32 count, u32 width,
/// u32 height, then count*width*height little-endian float32 pixels, each
/// image row-major.
void write_dataset(const std::filesystem::path& path, std::span<const Image> images);
std::vector<Image> read_dataset(const std::filesystem::path& path);

/// Lossless single-image sidecar (a one-image dataset file).
void write_raw(const std::filesystem::path& path, const Image& img);
Image read_raw(const std::filesystem::path& path);

/// 16-bit grayscale PNG; intensities mapped linearly from the window to [0, 65535].
void write_png16(const std::filesystem::path& path, const Image& img, const MetricWindow& w = {});

enum class CheckpointKind : std::uint32_t { unconditional = 0, conditional = 1 };

/// Checkpoint file: "DNDPCKPT" magic, u32 version, u32 kind, u32 steps,
/// u32 width, u32 layer count, per layer (u32 in, u32 out, u32 dilation),
/// u64 parameter count, then float32 parameters (little-endian).
void save_checkpoint(const std::filesystem::path& path, const EpsNet<float>& net);

/// Throws when the stored kind differs from `expected`.
EpsNet<float> load_checkpoint(const std::filesystem::path& path, CheckpointKind expected);

/// CSV writer whose first line is "# dndp-csv v1 <kind>".
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& kind,
            const std::vector<std::string>& columns);

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << format(fields), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string format(const std::string& s) { return s; }
  static std::string format(const char* s) { return s; }
  static std::string format(double v);
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::string format(Int v) {
    return std::to_string(v);
  }

  std::ofstream out_;
};

/// Parsed CSV: header names and rows of string cells. Comment lines skipped.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace dndp::io
