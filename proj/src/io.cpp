#include "dndp/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace dndp::io {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::array<char, 8> kDatasetMagic{'D', 'N', 'D', 'P', 'D', 'S', 'E', 'T'};
constexpr std::array<char, 8> kCheckpointMagic{'D', 'N', 'D', 'P', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path.string() + ": truncated file");
  return v;
}

void expect_magic(std::istream& in, const std::array<char, 8>& magic,
                  const std::filesystem::path& path) {
  std::array<char, 8> got{};
  in.read(got.data(), got.size());
  if (!in || got != magic) throw std::runtime_error(path.string() + ": bad magic");
}

void write_floats(std::ostream& out, const double* data, std::size_t n) {
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace

void write_dataset(const std::filesystem::path& path, std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("write_dataset: no images");
  const Eigen::Index rows = images.front().rows();
  const Eigen::Index cols = images.front().cols();
  auto out = open_out(path);
  out.write(kDatasetMagic.data(), kDatasetMagic.size());
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(images.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
  for (const Image& img : images) {
    if (img.rows() != rows || img.cols() != cols) {
      throw std::invalid_argument("write_dataset: images must share one shape");
    }
    write_floats(out, img.data(), static_cast<std::size_t>(img.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Image> read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_magic(in, kDatasetMagic, path);
  if (get<std::uint32_t>(in, path) != kDatasetVersion) {
    throw std::runtime_error(path.string() + ": unsupported dataset version");
  }
  const auto count = get<std::uint32_t>(in, path);
  const auto width = get<std::uint32_t>(in, path);
  const auto height = get<std::uint32_t>(in, path);
  std::vector<Image> images;
  images.reserve(count);
  std::vector<float> buf(static_cast<std::size_t>(width) * height);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
    Image img(height, width);
    for (std::size_t p = 0; p < buf.size(); ++p) img.data()[p] = buf[p];
    images.push_back(std::move(img));
  }
  return images;
}

void write_raw(const std::filesystem::path& path, const Image& img) {
  write_dataset(path, std::span<const Image>(&img, 1));
}

Image read_raw(const std::filesystem::path& path) {
  auto images = read_dataset(path);
  if (images.size() != 1) throw std::runtime_error(path.string() + ": expected one image");
  return std::move(images.front());
}

void write_png16(const std::filesystem::path& path, const Image& img, const MetricWindow& w) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  // Rows are big-endian 16-bit samples as PNG requires.
  const auto width = static_cast<std::size_t>(img.cols());
  std::vector<png_byte> rows(static_cast<std::size_t>(img.rows()) * width * 2);
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const double v = std::clamp((img(r, c) - w.lo) / (w.hi - w.lo), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      const std::size_t at = (static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)) * 2;
      rows[at] = static_cast<png_byte>(q >> 8);
      rows[at + 1] = static_cast<png_byte>(q & 0xff);
    }
  }
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.rows()));
  for (std::size_t r = 0; r < row_ptrs.size(); ++r) row_ptrs[r] = rows.data() + r * width * 2;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols()), static_cast<png_uint_32>(img.rows()),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_checkpoint(const std::filesystem::path& path, const EpsNet<float>& net) {
  auto out = open_out(path);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.conditional() ? CheckpointKind::conditional
                                                                       : CheckpointKind::unconditional));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.steps()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.dilation));
  }
  const auto& p = net.params();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.size()));
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EpsNet<float> load_checkpoint(const std::filesystem::path& path, CheckpointKind expected) {
  auto in = open_in(path);
  expect_magic(in, kCheckpointMagic, path);
  if (get<std::uint32_t>(in, path) != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  }
  const auto kind = static_cast<CheckpointKind>(get<std::uint32_t>(in, path));
  if (kind != expected) {
    throw std::runtime_error(path.string() + ": checkpoint is " +
                             (kind == CheckpointKind::conditional ? "conditional" : "unconditional") +
                             ", expected " +
                             (expected == CheckpointKind::conditional ? "conditional" : "unconditional"));
  }
  const auto steps = static_cast<int>(get<std::uint32_t>(in, path));
  const auto width = static_cast<int>(get<std::uint32_t>(in, path));
  const auto n_layers = get<std::uint32_t>(in, path);
  std::vector<int> dilations;
  std::vector<std::array<std::uint32_t, 3>> shapes;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto lin = get<std::uint32_t>(in, path);
    const auto lout = get<std::uint32_t>(in, path);
    const auto dil = get<std::uint32_t>(in, path);
    shapes.push_back({lin, lout, dil});
    dilations.push_back(static_cast<int>(dil));
  }
  const int channels = kind == CheckpointKind::conditional ? 2 : 1;
  EpsNet<float> net(channels, width, dilations, steps);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& l = net.layers()[i];
    if (static_cast<std::uint32_t>(l.in) != shapes[i][0] || static_cast<std::uint32_t>(l.out) != shapes[i][1]) {
      throw std::runtime_error(path.string() + ": layer shape mismatch");
    }
  }
  const auto count = get<std::uint64_t>(in, path);
  if (count != static_cast<std::uint64_t>(net.params().size())) {
    throw std::runtime_error(path.string() + ": parameter count mismatch");
  }
  in.read(reinterpret_cast<char*>(net.params().data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error(path.string() + ": truncated parameters");
  if (!net.params().allFinite()) throw std::runtime_error(path.string() + ": non-finite parameters");
  return net;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::string>& columns) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out_ << "# dndp-csv v1 " << kind << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

std::string CsvWriter::format(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::out_of_range("csv: no column " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header) {
      table.columns = std::move(cells);
      header = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace dndp::io
