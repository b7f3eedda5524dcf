#include "dndp/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <png.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace dndp;
using dndp::testing::uniform_image;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dndp_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dataset round trip is exact at float precision") {
  std::vector<Image> imgs{uniform_image(1, 5, 7), uniform_image(2, 5, 7)};
  const auto path = scratch("a.dset");
  io::write_dataset(path, imgs);
  const auto back = io::read_dataset(path);
  REQUIRE(back.size() == 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].rows() == 5);
    CHECK(back[i].cols() == 7);
    CHECK((back[i] == imgs[i].cast<float>().cast<double>()).all());
  }
  CHECK(fs::file_size(path) == 8u + 4 * 4 + 2 * 35 * 4);

  // Writing twice gives identical bytes.
  const auto again = scratch("b.dset");
  io::write_dataset(again, imgs);
  CHECK(bytes(path) == bytes(again));

  const auto raw = scratch("one.raw");
  io::write_raw(raw, imgs[0]);
  CHECK((io::read_raw(raw) == back[0]).all());
  CHECK_THROWS_AS(io::read_raw(path), std::runtime_error);
}

TEST_CASE("dataset errors") {
  CHECK_THROWS_AS(io::read_dataset(scratch("missing.dset")), std::runtime_error);
  const auto bad = scratch("bad.dset");
  std::ofstream(bad) << "NOTADATASET";
  CHECK_THROWS_AS(io::read_dataset(bad), std::runtime_error);

  std::vector<Image> imgs{uniform_image(1, 4, 4), uniform_image(2, 4, 4)};
  const auto path = scratch("trunc.dset");
  io::write_dataset(path, imgs);
  fs::resize_file(path, fs::file_size(path) - 3);
  CHECK_THROWS_AS(io::read_dataset(path), std::runtime_error);

  std::vector<Image> mixed{uniform_image(1, 4, 4), uniform_image(2, 4, 5)};
  CHECK_THROWS_AS(io::write_dataset(scratch("mixed.dset"), mixed), std::invalid_argument);
}

TEST_CASE("checkpoint round trip keeps predictions and kind") {
  const auto s = linear_beta_schedule(30, 1e-3, 0.2);
  EpsNet<float> net(2, 6, {1, 2, 1}, 30);
  net.initialize(4);
  const auto path = scratch("c.ckpt");
  io::save_checkpoint(path, net);
  const auto back = io::load_checkpoint(path, io::CheckpointKind::conditional);
  CHECK(back.params() == net.params());
  CHECK(back.dilations() == net.dilations());
  CHECK(back.steps() == 30);

  const NetMeanPredictor a(s, net);
  const NetMeanPredictor b(s, back);
  const Image x = uniform_image(3, 8, 8);
  const Image c = uniform_image(4, 4, 4);
  CHECK((a.predict_mu(x, 5, &c) == b.predict_mu(x, 5, &c)).all());

  CHECK_THROWS_AS(io::load_checkpoint(path, io::CheckpointKind::unconditional), std::runtime_error);
  fs::resize_file(path, fs::file_size(path) - 4);
  CHECK_THROWS_AS(io::load_checkpoint(path, io::CheckpointKind::conditional), std::runtime_error);
}

TEST_CASE("16-bit png") {
  Image img(2, 3);
  img << 0.0, 0.5, 1.0, -0.2, 1.3, 0.25;
  const auto path = scratch("p.png");
  io::write_png16(path, img);

  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_file(&png, path.c_str()) != 0);
  CHECK(png.width == 3u);
  CHECK(png.height == 2u);
  png.format = PNG_FORMAT_LINEAR_Y;
  std::vector<png_uint_16> px(PNG_IMAGE_SIZE(png) / 2);
  REQUIRE(png_image_finish_read(&png, nullptr, px.data(), 0, nullptr) != 0);
  // Linear reads report the stored 16-bit values for a file without gamma.
  CHECK(px[0] == 0);
  CHECK(px[2] == 65535);
  CHECK(px[3] == 0);
  CHECK(px[4] == 65535);
  CHECK(std::abs(static_cast<int>(px[1]) - 32768) <= 1);
}

TEST_CASE("csv write and read") {
  const auto path = scratch("t.csv");
  {
    io::CsvWriter w(path, "metrics", {"name", "value", "count"});
    w.row(std::string("a"), 0.1, 3);
    w.row("b", std::numeric_limits<double>::infinity(), -1);
  }
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "# dndp-csv v1 metrics");

  const auto t = io::read_csv(path);
  CHECK(t.columns == std::vector<std::string>{"name", "value", "count"});
  REQUIRE(t.rows.size() == 2u);
  CHECK(std::stod(t.rows[0][t.column("value")]) == 0.1);
  CHECK(t.rows[1][t.column("value")] == "inf");
  CHECK(t.rows[1][t.column("count")] == "-1");
  CHECK_THROWS_AS(t.column("nope"), std::out_of_range);
}
