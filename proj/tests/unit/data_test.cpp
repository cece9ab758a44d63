#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "abc/data.hpp"
#include "abc/pgm.hpp"
#include "support/temp_dir.hpp"

using namespace abc;

namespace {

PgmErrorCode decode_error(const std::string& bytes) {
  try {
    decode_pgm(bytes);
  } catch (const PgmError& e) {
    return e.code();
  }
  FAIL("decode_pgm accepted malformed input");
  return PgmErrorCode::io;
}

std::size_t positives(const Sample& s) {
  std::size_t n = 0;
  for (auto v : s.mask) n += v;
  return n;
}

}  // namespace

TEST_CASE("pgm encodes the P5 header then raw bytes") {
  const GrayImage img{3, 2, {0, 1, 2, 253, 254, 255}};
  const std::string bytes = encode_pgm(img);
  CHECK(bytes.substr(0, 11) == "P5\n3 2\n255\n");
  CHECK(bytes.size() == 11 + 6);
  const GrayImage back = decode_pgm(bytes);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("pgm file round trip is bit exact") {
  test_support::TempDir dir("pgm");
  GrayImage img{17, 5, {}};
  for (std::size_t i = 0; i < 85; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 3));
  save_pgm(img, dir.path() / "a.pgm");
  CHECK(load_pgm(dir.path() / "a.pgm").pixels == img.pixels);
}

TEST_CASE("pgm header comments are skipped") {
  const GrayImage g = decode_pgm(std::string("P5\n# note\n2 1\n255\n") + std::string("\x07\x08", 2));
  CHECK(g.pixels == std::vector<std::uint8_t>{7, 8});
}

TEST_CASE("pgm rejects malformed input with a distinct code") {
  CHECK(decode_error("P2\n1 1\n255\n0") == PgmErrorCode::bad_magic);
  CHECK(decode_error("P5\n1 1\n65535\n\x01\x01") == PgmErrorCode::bad_maxval);
  CHECK(decode_error("P5\n2 2\n255\n\x01") == PgmErrorCode::truncated);
  CHECK(decode_error("P5\n2") == PgmErrorCode::truncated);
  CHECK(decode_error(std::string("P5\n0 2\n255\n")) == PgmErrorCode::bad_header);
  try {
    load_pgm("/nonexistent/x.pgm");
    FAIL("missing file accepted");
  } catch (const PgmError& e) {
    CHECK(e.code() == PgmErrorCode::io);
  }
}

TEST_CASE("scene generation is deterministic in seed and index") {
  SceneSpec spec;
  spec.seed = 9;
  const Sample a = generate_scene(spec, 3), b = generate_scene(spec, 3), c = generate_scene(spec, 4);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  CHECK(a.image != c.image);
  spec.seed = 10;
  CHECK(generate_scene(spec, 3).image != a.image);
}

TEST_CASE("scene invariants hold over many draws") {
  SceneSpec spec;
  spec.seed = 5;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const Sample s = generate_scene(spec, i);
    REQUIRE(s.image.size() == 64 * 64);
    for (float v : s.image) CHECK((v >= 0.0f && v <= 1.0f));
    CHECK(static_cast<double>(positives(s)) < 0.01 * 64 * 64);
    // Mask is exactly the union of the half-peak discs of the stamped targets.
    std::vector<std::uint8_t> want(64 * 64, 0);
    for (const TargetStamp& t : s.targets) {
      CHECK(t.cy < 64);
      CHECK(t.cx < 64);
      CHECK(t.radius >= spec.min_radius);
      CHECK(t.radius <= spec.max_radius);
      const double sigma = t.radius / 2;
      for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
          const double dy = double(y) - double(t.cy), dx = double(x) - double(t.cx);
          const double d2 = dy * dy + dx * dx;
          if (d2 <= t.radius * t.radius && std::exp(-d2 / (2 * sigma * sigma)) >= 0.5 - 1e-12) want[y * 64 + x] = 1;
        }
    }
    CHECK(s.mask == want);
  }
}

TEST_CASE("scene edge cases") {
  SceneSpec spec;
  spec.min_targets = spec.max_targets = 0;
  const Sample s = generate_scene(spec, 0);
  CHECK(positives(s) == 0);
  CHECK(s.targets.empty());

  SceneSpec two;
  two.min_targets = two.max_targets = 2;
  two.max_radius = 3.0;
  CHECK(static_cast<double>(positives(generate_scene(two, 1))) < 0.01 * 64 * 64);

  SceneSpec tiny;
  tiny.height = tiny.width = 16;
  CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);
  SceneSpec bad;
  bad.min_radius = 5;
  bad.max_radius = 6;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_background_style(to_string(BackgroundStyle::cloud_clutter)) == BackgroundStyle::cloud_clutter);
  CHECK_THROWS_AS(parse_background_style("fog"), std::invalid_argument);
}

TEST_CASE("split is disjoint, covering and seeded") {
  const auto [train, test] = split_indices(10, 0.8, 1);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 10);
  CHECK(*all.rbegin() == 9);
  CHECK(split_indices(10, 0.8, 1) == split_indices(10, 0.8, 1));
  CHECK_THROWS_AS(split_indices(1, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_indices(0, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_indices(5, 1.0, 1), std::invalid_argument);

  const std::vector<int> items{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  const auto [a, b] = split_dataset<int>(items, 0.8, 1);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(a[i] == items[train[i]]);
  CHECK(b.size() == 2);
}

TEST_CASE("raster conversions") {
  const std::vector<float> v{0.0f, 0.5f, 1.0f, 1.5f};
  const GrayImage g = to_gray(v, 2, 2);
  CHECK(g.pixels == std::vector<std::uint8_t>{0, 128, 255, 255});
  const auto f = gray_to_float(g);
  CHECK(f[0] == 0.0f);
  CHECK(f[2] == 1.0f);
  const std::vector<std::uint8_t> m{0, 1, 1, 0};
  CHECK(mask_to_gray(m, 2, 2).pixels == std::vector<std::uint8_t>{0, 255, 255, 0});
  CHECK(gray_to_mask(GrayImage{4, 1, {0, 127, 128, 255}}) == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("dataset directory round trip") {
  test_support::TempDir dir("ds");
  SceneSpec spec;
  spec.seed = 2;
  const auto samples = generate_dataset(spec, 3);
  write_dataset(dir.path(), samples);
  const auto manifest = read_manifest(dir.path());
  REQUIRE(manifest.size() == 3);
  CHECK(manifest[0].first == "images/0000.pgm");
  CHECK(manifest[0].second == "masks/0000.pgm");
  const auto loaded = load_dataset(dir.path());
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].mask == samples[i].mask);
    for (std::size_t p = 0; p < loaded[i].image.size(); ++p)
      CHECK(std::abs(loaded[i].image[p] - samples[i].image[p]) <= 0.5f / 255.0f + 1e-6f);
  }
  CHECK_THROWS_AS(load_dataset(dir.path() / "missing"), DatasetError);
  std::ofstream(dir.path() / kManifestName) << "images/0000.pgm\n";
  CHECK_THROWS_AS(load_dataset(dir.path()), DatasetError);
}

TEST_CASE("standardize_image gives zero mean and unit variance") {
  std::vector<float> v{0.1f, 0.2f, 0.4f, 0.9f};
  standardize_image(v);
  double mean = 0, var = 0;
  for (float x : v) mean += x / 4.0;
  for (float x : v) var += (x - mean) * (x - mean) / 4.0;
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::abs(var - 1.0) < 1e-5);
  CHECK(v[0] < v[1]);

  std::vector<float> flat(9, 0.3f);
  standardize_image(flat);
  for (float x : flat) CHECK(std::abs(x) < 1e-7);
}

TEST_CASE("make_batch stacks, standardizes and mirrors") {
  SceneSpec spec;
  spec.height = spec.width = 32;
  spec.seed = 3;
  const auto s = generate_dataset(spec, 2);
  const std::vector<const Sample*> ptrs{&s[0], &s[1]};
  const std::vector<std::uint8_t> flip{0, 1};
  const auto [x, m] = make_batch(ptrs, flip);
  CHECK(x.shape() == Shape{2, 1, 32, 32});
  CHECK(m.shape() == Shape{2, 1, 32, 32});
  std::vector<float> want(s[0].image);
  standardize_image(want);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(x.data()[i] == doctest::Approx(want[i]).epsilon(1e-5));
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t c = 0; c < 32; ++c)
      CHECK(m.data()[1024 + y * 32 + c] == static_cast<float>(s[1].mask[y * 32 + 31 - c]));

  CHECK_THROWS_AS(make_batch(std::vector<const Sample*>{}), std::invalid_argument);
  SceneSpec big;
  const Sample other = generate_scene(big, 0);
  CHECK_THROWS_AS(make_batch(std::vector<const Sample*>{&s[0], &other}), std::invalid_argument);
}
