#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "abc/data.hpp"

namespace abc {

namespace fs = std::filesystem;

GrayImage to_gray(std::span<const float> values, std::size_t height, std::size_t width) {
  if (values.size() != height * width) throw std::invalid_argument("to_gray: size does not match dimensions");
  GrayImage img{width, height, std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = std::clamp(values[i], 0.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

GrayImage mask_to_gray(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width) {
  if (mask.size() != height * width) throw std::invalid_argument("mask_to_gray: size does not match dimensions");
  GrayImage img{width, height, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
  return img;
}

std::vector<float> gray_to_float(const GrayImage& image) {
  std::vector<float> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(image.pixels[i]) / 255.0f;
  return out;
}

std::vector<std::uint8_t> gray_to_mask(const GrayImage& image) {
  std::vector<std::uint8_t> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i] >= 128 ? 1 : 0;
  return out;
}

namespace {

std::string indexed_name(const char* folder, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%04zu.pgm", folder, i);
  return buf;
}

}  // namespace

void write_dataset(const fs::path& dir, std::span<const Sample> samples) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (!ec) fs::create_directories(dir / "masks", ec);
  if (ec) throw DatasetError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!manifest) throw DatasetError("cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string image_name = indexed_name("images", i);
    const std::string mask_name = indexed_name("masks", i);
    save_pgm(to_gray(s.image, s.height, s.width), dir / image_name);
    save_pgm(mask_to_gray(s.mask, s.height, s.width), dir / mask_name);
    manifest << image_name << ',' << mask_name << '\n';
  }
  if (!manifest) throw DatasetError("manifest write failed in " + dir.string());
}

std::vector<std::pair<std::string, std::string>> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw DatasetError("no manifest at " + (dir / kManifestName).string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw DatasetError("manifest line " + std::to_string(line_no) + " is not 'image_path,mask_path'");
    }
    out.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return out;
}

std::vector<Sample> load_dataset(const fs::path& dir) {
  std::vector<Sample> out;
  std::size_t index = 0;
  for (const auto& [image_path, mask_path] : read_manifest(dir)) {
    GrayImage image = load_pgm(dir / image_path);
    GrayImage mask = load_pgm(dir / mask_path);
    if (image.width != mask.width || image.height != mask.height) {
      throw DatasetError("image/mask size mismatch for " + image_path);
    }
    Sample s;
    s.height = image.height;
    s.width = image.width;
    s.image = gray_to_float(image);
    s.mask = gray_to_mask(mask);
    s.seed = index++;
    out.push_back(std::move(s));
  }
  return out;
}

void standardize_image(std::span<float> image) {
  if (image.empty()) return;
  double mean = 0.0;
  for (float v : image) mean += v;
  mean /= static_cast<double>(image.size());
  double var = 0.0;
  for (float v : image) var += (v - mean) * (v - mean);
  var /= static_cast<double>(image.size());
  const double sd = std::sqrt(var);
  const double inv = sd > kMinImageStd ? 1.0 / sd : 1.0;
  for (float& v : image) v = static_cast<float>((v - mean) * inv);
}

std::pair<Tensor, Tensor> make_batch(std::span<const Sample* const> samples, std::span<const std::uint8_t> flip) {
  if (samples.empty()) throw std::invalid_argument("make_batch: empty batch");
  const std::size_t h = samples[0]->height;
  const std::size_t w = samples[0]->width;
  const std::size_t n = samples.size();
  std::vector<float> images(n * h * w);
  std::vector<float> masks(n * h * w);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = *samples[i];
    if (s.height != h || s.width != w) throw std::invalid_argument("make_batch: mixed resolutions");
    const bool mirror = i < flip.size() && flip[i] != 0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t src = y * w + (mirror ? w - 1 - x : x);
        images[(i * h + y) * w + x] = s.image[src];
        masks[(i * h + y) * w + x] = static_cast<float>(s.mask[src]);
      }
    }
    standardize_image(std::span<float>(images).subspan(i * h * w, h * w));
  }
  return {Tensor({n, 1, h, w}, std::move(images)), Tensor({n, 1, h, w}, std::move(masks))};
}

}  // namespace abc
