#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abc/pgm.hpp"
#include "abc/tensor.hpp"

namespace abc {

enum class BackgroundStyle { smooth_gradient, cloud_clutter };

std::string to_string(BackgroundStyle style);
BackgroundStyle parse_background_style(const std::string& s);

/// Parameters of the synthetic infrared scene generator.
///
/// Targets are isotropic Gaussian blobs whose support radius r spans two
/// standard deviations; the ground-truth mask is the part of each blob at or
/// above half its peak (radius ~0.59 r). Placement keeps the total mask area
/// under 1% of the image.
struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_targets = 1;
  std::size_t max_targets = 3;
  double min_radius = 2.0;
  double max_radius = 3.5;
  double min_peak = 0.35;  // blob amplitude above background, image units
  double max_peak = 0.6;
  BackgroundStyle background = BackgroundStyle::smooth_gradient;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TargetStamp {
  std::size_t cy = 0;
  std::size_t cx = 0;
  double radius = 0.0;
  double peak = 0.0;
};

struct Sample {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> image;         // [0,1]
  std::vector<std::uint8_t> mask;   // {0,1}
  std::vector<TargetStamp> targets;
  std::uint64_t seed = 0;           // per-sample seed the scene was drawn from
};

/// Deterministic in (spec.seed, index).
Sample generate_scene(const SceneSpec& spec, std::uint64_t index);
std::vector<Sample> generate_dataset(const SceneSpec& spec, std::size_t count);

/// Seeded shuffle then split; train gets round(n * fraction) items.
/// Throws std::invalid_argument on empty input, fraction outside (0,1), or
/// an empty training side.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed);

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(std::span<const T> samples, double train_fraction,
                                                        std::uint64_t seed) {
  auto [train_idx, test_idx] = split_indices(samples.size(), train_fraction, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i : train_idx) out.first.push_back(samples[i]);
  for (std::size_t i : test_idx) out.second.push_back(samples[i]);
  return out;
}

// Image <-> raster conversions ------------------------------------------------

GrayImage to_gray(std::span<const float> values, std::size_t height, std::size_t width);
/// {0,1} -> {0,255}
GrayImage mask_to_gray(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width);
std::vector<float> gray_to_float(const GrayImage& image);
/// >= 128 -> 1
std::vector<std::uint8_t> gray_to_mask(const GrayImage& image);

// Dataset directory ------------------------------------------------------------
//
//   <dir>/images/NNNN.pgm, <dir>/masks/NNNN.pgm
//   <dir>/manifest.csv: one "images/NNNN.pgm,masks/NNNN.pgm" line per pair

inline constexpr const char* kManifestName = "manifest.csv";

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_dataset(const std::filesystem::path& dir, std::span<const Sample> samples);
std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& dir);
/// All pairs; images rescaled to [0,1], masks thresholded at 128.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// Below this standard deviation an image is only centered, not rescaled.
inline constexpr double kMinImageStd = 1e-6;

/// Per-image zero mean, unit variance in place; the model input convention.
void standardize_image(std::span<float> image);

/// Stacks samples (all of one resolution) into image [N,1,H,W] and mask
/// [N,1,H,W] tensors; a nonzero `flip[i]` mirrors sample i horizontally.
/// Each image is standardized (see standardize_image).
std::pair<Tensor, Tensor> make_batch(std::span<const Sample* const> samples,
                                     std::span<const std::uint8_t> flip = {});

}  // namespace abc
