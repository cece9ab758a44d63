#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace abc {

/// 8-bit single-channel raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

enum class PgmErrorCode { io, bad_magic, bad_header, bad_maxval, truncated };

class PgmError : public std::runtime_error {
 public:
  PgmError(PgmErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PgmErrorCode code() const { return code_; }

 private:
  PgmErrorCode code_;
};

/// Binary P5 with maxval 255 only.
GrayImage load_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(const std::string& bytes);
void save_pgm(const GrayImage& image, const std::filesystem::path& path);
/// "P5\n<w> <h>\n255\n" followed by the raw bytes.
std::string encode_pgm(const GrayImage& image);

}  // namespace abc
