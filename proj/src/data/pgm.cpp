#include "abc/pgm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace abc {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(const std::string& bytes, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) token.push_back(bytes[pos++]);
  return !token.empty();
}

std::size_t parse_dimension(const std::string& token, const char* what) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos || token.size() > 9) {
    throw PgmError(PgmErrorCode::bad_header, std::string("PGM: invalid ") + what + " '" + token + "'");
  }
  return std::stoul(token);
}

}  // namespace

GrayImage decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw PgmError(PgmErrorCode::bad_magic, "PGM: expected binary 'P5' magic");
  }
  std::size_t pos = 2;
  std::string token;
  GrayImage img;
  if (!next_token(bytes, pos, token)) throw PgmError(PgmErrorCode::truncated, "PGM: header ends before width");
  img.width = parse_dimension(token, "width");
  if (!next_token(bytes, pos, token)) throw PgmError(PgmErrorCode::truncated, "PGM: header ends before height");
  img.height = parse_dimension(token, "height");
  if (!next_token(bytes, pos, token)) throw PgmError(PgmErrorCode::truncated, "PGM: header ends before maxval");
  if (token != "255") throw PgmError(PgmErrorCode::bad_maxval, "PGM: maxval must be 255, got '" + token + "'");
  if (img.width == 0 || img.height == 0) throw PgmError(PgmErrorCode::bad_header, "PGM: zero dimension");
  if (pos >= bytes.size()) throw PgmError(PgmErrorCode::truncated, "PGM: missing raster");
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = img.width * img.height;
  if (bytes.size() - pos < n) {
    throw PgmError(PgmErrorCode::truncated, "PGM: raster has " + std::to_string(bytes.size() - pos) + " of " +
                                                std::to_string(n) + " bytes");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError(PgmErrorCode::io, "PGM: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

std::string encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height || image.pixels.empty()) {
    throw PgmError(PgmErrorCode::bad_header, "PGM: raster size does not match dimensions");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PgmError(PgmErrorCode::io, "PGM: cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PgmError(PgmErrorCode::io, "PGM: write failed for " + path.string());
}

}  // namespace abc
