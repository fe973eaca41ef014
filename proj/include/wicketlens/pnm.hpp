#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "wicketlens/error.hpp"
#include "wicketlens/raster.hpp"

namespace wicketlens {

namespace detail {

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

// Binary PGM (P5) / PPM (P6) with maxval 255. Header comments are tolerated on read;
// exactly one whitespace byte separates maxval from the raster.
inline RasterImage decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name = "<buffer>") {
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorKind::Parse, name + ": " + why);
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("malformed header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) throw fail("header value too large");
    }
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw fail("not a binary PGM/PPM file");
  const int channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const int width = read_int();
  const int height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw fail("only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing whitespace after header");
  ++pos;
  if (width < 1 || height < 1) throw fail("zero image dimension");
  const auto need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < need) throw fail("truncated raster");
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return RasterImage(width, height, channels, std::move(data));
}

inline std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  auto data = img.data();
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline RasterImage read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png")
    throw Error(ErrorKind::InvalidInput, path.string() + ": PNG support is not compiled in");
  return decode_pnm(detail::read_all(path), path.string());
}

inline void write_image(const std::filesystem::path& path, const RasterImage& img) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace wicketlens
