#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wicketlens/raster.hpp"

namespace wicketlens::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "wicketlens-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RasterImage random_image(std::mt19937_64& rng, int w, int h, int channels) {
  std::uniform_int_distribution<int> px(0, 255);
  RasterImage img(w, h, channels);
  for (auto& s : img.data()) s = static_cast<std::uint8_t>(px(rng));
  return img;
}

// Sparse binary-ish image: mostly one level with scattered speckle, which
// exercises morphology more than uniform noise does.
inline RasterImage speckle_image(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution hit(density);
  std::uniform_int_distribution<int> px(0, 255);
  RasterImage img(w, h, 1, 0);
  for (auto& s : img.data())
    if (hit(rng)) s = static_cast<std::uint8_t>(px(rng));
  return img;
}

}  // namespace wicketlens::testing
