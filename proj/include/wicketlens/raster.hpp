#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wicketlens/error.hpp"

namespace wicketlens {

// Owned 8-bit pixel grid, row-major, interleaved channels. Color images are BGR.
class RasterImage {
 public:
  RasterImage() = default;

  RasterImage(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_shape(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
      throw Error(ErrorKind::InvalidInput, "sample buffer length does not match width*height*channels");
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }

  [[nodiscard]] std::uint8_t& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  [[nodiscard]] std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  [[nodiscard]] std::span<std::uint8_t> row(int y) noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }
  [[nodiscard]] std::span<const std::uint8_t> row(int y) const noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }

  [[nodiscard]] std::span<std::uint8_t> data() noexcept { return data_; }
  [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  static void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1)
      throw Error(ErrorKind::InvalidInput, "image dimensions must be at least 1x1");
    if (channels != 1 && channels != 3)
      throw Error(ErrorKind::InvalidInput, "image must have 1 or 3 channels");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Roi {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  [[nodiscard]] bool fits(const RasterImage& img) const noexcept {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= img.width() && y + h <= img.height();
  }

  friend bool operator==(const Roi&, const Roi&) = default;
};

struct PreprocessParams {
  double gamma = 7.0;
  int morph_kernel = 15;
  int median_kernel = 3;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw Error(ErrorKind::InvalidParameter, "gamma must be positive");
    if (morph_kernel < 1 || morph_kernel % 2 == 0)
      throw Error(ErrorKind::InvalidParameter, "morph_kernel must be odd and >= 1");
    if (median_kernel < 1 || median_kernel % 2 == 0)
      throw Error(ErrorKind::InvalidParameter, "median_kernel must be odd and >= 1");
  }
};

namespace detail {

inline void require_gray(const RasterImage& img, const char* op) {
  if (img.channels() != 1)
    throw Error(ErrorKind::InvalidInput, std::string(op) + " requires a single-channel image");
}

inline void require_odd_kernel(int k, const char* op) {
  if (k < 1 || k % 2 == 0)
    throw Error(ErrorKind::InvalidParameter, std::string(op) + ": kernel size must be odd and >= 1");
}

inline RasterImage map_lut(const RasterImage& img, const std::array<std::uint8_t, 256>& lut) {
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = lut[src[i]];
  return out;
}

// Sliding max (or min) over windows of width k = 2r+1 with edge replication,
// van Herk / Gil-Werman: three comparisons per sample regardless of k.
template <typename Pick>
void sliding_extreme(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int r,
                     std::vector<std::uint8_t>& padded, std::vector<std::uint8_t>& pre,
                     std::vector<std::uint8_t>& suf, Pick pick) {
  const int n = static_cast<int>(in.size());
  const int k = 2 * r + 1;
  const int len = n + 2 * r;
  padded.resize(len);
  pre.resize(len);
  suf.resize(len);
  for (int i = 0; i < len; ++i) padded[i] = in[std::clamp(i - r, 0, n - 1)];
  for (int i = 0; i < len; ++i)
    pre[i] = (i % k == 0) ? padded[i] : pick(pre[i - 1], padded[i]);
  for (int i = len - 1; i >= 0; --i)
    suf[i] = (i == len - 1 || (i + 1) % k == 0) ? padded[i] : pick(suf[i + 1], padded[i]);
  for (int i = 0; i < n; ++i) out[i] = pick(suf[i], pre[i + k - 1]);
}

// Square-window extreme filter; separable because the edge-replicated window
// is the product of clamped row and clamped column index sets.
template <typename Pick>
RasterImage square_extreme(const RasterImage& img, int k, Pick pick) {
  if (k == 1) return img;
  const int r = k / 2;
  const int w = img.width();
  const int h = img.height();
  RasterImage tmp(w, h, 1);
  std::vector<std::uint8_t> padded, pre, suf;
  for (int y = 0; y < h; ++y) sliding_extreme(img.row(y), tmp.row(y), r, padded, pre, suf, pick);

  RasterImage out(w, h, 1);
  std::vector<std::uint8_t> col_in(h), col_out(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col_in[y] = tmp.at(x, y);
    sliding_extreme(col_in, col_out, r, padded, pre, suf, pick);
    for (int y = 0; y < h; ++y) out.at(x, y) = col_out[y];
  }
  return out;
}

}  // namespace detail

/// BGR -> gray with weights 0.299/0.587/0.114, rounded half up.
/// Integer arithmetic keeps the exact .5 cases deterministic.
inline RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels() != 3)
    throw Error(ErrorKind::InvalidInput, "to_grayscale requires a 3-channel BGR image");
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const unsigned b = src[3 * i];
    const unsigned g = src[3 * i + 1];
    const unsigned r = src[3 * i + 2];
    const unsigned sum = 299u * r + 587u * g + 114u * b;
    dst[i] = static_cast<std::uint8_t>(std::min(255u, (sum + 500u) / 1000u));
  }
  return out;
}

inline std::array<std::uint8_t, 256> power_lut(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error(ErrorKind::InvalidParameter, "gamma must be positive");
  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) {
    const double v = 255.0 * std::pow(static_cast<double>(i) / 255.0, gamma);
    lut[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  }
  return lut;
}

/// out = round_half_up(255 * (in/255)^gamma)
inline RasterImage power_transform(const RasterImage& img, double gamma) {
  detail::require_gray(img, "power_transform");
  return detail::map_lut(img, power_lut(gamma));
}

inline RasterImage invert(const RasterImage& img) {
  detail::require_gray(img, "invert");
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(255 - src[i]);
  return out;
}

inline RasterImage dilate(const RasterImage& img, int k) {
  detail::require_gray(img, "dilate");
  detail::require_odd_kernel(k, "dilate");
  return detail::square_extreme(img, k, [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); });
}

inline RasterImage erode(const RasterImage& img, int k) {
  detail::require_gray(img, "erode");
  detail::require_odd_kernel(k, "erode");
  return detail::square_extreme(img, k, [](std::uint8_t a, std::uint8_t b) { return std::min(a, b); });
}

/// Median of the edge-replicated k x k window (element floor(k*k/2) of the sorted window).
inline RasterImage median_blur(const RasterImage& img, int k) {
  detail::require_gray(img, "median_blur");
  detail::require_odd_kernel(k, "median_blur");
  if (k == 1) return img;
  const int r = k / 2;
  const int w = img.width();
  const int h = img.height();
  const int rank = (k * k) / 2;
  RasterImage out(w, h, 1);
  auto sample = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };

  if (k <= 7) {
    std::vector<std::uint8_t> window(static_cast<std::size_t>(k) * k);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) window[n++] = sample(x + dx, y + dy);
        std::nth_element(window.begin(), window.begin() + rank, window.end());
        out.at(x, y) = window[rank];
      }
    }
    return out;
  }

  // Huang's running histogram for large kernels.
  for (int y = 0; y < h; ++y) {
    std::array<int, 256> hist{};
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) ++hist[sample(dx, y + dy)];
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        for (int dy = -r; dy <= r; ++dy) {
          --hist[sample(x - r - 1, y + dy)];
          ++hist[sample(x + r, y + dy)];
        }
      }
      int seen = 0;
      int v = 0;
      for (; v < 256; ++v) {
        seen += hist[v];
        if (seen > rank) break;
      }
      out.at(x, y) = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

inline RasterImage crop(const RasterImage& img, const Roi& roi) {
  if (!roi.fits(img))
    throw Error(ErrorKind::InvalidRoi, "roi (" + std::to_string(roi.x) + "," + std::to_string(roi.y) + "," +
                                           std::to_string(roi.w) + "," + std::to_string(roi.h) +
                                           ") outside " + std::to_string(img.width()) + "x" +
                                           std::to_string(img.height()) + " image");
  RasterImage out(roi.w, roi.h, img.channels());
  const auto row_bytes = static_cast<std::size_t>(roi.w) * img.channels();
  for (int y = 0; y < roi.h; ++y) {
    auto src = img.row(roi.y + y).subspan(static_cast<std::size_t>(roi.x) * img.channels(), row_bytes);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

// Stage selection for the scoreboard chain. Order of application is fixed.
enum Stage : unsigned {
  kStageGray = 1u << 0,
  kStageGamma = 1u << 1,
  kStageInvert = 1u << 2,
  kStageDilate = 1u << 3,
  kStageErode = 1u << 4,
  kStageMedian = 1u << 5,
  kAllStages = 0x3Fu,
};

inline unsigned parse_stages(std::string_view list) {
  static constexpr std::pair<std::string_view, Stage> kNames[] = {
      {"gray", kStageGray},     {"gamma", kStageGamma}, {"invert", kStageInvert},
      {"dilate", kStageDilate}, {"erode", kStageErode}, {"median", kStageMedian},
  };
  unsigned mask = 0;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto token = list.substr(0, comma);
    bool found = false;
    for (const auto& [name, bit] : kNames) {
      if (token == name) {
        mask |= bit;
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::InvalidParameter, "unknown stage '" + std::string(token) + "'");
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return mask;
}

/// gray -> gamma -> invert -> median -> dilate -> erode, restricted to `stages`.
/// The median runs ahead of the 15x15 closing: a closing window must be free of
/// speckle to keep a stroke, which isolated-pixel noise inside glyphs defeats.
/// A single-channel input skips the gray stage; any other stage needs a gray image.
inline RasterImage preprocess(const RasterImage& img, const PreprocessParams& params,
                              unsigned stages = kAllStages) {
  params.validate();
  RasterImage cur = img;
  if (cur.channels() == 3) {
    if (!(stages & kStageGray))
      throw Error(ErrorKind::InvalidInput, "color input requires the gray stage");
    cur = to_grayscale(cur);
  }
  if (stages & kStageGamma) cur = power_transform(cur, params.gamma);
  if (stages & kStageInvert) cur = invert(cur);
  if (stages & kStageMedian) cur = median_blur(cur, params.median_kernel);
  if (stages & kStageDilate) cur = dilate(cur, params.morph_kernel);
  if (stages & kStageErode) cur = erode(cur, params.morph_kernel);
  return cur;
}

inline RasterImage preprocess_scorecard(const RasterImage& img, const Roi& roi,
                                        const PreprocessParams& params) {
  if (img.channels() != 3)
    throw Error(ErrorKind::InvalidInput, "preprocess_scorecard requires a 3-channel BGR image");
  return preprocess(crop(img, roi), params, kAllStages);
}

}  // namespace wicketlens
