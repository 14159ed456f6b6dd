#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace soymat {

using Rgb = std::array<float, 3>;

// Interleaved RGB raster. Channel values live on the 0..255 scale but are
// stored as float so filtered images keep sub-level precision.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0.0f, 0.0f, 0.0f});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  Rgb pixel(int x, int y) const;
  void set_pixel(int x, int y, const Rgb& rgb);

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Per-channel mean over all pixels.
  Rgb channel_means() const;

  bool operator==(const Image& other) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Rounds every channel to the nearest integer level and clamps to [0, 255].
void quantize(Image& image);

// 8-bit RGB PNG I/O. Values are rounded and clamped on write.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

}  // namespace soymat
