#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "r2s/errors.hpp"

namespace r2s {

/// Interleaved 8-bit RGB image, row-major.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, std::uint8_t fill = 0);
  Image(int height, int width, std::vector<std::uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  std::uint8_t at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Loads PNG or JPEG (by content) into RGB. Throws IoError / FormatError.
Image load_image(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG.
void save_png(const Image& image, const std::filesystem::path& path);

}  // namespace r2s
