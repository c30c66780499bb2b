#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace advcap {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// One image in channel-major (C, H, W) layout with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Image&) const = default;
};

// Batch of equally shaped images, stored contiguously as (B, C, H, W).
class ImageBatch {
 public:
  ImageBatch() = default;
  ImageBatch(int batch, int channels, int size);
  static ImageBatch from_images(std::span<const Image> images, std::vector<std::string> ids);

  int batch() const { return batch_; }
  int channels() const { return channels_; }
  int height() const { return size_; }
  int width() const { return size_; }
  std::size_t image_stride() const { return static_cast<std::size_t>(channels_) * size_ * size_; }

  std::span<double> image(int b) { return {pixels_.data() + b * image_stride(), image_stride()}; }
  std::span<const double> image(int b) const { return {pixels_.data() + b * image_stride(), image_stride()}; }
  Image to_image(int b) const;

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<std::string>& ids() { return ids_; }
  const std::vector<std::string>& ids() const { return ids_; }

  // Throws DimensionError unless every value lies in [lo, hi].
  void check_range(double lo = 0.0, double hi = 1.0) const;

  bool operator==(const ImageBatch&) const = default;

 private:
  int batch_ = 0;
  int channels_ = 0;
  int size_ = 0;
  std::vector<double> pixels_;
  std::vector<std::string> ids_;
};

// Tokenized captions padded to a common length. Row b holds BOS ... EOS PAD*.
class CaptionBatch {
 public:
  CaptionBatch() = default;
  // Pads every sequence to the longest one with `pad`. Sequences must already
  // include BOS and EOS.
  static CaptionBatch from_sequences(const std::vector<std::vector<int>>& sequences, int pad);

  int batch() const { return batch_; }
  int length() const { return length_; }
  int token(int b, int t) const { return tokens_[static_cast<std::size_t>(b) * length_ + t]; }
  int& token(int b, int t) { return tokens_[static_cast<std::size_t>(b) * length_ + t]; }
  bool real(int b, int t) const { return mask_[static_cast<std::size_t>(b) * length_ + t] != 0; }
  void set_real(int b, int t, bool v) { mask_[static_cast<std::size_t>(b) * length_ + t] = v ? 1 : 0; }

  const std::vector<int>& tokens() const { return tokens_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  // Throws UsageError when BOS/EOS framing or the id range is violated.
  void validate(int vocab_size, int bos, int eos) const;

 private:
  int batch_ = 0;
  int length_ = 0;
  std::vector<int> tokens_;
  std::vector<std::uint8_t> mask_;
};

// Rank-3 activations (batch, length, width) stored as a (batch*length, width)
// row-major matrix.
struct SequenceTensor {
  int batch = 0;
  int length = 0;
  int width = 0;
  Matrix values;

  auto row(int b, int t) { return values.row(static_cast<Eigen::Index>(b) * length + t); }
  auto row(int b, int t) const { return values.row(static_cast<Eigen::Index>(b) * length + t); }
};

}  // namespace advcap
