#include "advcap/tensor.hpp"

#include "advcap/errors.hpp"

#include <algorithm>
#include <cmath>

namespace advcap {

ImageBatch::ImageBatch(int batch, int channels, int size)
    : batch_(batch),
      channels_(channels),
      size_(size),
      pixels_(static_cast<std::size_t>(batch) * channels * size * size, 0.0),
      ids_(static_cast<std::size_t>(batch)) {
  for (int b = 0; b < batch; ++b) ids_[b] = std::to_string(b);
}

ImageBatch ImageBatch::from_images(std::span<const Image> images, std::vector<std::string> ids) {
  if (images.empty()) throw DimensionError("cannot build an empty image batch");
  if (ids.size() != images.size()) throw DimensionError("image/id count mismatch");
  const Image& first = images.front();
  if (first.height != first.width) throw DimensionError("images must be square");
  ImageBatch batch(static_cast<int>(images.size()), first.channels, first.height);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
      throw DimensionError("images in a batch must share one shape");
    }
    std::copy(img.data.begin(), img.data.end(), batch.image(static_cast<int>(i)).begin());
  }
  batch.ids_ = std::move(ids);
  return batch;
}

Image ImageBatch::to_image(int b) const {
  Image img(channels_, size_, size_);
  auto src = image(b);
  std::copy(src.begin(), src.end(), img.data.begin());
  return img;
}

void ImageBatch::check_range(double lo, double hi) const {
  for (double v : pixels_) {
    if (!(v >= lo && v <= hi)) {
      throw DimensionError("pixel value " + std::to_string(v) + " outside [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]");
    }
  }
}

CaptionBatch CaptionBatch::from_sequences(const std::vector<std::vector<int>>& sequences, int pad) {
  CaptionBatch out;
  out.batch_ = static_cast<int>(sequences.size());
  std::size_t longest = 0;
  for (const auto& s : sequences) longest = std::max(longest, s.size());
  out.length_ = static_cast<int>(longest);
  out.tokens_.assign(sequences.size() * longest, pad);
  out.mask_.assign(sequences.size() * longest, 0);
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    for (std::size_t t = 0; t < sequences[b].size(); ++t) {
      out.tokens_[b * longest + t] = sequences[b][t];
      out.mask_[b * longest + t] = 1;
    }
  }
  return out;
}

void CaptionBatch::validate(int vocab_size, int bos, int eos) const {
  for (int b = 0; b < batch_; ++b) {
    if (length_ == 0 || token(b, 0) != bos || !real(b, 0)) {
      throw UsageError("caption row " + std::to_string(b) + " does not begin with BOS");
    }
    int last = 0;
    for (int t = 0; t < length_; ++t) {
      const int id = token(b, t);
      if (id < 0 || id >= vocab_size) {
        throw UsageError("token id " + std::to_string(id) + " outside vocabulary");
      }
      if (real(b, t)) {
        if (t != last && t != last + 1) throw UsageError("caption mask is not a prefix");
        last = t;
      }
    }
    if (token(b, last) != eos) {
      throw UsageError("caption row " + std::to_string(b) + " does not end with EOS");
    }
  }
}

}  // namespace advcap
