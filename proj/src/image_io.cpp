#include "advcap/image_io.hpp"

#include "advcap/errors.hpp"
#include "advcap/io_util.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace advcap {

Image read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError("cannot decode image " + path.string());
  // Divide rather than multiply by the reciprocal so k/255 round-trips exactly.
  double denom = 1.0;
  switch (mat.depth()) {
    case CV_8U: denom = 255.0; break;
    case CV_16U: denom = 65535.0; break;
    case CV_32F:
    case CV_64F: denom = 1.0; break;
    default: throw IoError("unsupported pixel depth in " + path.string());
  }
  cv::Mat f;
  mat.convertTo(f, CV_64F);
  const int src_channels = f.channels();
  const int channels = src_channels <= 2 ? 1 : 3;
  Image img(channels, f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      const double* px = row + static_cast<std::ptrdiff_t>(x) * src_channels;
      if (channels == 1) {
        img.at(0, y, x) = std::clamp(px[0] / denom, 0.0, 1.0);
      } else {
        // OpenCV stores BGR(A).
        img.at(0, y, x) = std::clamp(px[2] / denom, 0.0, 1.0);
        img.at(1, y, x) = std::clamp(px[1] / denom, 0.0, 1.0);
        img.at(2, y, x) = std::clamp(px[0] / denom, 0.0, 1.0);
      }
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw IoError("PNG output needs 1 or 3 channels");
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        const int dst_c = image.channels == 1 ? 0 : 2 - c;
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        row[x * image.channels + dst_c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write " + path.string());
}

Image to_rgb(const Image& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1) throw DimensionError("expected a 1- or 3-channel image");
  Image out(3, image.height, image.width);
  for (int c = 0; c < 3; ++c) {
    std::copy(image.data.begin(), image.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(c) * image.height * image.width);
  }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw DimensionError("resize target must be positive");
  if (image.height == height && image.width == width) return image;
  Image out(image.channels, height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
        const double bottom = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

namespace {
constexpr char kTensorMagic[8] = {'A', 'D', 'V', 'I', 'M', 'G', '0', '1'};
}

void write_tensor_image(const std::filesystem::path& path, const Image& image) {
  std::string out(kTensorMagic, sizeof(kTensorMagic));
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(image.channels),
                                 static_cast<std::uint32_t>(image.height),
                                 static_cast<std::uint32_t>(image.width)};
  out.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.append(reinterpret_cast<const char*>(image.data.data()), sizeof(double) * image.data.size());
  write_file_atomic(path, out);
}

Image read_tensor_image(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::size_t header = sizeof(kTensorMagic) + 3 * sizeof(std::uint32_t);
  if (bytes.size() < header || std::memcmp(bytes.data(), kTensorMagic, sizeof(kTensorMagic)) != 0) {
    throw ParseError("not a tensor image: " + path.string());
  }
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + sizeof(kTensorMagic), sizeof(dims));
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  if (bytes.size() != header + sizeof(double) * img.data.size()) {
    throw ParseError("tensor image has the wrong size: " + path.string());
  }
  std::memcpy(img.data.data(), bytes.data() + header, sizeof(double) * img.data.size());
  return img;
}

}  // namespace advcap
