#ifndef SOT_IMAGE_IO_HPP
#define SOT_IMAGE_IO_HPP

// PNG and JPEG reading/writing. Link against libpng and libjpeg
// (the sot_image CMake target).

#include <sot/core.hpp>

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// jpeglib.h expects size_t and FILE to be declared already.
#include <jpeglib.h>

namespace sot {

/// Pixels of a width x height RGB image, one row of `colors` per pixel in
/// row-major order, channels in [0, 1].
struct PixelCloud {
  Matrix colors;  // n x 3
  int width = 0;
  int height = 0;

  PixelCloud() = default;
  PixelCloud(Matrix c, int w, int h) : colors(std::move(c)), width(w), height(h) { validate(); }

  [[nodiscard]] Eigen::Index size() const { return colors.rows(); }

  void validate() const {
    if (width < 0 || height < 0 ||
        colors.rows() != static_cast<Eigen::Index>(width) * static_cast<Eigen::Index>(height) ||
        colors.cols() != 3) {
      throw std::invalid_argument("PixelCloud: expected " + std::to_string(width) + "x" +
                                  std::to_string(height) + " pixels with 3 channels");
    }
    if (colors.size() > 0 && (colors.minCoeff() < 0.0 || colors.maxCoeff() > 1.0)) {
      throw std::invalid_argument("PixelCloud: channel values must lie in [0, 1]");
    }
  }
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline PixelCloud from_bytes(const std::vector<unsigned char>& rgb, int w, int h) {
  Matrix c(static_cast<Eigen::Index>(w) * h, 3);
  for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = rgb[static_cast<std::size_t>(k)] / 255.0;
  return PixelCloud(std::move(c), w, h);
}

inline std::vector<unsigned char> to_bytes(const PixelCloud& img) {
  std::vector<unsigned char> rgb(static_cast<std::size_t>(img.colors.size()));
  for (Eigen::Index k = 0; k < img.colors.size(); ++k) {
    const double v = std::clamp(img.colors.data()[k], 0.0, 1.0);
    rgb[static_cast<std::size_t>(k)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  return rgb;
}

inline PixelCloud load_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageError(path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageError(path + ": " + msg);
  }
  return from_bytes(rgb, static_cast<int>(image.width), static_cast<int>(image.height));
}

inline void save_png(const PixelCloud& img, const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  const auto rgb = to_bytes(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw ImageError(path + ": " + image.message);
  }
}

struct JpegErrorManager {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// The setjmp frames below hold only trivially destructible locals between
// setjmp and the libjpeg calls; buffers are owned by the callers.

inline bool jpeg_read_into(std::FILE* f, std::vector<unsigned char>& rgb, int& w, int& h,
                           char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::strcpy(message, err.message);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline bool jpeg_write_from(std::FILE* f, const std::vector<unsigned char>& rgb, int w, int h,
                            int quality, char* message) {
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::strcpy(message, err.message);
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

inline PixelCloud load_jpeg(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw ImageError(path + ": cannot open");
  std::vector<unsigned char> rgb;
  int w = 0;
  int h = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!jpeg_read_into(f.get(), rgb, w, h, message)) throw ImageError(path + ": " + message);
  return from_bytes(rgb, w, h);
}

inline void save_jpeg(const PixelCloud& img, const std::string& path, int quality) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw ImageError(path + ": cannot open for writing");
  char message[JMSG_LENGTH_MAX] = {};
  if (!jpeg_write_from(f.get(), to_bytes(img), img.width, img.height, quality, message)) {
    throw ImageError(path + ": " + message);
  }
}

inline bool has_jpeg_extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return false;
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "jpg" || ext == "jpeg";
}

}  // namespace detail

/// Reads a PNG or JPEG file; the format is taken from the file signature.
inline PixelCloud load_image(const std::string& path) {
  std::array<unsigned char, 8> magic{};
  {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ImageError(path + ": cannot open");
    if (std::fread(magic.data(), 1, magic.size(), f.get()) < 3) {
      throw ImageError(path + ": file too short to be an image");
    }
  }
  if (png_sig_cmp(magic.data(), 0, magic.size()) == 0) return detail::load_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return detail::load_jpeg(path);
  throw ImageError(path + ": unsupported format (expected PNG or JPEG)");
}

/// Writes JPEG for .jpg/.jpeg paths, PNG otherwise. Channels are rounded to
/// 8 bits.
inline void save_image(const PixelCloud& img, const std::string& path, int jpeg_quality = 95) {
  if (detail::has_jpeg_extension(path)) {
    detail::save_jpeg(img, path, jpeg_quality);
  } else {
    detail::save_png(img, path);
  }
}

}  // namespace sot

#endif  // SOT_IMAGE_IO_HPP
