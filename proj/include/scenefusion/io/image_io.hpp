#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>

#include "scenefusion/common/error.hpp"
#include "scenefusion/vision/tensor.hpp"

namespace scenefusion::io {

/// 8-bit interleaved RGB.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

inline vision::Tensor3 to_tensor(const RgbImage& img) {
  vision::Tensor3 t(img.height, img.width, 3);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = img.pixels[i] / 255.0;
  return t;
}

inline RgbImage from_tensor(const vision::Tensor3& t) {
  require(t.channels == 3, "from_tensor: expected 3 channels");
  RgbImage img{t.width, t.height, std::vector<std::uint8_t>(t.data.size())};
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const double v = std::clamp(t.data[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

inline RgbImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("image not found: " + path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("png " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out{static_cast<int>(image.width), static_cast<int>(image.height), {}};
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("png write " + path.string() + ": " + image.message);
  }
}

namespace jpeg_detail {
struct ErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};
inline void on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<ErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}
}  // namespace jpeg_detail

inline RgbImage read_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!file) throw NotFound("image not found: " + path.string());
  jpeg_decompress_struct cinfo;
  jpeg_detail::ErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_detail::on_error;
  RgbImage out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("jpeg " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

/// Dispatches on the file signature, not the extension.
inline RgbImage read_image(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!file) throw NotFound("image not found: " + path.string());
  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, sizeof magic, file.get());
  file.reset();
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return read_png(path);
  if (got >= 3 && magic[0] == 0xff && magic[1] == 0xd8 && magic[2] == 0xff) return read_jpeg(path);
  throw IoError("unsupported image format: " + path.string());
}

inline vision::ImageTensor load_image(const std::filesystem::path& path, int size = vision::kDefaultImageSize) {
  return vision::preprocess(to_tensor(read_image(path)), size);
}

}  // namespace scenefusion::io
