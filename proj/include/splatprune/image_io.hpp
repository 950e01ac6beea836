#pragma once

#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "splatprune/error.hpp"

namespace splatprune {

/// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

namespace detail {

inline std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

inline Image8 read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorKind::IoFailure, path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoFailure, path.string() + ": " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline Image8 read_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());

  Image8 out;
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = &jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::IoFailure, path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.channels = cinfo.output_components;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * out.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

// P2 / P5 gray and P3 / P6 RGB, maxval <= 255.
inline Image8 read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  const std::string magic = token();
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw Error(ErrorKind::UnsupportedEncoding, path.string() + ": unsupported netpbm variant '" + magic + "'");
  }
  Image8 out;
  int maxval = 0;
  try {
    out.width = std::stoi(token());
    out.height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, path.string() + ": bad netpbm header");
  }
  if (out.width <= 0 || out.height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorKind::UnsupportedEncoding, path.string() + ": only 8-bit netpbm is supported");
  }
  out.channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.pixels.resize(count);
  if (magic == "P5" || magic == "P6") {
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) throw Error(ErrorKind::TruncatedBody, path.string());
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string t = token();
      if (t.empty()) throw Error(ErrorKind::TruncatedBody, path.string());
      out.pixels[i] = static_cast<std::uint8_t>(std::stoi(t));
    }
  }
  if (maxval != 255) {
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>((p * 255 + maxval / 2) / maxval);
  }
  return out;
}

}  // namespace detail

inline bool is_image_extension(const std::filesystem::path& path) {
  const std::string ext = detail::lower_ext(path);
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".jpg" || ext == ".jpeg";
}

/// Decodes PNG, JPEG or 8-bit netpbm by extension. Alpha is dropped.
inline Image8 read_image(const std::filesystem::path& path) {
  const std::string ext = detail::lower_ext(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return detail::read_jpeg(path);
  if (ext == ".pgm" || ext == ".ppm") return detail::read_netpbm(path);
  throw Error(ErrorKind::UnsupportedEncoding, path.string() + ": unsupported image extension");
}

inline void write_png(const Image8& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::IoFailure, path.string() + ": " + image.message);
  }
}

inline void write_pgm(const Image8& img, const std::filesystem::path& path) {
  if (img.channels != 1) throw Error(ErrorKind::InvalidArgument, "PGM output needs a single-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace splatprune
