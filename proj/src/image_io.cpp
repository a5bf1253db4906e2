#include "atnf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "atnf/error.hpp"

namespace atnf::io {

namespace fs = std::filesystem;

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

Image quantized(const Image& img) {
  Image out = img;
  for (double& v : out.values()) v = dequantize(quantize(v));
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot replace '" + path.string() + "': " + ec.message());
  }
}

namespace {

struct PngReadState {
  const std::string* bytes;
  std::size_t offset;
};

void png_read_from_string(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + n > st->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes->data() + st->offset, n);
  st->offset += n;
}

void png_write_to_string(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_throw(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text != nullptr) *text = msg;
  png_longjmp(png, 1);
}

Image decode_png(const std::string& bytes, const fs::path& path) {
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_throw, nullptr);
  if (png == nullptr) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  PngReadState state{&bytes, 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("invalid PNG '" + path.string() + "': " + error);
  }
  png_set_read_fn(png, &state, png_read_from_string);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 1) png_error(png, "could not convert to one channel");
  pixels.resize(static_cast<std::size_t>(width) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> data(pixels.size());
  std::transform(pixels.begin(), pixels.end(), data.begin(), dequantize);
  return Image(static_cast<int>(height), static_cast<int>(width), std::move(data));
}

std::string encode_png(const Image& img) {
  std::string out;
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_throw, nullptr);
  if (png == nullptr) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> pixels(img.size());
  std::transform(img.values().begin(), img.values().end(), pixels.begin(), quantize);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG encoding failed: " + error);
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * img.width());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_pgm(const std::string& bytes, const fs::path& path) {
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    long v = -1;
    if (!(in >> v)) throw DataError("malformed PGM header in '" + path.string() + "'");
    return v;
  };
  const long width = next_int(), height = next_int(), maxval = next_int();
  if (width < 1 || height < 1 || maxval != 255) {
    throw DataError("unsupported PGM '" + path.string() + "' (need 8-bit, maxval 255)");
  }
  in.get();  // single whitespace before the raster
  const auto offset = static_cast<std::size_t>(in.tellg());
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (bytes.size() < offset + n) throw DataError("truncated PGM '" + path.string() + "'");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = dequantize(static_cast<std::uint8_t>(bytes[offset + i]));
  return Image(static_cast<int>(height), static_cast<int>(width), std::move(data));
}

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.values()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

}  // namespace

Image load_image(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no such file: '" + path.string() + "'");
  const std::string bytes = read_file(path);
  static const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  throw DataError("'" + path.string() + "' is neither PNG nor binary PGM");
}

void save_image(const Image& img, const fs::path& path) {
  const bool pgm = path.extension() == ".pgm";
  write_file_atomic(path, pgm ? encode_pgm(img) : encode_png(img));
}

}  // namespace atnf::io
