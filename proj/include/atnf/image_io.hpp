#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "atnf/tensor.hpp"

namespace atnf::io {

/// 8-bit code for an intensity: round-half-up of v*255 after clamping to [0,1].
std::uint8_t quantize(double v);
inline double dequantize(std::uint8_t q) { return q / 255.0; }

/// Snaps every pixel to the nearest 8-bit level so a save/load cycle is lossless.
Image quantized(const Image& img);

/// Reads 8-bit grayscale PNG or binary PGM (P5), chosen by file signature.
Image load_image(const std::filesystem::path& path);
/// Writes PNG unless the extension is .pgm. The write is whole-file atomic.
void save_image(const Image& img, const std::filesystem::path& path);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace atnf::io
