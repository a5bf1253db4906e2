#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "atnf/tensor.hpp"

namespace atnf::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kArgumentError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kNumericError = 4;

/// Runs one command line (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Mirror-pads (without repeating the edge pixel) up to the next multiple of
/// `multiple` on the bottom and right.
Image reflect_pad(const Image& image, int multiple);
Image crop(const Image& image, int height, int width);

}  // namespace atnf::cli
