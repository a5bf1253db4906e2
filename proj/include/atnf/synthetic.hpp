#pragma once

#include <cstdint>
#include <vector>

#include "atnf/tensor.hpp"

// Procedural cross-modal pairs: the same targets appear faintly over busy
// texture in modality a and brightly over a dark, blurred, noisy background in
// modality b.
namespace atnf::synthetic {

struct SyntheticPair {
  Image a;
  Image b;
  SaliencyMap truth;  // 1 on target pixels, 0 elsewhere
};

inline constexpr int kDefaultSize = 64;

/// Pair `index` of the stream `seed`; depends only on (seed, index, size).
/// Every pixel is an exact 8-bit level, so PNG storage is lossless.
SyntheticPair make_pair(std::uint64_t seed, std::uint64_t index, int size = kDefaultSize);

/// Pairs first_index .. first_index + count - 1. Throws ArgumentError for count < 1.
std::vector<SyntheticPair> gen_synthetic(std::uint64_t seed, int count, int size = kDefaultSize,
                                         std::uint64_t first_index = 0);

/// Mean of a over target pixels minus mean over background pixels.
double target_contrast(const Image& image, const SaliencyMap& truth);

}  // namespace atnf::synthetic
