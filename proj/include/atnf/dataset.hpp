#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atnf/synthetic.hpp"
#include "atnf/tensor.hpp"

namespace atnf {

/// An aligned image pair, optionally with a target mask.
struct Sample {
  std::string name;
  Image a;
  Image b;
  std::optional<SaliencyMap> truth;
};

std::vector<Sample> to_samples(const std::vector<synthetic::SyntheticPair>& pairs, std::uint64_t first_index = 0);

/// Writes <name>_a.png, <name>_b.png, <name>_mask.png per sample and a
/// manifest.json listing them. Creates `dir` if needed.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   std::optional<std::uint64_t> seed = std::nullopt);

/// Reads a directory written by write_dataset. Without a manifest, pairs are
/// found by the *_a / *_b naming (PNG or PGM), masks by *_mask. Pairs are
/// returned sorted by name. Throws DataError for a missing or empty directory
/// or misaligned images.
std::vector<Sample> read_dataset(const std::filesystem::path& dir);

}  // namespace atnf
