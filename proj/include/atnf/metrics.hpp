#pragma once

#include <string>
#include <vector>

#include "atnf/losses.hpp"
#include "atnf/tensor.hpp"

// Objective fusion metrics and two classical reference fusers.
namespace atnf::metrics {

/// Mean over the (H-1)(W-1) pixels with both forward differences of
/// sqrt((dx^2 + dy^2) / 2). Throws ArgumentError if H or W < 2.
double avg_gradient(const Image& image);

/// Shannon entropy (bits) of the 256-bin histogram of 8-bit codes.
double entropy(const Image& image);

/// H(a) + H(b) - H(a, b) from the 256 x 256 joint histogram, in bits.
double mutual_information(const Image& a, const Image& b);

/// losses::ssim_index with default parameters.
double ssim_metric(const Image& fused, const Image& source);

Image baseline_average(const Image& a, const Image& b);

/// Laplacian-pyramid fusion: per-level max-|coefficient| selection (ties go to
/// a), mean of the coarsest level, reconstruction, clamp.
Image baseline_lp_fuse(const Image& a, const Image& b, int levels);
/// Deepest pyramid that fits, capped at `cap`.
int max_pyramid_levels(int height, int width, int cap = 4);

struct MetricReport {
  std::string pair;
  std::string method;
  double ssim_a = 0, ssim_b = 0;
  double mi_a = 0, mi_b = 0;
  double ag = 0;
  double en = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport eval_report(const Image& fused, const Image& source_a, const Image& source_b, const std::string& pair,
                         const std::string& method);

inline constexpr const char* kCsvHeader = "pair,method,ssim_a,ssim_b,mi_a,mi_b,ag,en";

/// Header line plus one row per report; reals use 17 significant digits.
std::string to_csv(const std::vector<MetricReport>& reports);
/// Inverse of to_csv. Throws DataError on a bad header or row.
std::vector<MetricReport> from_csv(const std::string& text);
/// JSON array of objects with the CSV column names as keys.
std::string to_json(const std::vector<MetricReport>& reports);

}  // namespace atnf::metrics
