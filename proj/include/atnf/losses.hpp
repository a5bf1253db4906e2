#pragma once

#include <array>
#include <optional>
#include <vector>

#include "atnf/autograd.hpp"
#include "atnf/backbone.hpp"
#include "atnf/tensor.hpp"

// Structural, perceptual and edge losses and their weighted sum.
namespace atnf::losses {

/// Windowed SSIM settings for dynamic range 1.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double c1 = 1e-4;
  double c2 = 9e-4;
  double c3 = 4.5e-4;

  /// Throws ArgumentError for an even or non-positive window, sigma <= 0 or any C <= 0.
  void validate() const;
};

/// Value of a loss and its gradient with respect to the predicted image.
struct LossValue {
  double value = 0.0;
  FeatureMap gradient;  // (1, H, W)
};

/// Mean over pixels of l * c * s computed on Gaussian windows. Windows are
/// truncated at the border and renormalised to unit mass.
double ssim_index(const Image& x, const Image& y, const SsimParams& p = {});
/// Per-pixel l * c * s.
FeatureMap ssim_map(const Image& x, const Image& y, const SsimParams& p = {});

LossValue ssim_loss(const Image& predict, const Image& reference, const SsimParams& p = {});

inline constexpr int kDefaultPerceptualStage = 3;

/// ||phi(predict) - phi(reference)||^2 / (C H W), phi = backbone output at `stage` (1..5).
LossValue perceptual_loss(const Image& predict, const Image& reference, const backbone::BackboneWeights& extractor,
                          int stage = kDefaultPerceptualStage);

/// Laplacian responses mapped from [-4, 4] to [0, 1].
FeatureMap edge_map(const Image& image);
/// ssim_loss on edge maps.
LossValue edge_loss(const Image& predict, const Image& reference, const SsimParams& p = {});

struct LossConfig {
  /// Weights of (SSIM, perceptual, edge).
  std::array<double, 3> weights = {1.0, 1.0, 1.0};
  SsimParams ssim;
  int perceptual_stage = kDefaultPerceptualStage;
};

struct LossTerms {
  double ssim = 0.0;
  double perceptual = 0.0;
  double edge = 0.0;
  double total = 0.0;
};

/// Weighted sum of the three losses, each averaged over `references`.
/// A term whose weight is zero is not evaluated and reports 0.
LossValue fusion_loss(const Image& predict, const std::vector<Image>& references, const LossConfig& config,
                      const backbone::BackboneWeights& extractor, LossTerms* terms = nullptr);

// ---- graph forms --------------------------------------------------------

/// Scalar SSIM index of two (1,H,W) maps.
ad::Var ssim_index(ad::Var x, ad::Var y, const SsimParams& p = {});
ad::Var edge_map(ad::Var image);

/// A reference image with optional precomputed backbone features and edge map
/// (both depend only on the reference, so callers may cache them).
struct Reference {
  ad::Var image;
  std::optional<ad::Var> features;
  std::optional<ad::Var> edges;
};

struct LossGraph {
  ad::Var ssim, perceptual, edge, total;
  LossTerms values() const;
};

LossGraph fusion_loss(ad::Binder& bind, ad::Var predict, const std::vector<Reference>& references,
                      const LossConfig& config, const backbone::BackboneWeights& extractor);

/// Backbone output at `stage` for a (1,H,W) image.
ad::Var perceptual_features(ad::Binder& bind, ad::Var image, const backbone::BackboneWeights& extractor, int stage);

}  // namespace atnf::losses
