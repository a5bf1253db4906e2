#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "atnf/autograd.hpp"
#include "atnf/backbone.hpp"
#include "atnf/layers.hpp"
#include "atnf/tensor.hpp"

// Channel attention (squeeze-excitation), spatial attention, and the rule that
// combines two modalities' saliency maps into one.
namespace atnf::attention {

/// Squeeze-excitation weights: GAP -> 1x1 squeeze -> ReLU -> 1x1 excite -> sigmoid.
struct CamWeights {
  ConvWeights squeeze;  // (C/ratio, C, 1, 1)
  ConvWeights excite;   // (C, C/ratio, 1, 1)

  int channels() const { return excite.out_channels(); }

  /// Throws ArgumentError unless `ratio` divides `channels`.
  static CamWeights seeded(int channels, int ratio, std::uint64_t seed, const std::string& name);
  static CamWeights zeros(int channels, int ratio);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    squeeze.visit(prefix + ".squeeze", f);
    excite.visit(prefix + ".excite", f);
  }
};

inline constexpr int kCamRatio = 4;
inline constexpr int kPamKernel = 7;
/// Initial saliency of every pixel; sets the spatial-attention bias.
inline constexpr double kSalientPrior = 0.01;
/// Variance floor when standardizing pooled descriptors.
inline constexpr double kDescriptorEps = 1e-4;

/// sigmoid(conv7x7(standardized [channel mean, channel max]) + bias) with replicated
/// borders: weights (1, 2, 7, 7).
struct PamWeights {
  ConvWeights conv;

  static PamWeights seeded(std::uint64_t seed, const std::string& name);
  static PamWeights zeros();

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    conv.visit(prefix + ".conv", f);
  }
};

enum class CriterionMode { first_only = 0, mean = 1, max = 2, learned = 3 };

std::string_view to_string(CriterionMode mode);
/// Accepts first-only, mean, max, learned; throws ArgumentError otherwise.
CriterionMode parse_criterion(std::string_view text);

/// How two saliency maps are combined. In learned mode `logits` holds two
/// (2,H,W) channels whose per-pixel softmax gives (alpha, beta).
struct FusionCriterion {
  CriterionMode mode = CriterionMode::mean;
  std::optional<FeatureMap> logits;
};

FeatureMap channel_attention(const FeatureMap& input, const CamWeights& weights);
/// Per-channel scales s in (0,1) that channel_attention applies.
Tensor channel_scales(const FeatureMap& input, const CamWeights& weights);
SaliencyMap spatial_attention(const FeatureMap& input, const PamWeights& weights);
/// F_S = clamp(alpha * s_a + beta * s_b) per pixel.
SaliencyMap attention_fuse(const SaliencyMap& s_a, const SaliencyMap& s_b, const FusionCriterion& criterion);

/// Weights of the whole attention sub-network except the shared backbone.
struct AttentionWeights {
  CamWeights cam;
  PamWeights pam;
  /// Learned-criterion logits: conv3x3 over pooled CAM features of both
  /// modalities (4 channels) to 2 channels. Zero at start, i.e. the mean rule.
  ConvWeights criterion;

  static AttentionWeights seeded(std::uint64_t seed, const std::string& prefix = "attention");

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    cam.visit(prefix + ".cam", f);
    pam.visit(prefix + ".pam", f);
    criterion.visit(prefix + ".criterion", f);
  }
};

// ---- graph forms --------------------------------------------------------

ad::Var channel_attention(ad::Binder& bind, ad::Var x, const CamWeights& weights);
ad::Var spatial_attention(ad::Binder& bind, ad::Var x, const PamWeights& weights);
/// `logits` is only read in learned mode.
ad::Var attention_fuse(ad::Var s_a, ad::Var s_b, CriterionMode mode, std::optional<ad::Var> logits = std::nullopt);

struct Detection {
  ad::Var cam_a, cam_b;  // CAM-weighted backbone features per modality (24 ch)
  ad::Var s_a, s_b;      // per-modality saliency
  std::optional<ad::Var> logits;
  ad::Var fused;         // F_S
};

/// Shared backbone per modality, then CAM, PAM and the fusion criterion.
Detection detect(ad::Binder& bind, ad::Var a, ad::Var b, const backbone::BackboneWeights& backbone,
                 const AttentionWeights& weights, CriterionMode mode);

}  // namespace atnf::attention
