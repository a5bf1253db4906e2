#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "atnf/autograd.hpp"
#include "atnf/layers.hpp"
#include "atnf/tensor.hpp"

// Five-stage convolutional feature stack and the local/global feature merge.
//
// Stages 1-2 run at full resolution and carry local detail; stages 3-5 are each
// preceded by a 2x2 mean-pool and carry global context. Every stage is a 3x3
// convolution followed by ReLU.
namespace atnf::backbone {

inline constexpr int kStages = 5;
inline constexpr std::array<int, kStages> kStageChannels = {8, 8, 16, 32, 64};
/// Channel width of F_high; stages 4 and 5 are projected to it by bias-free 1x1 maps.
inline constexpr int kGlobalWidth = 16;
/// Channels of concat(F_low, F_high).
inline constexpr int kFeatureWidth = kStageChannels[0] + kGlobalWidth;

/// Downsampling factor of stage `stage` (1-based) relative to the input.
constexpr int stage_stride(int stage) { return stage <= 2 ? 1 : 1 << (stage - 2); }

struct BackboneWeights {
  std::array<ConvWeights, kStages> stages;
  Tensor project4;  // (16, 32, 1, 1)
  Tensor project5;  // (16, 64, 1, 1)
  std::uint64_t seed = 0;

  static BackboneWeights seeded(std::uint64_t seed, const std::string& prefix = "backbone");
  static BackboneWeights zeros();

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (int i = 0; i < kStages; ++i) stages[i].visit(prefix + ".stage" + std::to_string(i + 1), f);
    f(prefix + ".project4", project4);
    f(prefix + ".project5", project5);
  }
};

struct FeaturePyramid {
  std::array<FeatureMap, kStages> stages;
};

struct LocalGlobal {
  FeatureMap low;   // (8, H, W)
  FeatureMap high;  // (16, H, W)
};

/// Stage outputs for an image whose sides are divisible by 8.
FeaturePyramid extract_pyramid(const Image& image, const BackboneWeights& weights);

/// F_low = stage1 + stage2; F_high = up2(stage3) + up4(P4 stage4) + up8(P5 stage5).
LocalGlobal fuse_local_global(const FeaturePyramid& pyramid, const BackboneWeights& weights);

struct MsrbWeights {
  ConvWeights branch3;  // (width, C, 3, 3)
  ConvWeights branch5;  // (width, C, 5, 5)
  ConvWeights project;  // (C, 2*width, 1, 1)

  static MsrbWeights seeded(int channels, int width, std::uint64_t seed, const std::string& name);
  static MsrbWeights zeros(int channels, int width);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    branch3.visit(prefix + ".branch3", f);
    branch5.visit(prefix + ".branch5", f);
    project.visit(prefix + ".project", f);
  }
};

/// Multi-scale residual block: x + project(concat(relu(conv3x3 x), relu(conv5x5 x))).
FeatureMap msrb(const FeatureMap& input, const MsrbWeights& weights);

// ---- graph forms --------------------------------------------------------

/// Stages 1..`depth`; the input side must be divisible by stage_stride(depth).
std::array<ad::Var, kStages> pyramid(ad::Binder& bind, ad::Var image, const BackboneWeights& weights,
                                     int depth = kStages);
std::pair<ad::Var, ad::Var> fuse_local_global(ad::Binder& bind, const std::array<ad::Var, kStages>& stages,
                                              const BackboneWeights& weights);
/// concat(F_low, F_high) for an image: (24, H, W).
ad::Var features(ad::Binder& bind, ad::Var image, const BackboneWeights& weights);
ad::Var msrb(ad::Binder& bind, ad::Var x, const MsrbWeights& weights);

}  // namespace atnf::backbone
