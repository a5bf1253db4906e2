#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atnf/attention.hpp"
#include "atnf/autograd.hpp"
#include "atnf/backbone.hpp"
#include "atnf/layers.hpp"
#include "atnf/tensor.hpp"

namespace atnf {

/// Training phases; also the task indices of the multi-task merge.
enum class Phase : int { attention = 0, enhance = 1, main = 2 };

/// Parameter families. The attention family owns the shared backbone.
enum class Family : int { attention = 0, enhance = 1, fusion = 2 };

std::string_view to_string(Phase phase);
/// Throws ArgumentError for anything but attention, enhance, main.
Phase parse_phase(std::string_view text);
Family family_of(Phase phase);
constexpr std::uint32_t bit(Phase p) { return 1u << static_cast<int>(p); }
constexpr std::uint32_t bit(Family f) { return 1u << static_cast<int>(f); }

// ---- multi-task layer ---------------------------------------------------

/// One layer of the multi-task composition. Task l computes
/// z_l = conv3x3(x_l) and outputs ReLU(z_l + sum_{j<l} coupling[l][j] * z_j).
struct MultitaskWeights {
  std::vector<ConvWeights> convs;
  Tensor coupling;  // (T, T); only entries below the diagonal are read

  int tasks() const { return static_cast<int>(convs.size()); }

  /// Seeded convs with `out` channels each and all couplings 1.
  static MultitaskWeights seeded(const std::vector<int>& in_channels, int out, std::uint64_t seed,
                                 const std::string& name);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].visit(prefix + ".task" + std::to_string(i), f);
    f(prefix + ".coupling", coupling);
  }
};

std::vector<FeatureMap> multitask_layer(const std::vector<FeatureMap>& inputs, const MultitaskWeights& weights);
std::vector<ad::Var> multitask_layer(ad::Binder& bind, const std::vector<ad::Var>& inputs,
                                     const MultitaskWeights& weights);

// ---- enhancement autoencoder --------------------------------------------

inline constexpr int kEnhanceInputs = 2;
inline constexpr int kEnhanceWidth = 8;

/// Three encoder stages (full, 1/2, 1/4 resolution) and three decoder stages
/// with dense skips from every encoder stage into every decoder stage at the
/// same or a finer resolution.
struct EnhanceWeights {
  ConvWeights e1, e2, e3;  // 2->8, 8->16, 16->16
  ConvWeights d1, d2, d3;  // 16->16, 48->8, 48->8
  ConvWeights out;         // 8->1, 1x1

  static EnhanceWeights seeded(std::uint64_t seed, const std::string& prefix = "enhance");

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    e1.visit(prefix + ".e1", f);
    e2.visit(prefix + ".e2", f);
    e3.visit(prefix + ".e3", f);
    d1.visit(prefix + ".d1", f);
    d2.visit(prefix + ".d2", f);
    d3.visit(prefix + ".d3", f);
    out.visit(prefix + ".out", f);
  }
};

struct EnhanceOptions {
  /// Replace the innermost encoder output with zeros (skip-path diagnostics).
  bool ablate_innermost = false;
};

struct EnhanceGraph {
  ad::Var features;        // (8, H, W) pre-output decoder map
  ad::Var reconstruction;  // (1, H, W) in [0, 1]
};

/// `input` is (2, H, W) with H, W divisible by 4.
EnhanceGraph enhance_net(ad::Binder& bind, ad::Var input, const EnhanceWeights& weights,
                         const EnhanceOptions& options = {});

// ---- fusion head --------------------------------------------------------

inline constexpr int kHeadWidth = 8;
inline constexpr int kMsrbBlocks = 2;

struct FusionHeadWeights {
  std::array<backbone::MsrbWeights, kMsrbBlocks> msrb_a, msrb_b, msrb_e;
  MultitaskWeights merge;  // tasks: attention features, enhancement, fusion
  attention::CamWeights cam;
  ConvWeights out;  // 8->1, 1x1

  static FusionHeadWeights seeded(std::uint64_t seed, const std::string& prefix = "fusion");

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (int i = 0; i < kMsrbBlocks; ++i) {
      msrb_a[i].visit(prefix + ".msrb_a" + std::to_string(i), f);
      msrb_b[i].visit(prefix + ".msrb_b" + std::to_string(i), f);
      msrb_e[i].visit(prefix + ".msrb_e" + std::to_string(i), f);
    }
    merge.visit(prefix + ".merge", f);
    cam.visit(prefix + ".cam", f);
    out.visit(prefix + ".out", f);
  }
};

// ---- model --------------------------------------------------------------

struct ModelGraph {
  std::uint64_t seed = 0;
  backbone::BackboneWeights backbone;
  attention::AttentionWeights attention;
  attention::CriterionMode criterion = attention::CriterionMode::learned;
  EnhanceWeights enhance;
  FusionHeadWeights fusion;
  std::uint32_t trained = 0;  // bit(Phase)
  std::uint32_t frozen = 0;   // bit(Family)

  static ModelGraph seeded(std::uint64_t seed);

  bool is_trained(Phase p) const { return (trained & bit(p)) != 0; }
  bool is_frozen(Family f) const { return (frozen & bit(f)) != 0; }

  using Visitor = std::function<void(const std::string& name, Tensor& tensor)>;
  using ConstVisitor = std::function<void(const std::string& name, const Tensor& tensor)>;
  /// Every parameter tensor, in a fixed order, with its unique name.
  void visit(const Visitor& f);
  void visit(const ConstVisitor& f) const;
  /// Parameter tensors of one family.
  std::vector<Tensor*> family(Family f);

  friend bool operator==(const ModelGraph& a, const ModelGraph& b);
};

Family family_of_parameter(std::string_view name);

// ---- inference ----------------------------------------------------------

struct FusionOutput {
  Image fused;
  SaliencyMap saliency;
  FeatureMap enhanced;  // F_S-gated enhancement features
};

struct FuseOptions {
  /// Use this map instead of the detected F_S.
  std::optional<SaliencyMap> saliency_override;
  /// false skips the F_S products entirely (attention-free ablation).
  bool gate = true;
};

/// Everything fuse() computes before the fusion head; depends only on the
/// attention and enhancement families.
struct FrontEnd {
  ad::Var saliency;           // (1, H, W)
  ad::Var gated_a, gated_b;   // F_S * a, F_S * b
  ad::Var attention_features; // concat(CAM_a, CAM_b), 48 ch
  ad::Var features_a, features_b;  // backbone features of the gated images, 24 ch each
  ad::Var enhanced;           // F_S * enhance features, 8 ch
};

FrontEnd fuse_front(ad::Binder& bind, ad::Var a, ad::Var b, const ModelGraph& model, const FuseOptions& options = {});
/// The fusion head N; returns the fused (1, H, W) map in [0, 1].
ad::Var fuse_head(ad::Binder& bind, const FrontEnd& front, const FusionHeadWeights& head);

/// Requires a trained attention phase unless a saliency override is given (ModelError).
SaliencyMap detect_attention(const Image& a, const Image& b, const ModelGraph& model);
/// Attention map without the trained-phase check.
SaliencyMap attention_map(const Image& a, const Image& b, const ModelGraph& model);

struct Enhanced {
  Image reconstruction;
  FeatureMap features;
};
Enhanced enhance(const Image& image, const ModelGraph& model, const EnhanceOptions& options = {});

struct FuseTrace {
  FusionOutput output;
  Image gated_a, gated_b;
};
FuseTrace fuse_traced(const Image& a, const Image& b, const ModelGraph& model, const FuseOptions& options = {});
FusionOutput fuse(const Image& a, const Image& b, const ModelGraph& model, const FuseOptions& options = {});

}  // namespace atnf
