#include "atnf/attention.hpp"

#include <algorithm>
#include <cmath>

#include "atnf/error.hpp"

namespace atnf::attention {

namespace {

void check_ratio(int channels, int ratio) {
  if (ratio < 1 || channels % ratio != 0) {
    throw ArgumentError("channel attention ratio " + std::to_string(ratio) + " does not divide " +
                        std::to_string(channels) + " channels");
  }
}

void check_aligned(const SaliencyMap& a, const SaliencyMap& b) {
  if (!a.same_shape(b)) throw ShapeError("attention_fuse: saliency maps differ in shape");
}

// Convolution over replicate-padded input, so borders read as their nearest pixels.
ad::Var conv_replicate(ad::Binder& bind, ad::Var x, const ConvWeights& w) {
  ad::Var padded = ad::pad_replicate(x, w.kernel.dim(2) / 2);
  return ad::conv2d(padded, bind(w.kernel), bind(w.bias), 1, ad::Padding::valid);
}

}  // namespace

std::string_view to_string(CriterionMode mode) {
  switch (mode) {
    case CriterionMode::first_only: return "first-only";
    case CriterionMode::mean: return "mean";
    case CriterionMode::max: return "max";
    case CriterionMode::learned: return "learned";
  }
  return "?";
}

CriterionMode parse_criterion(std::string_view text) {
  for (auto m : {CriterionMode::first_only, CriterionMode::mean, CriterionMode::max, CriterionMode::learned}) {
    if (text == to_string(m)) return m;
  }
  throw ArgumentError("unknown fusion criterion '" + std::string(text) + "'");
}

CamWeights CamWeights::seeded(int channels, int ratio, std::uint64_t seed, const std::string& name) {
  check_ratio(channels, ratio);
  const int hidden = channels / ratio;
  return {ConvWeights::he(hidden, channels, 1, seed, name + ".squeeze"),
          ConvWeights::he(channels, hidden, 1, seed, name + ".excite", std::sqrt(0.5))};
}

CamWeights CamWeights::zeros(int channels, int ratio) {
  check_ratio(channels, ratio);
  const int hidden = channels / ratio;
  return {ConvWeights::zeros(hidden, channels, 1), ConvWeights::zeros(channels, hidden, 1)};
}

PamWeights PamWeights::seeded(std::uint64_t seed, const std::string& name) {
  PamWeights w{ConvWeights::he(1, 2, kPamKernel, seed, name + ".conv", std::sqrt(0.5))};
  w.conv.bias[0] = static_cast<float>(-std::log((1.0 - kSalientPrior) / kSalientPrior));
  return w;
}

PamWeights PamWeights::zeros() { return {ConvWeights::zeros(1, 2, kPamKernel)}; }

AttentionWeights AttentionWeights::seeded(std::uint64_t seed, const std::string& prefix) {
  return {CamWeights::seeded(backbone::kFeatureWidth, kCamRatio, seed, prefix + ".cam"),
          PamWeights::seeded(seed, prefix + ".pam"), ConvWeights::zeros(2, 4, 3)};
}

// ---- graph forms --------------------------------------------------------

ad::Var channel_attention(ad::Binder& bind, ad::Var x, const CamWeights& w) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.channels() != w.channels() || w.squeeze.in_channels() != v.channels()) {
    throw ShapeError("channel_attention: input channels do not match the module");
  }
  ad::Var pooled = ad::global_avg_pool(x);
  ad::Var hidden = ad::relu(conv(bind, pooled, w.squeeze));
  ad::Var s = ad::sigmoid(conv(bind, hidden, w.excite));
  return ad::channel_scale(x, s);
}

ad::Var spatial_attention(ad::Binder& bind, ad::Var x, const PamWeights& w) {
  if (x.value().rank() != 3) throw ShapeError("spatial_attention: input must be a feature map");
  ad::Var pooled = ad::standardize(ad::concat({ad::channel_mean(x), ad::channel_max(x)}), kDescriptorEps);
  return ad::sigmoid(conv_replicate(bind, pooled, w.conv));
}

ad::Var attention_fuse(ad::Var s_a, ad::Var s_b, CriterionMode mode, std::optional<ad::Var> logits) {
  if (!s_a.value().same_shape(s_b.value())) throw ShapeError("attention_fuse: saliency maps differ in shape");
  switch (mode) {
    case CriterionMode::first_only:
      return ad::clamp01(s_a);
    case CriterionMode::mean:
      return ad::clamp01(ad::scale(ad::add(s_a, s_b), 0.5));
    case CriterionMode::max: {
      // max(a, b) = b + relu(a - b); ties resolve to b, which equals a.
      return ad::clamp01(ad::add(s_b, ad::relu(ad::sub(s_a, s_b))));
    }
    case CriterionMode::learned: {
      if (!logits) throw ArgumentError("attention_fuse: learned mode needs logits");
      const Tensor& l = logits->value();
      const Tensor& sv = s_a.value();
      if (l.rank() != 3 || l.channels() != 2 || l.height() != sv.height() || l.width() != sv.width()) {
        throw ShapeError("attention_fuse: logits must be (2,H,W) aligned with the maps");
      }
      ad::Var w = ad::softmax_channels(*logits);
      ad::Var mixed = ad::add(ad::mul(ad::slice_channel(w, 0), s_a), ad::mul(ad::slice_channel(w, 1), s_b));
      return ad::clamp01(mixed);
    }
  }
  throw ArgumentError("attention_fuse: unknown criterion");
}

Detection detect(ad::Binder& bind, ad::Var a, ad::Var b, const backbone::BackboneWeights& backbone,
                 const AttentionWeights& w, CriterionMode mode) {
  if (!a.value().same_shape(b.value())) throw ShapeError("detect_attention: images differ in shape");
  Detection d;
  d.cam_a = channel_attention(bind, backbone::features(bind, a, backbone), w.cam);
  d.cam_b = channel_attention(bind, backbone::features(bind, b, backbone), w.cam);
  d.s_a = spatial_attention(bind, d.cam_a, w.pam);
  d.s_b = spatial_attention(bind, d.cam_b, w.pam);
  if (mode == CriterionMode::learned) {
    ad::Var pooled = ad::standardize(ad::concat({ad::channel_mean(d.cam_a), ad::channel_max(d.cam_a),
                                                 ad::channel_mean(d.cam_b), ad::channel_max(d.cam_b)}),
                                     kDescriptorEps);
    d.logits = conv_replicate(bind, pooled, w.criterion);
  }
  d.fused = attention_fuse(d.s_a, d.s_b, mode, d.logits);
  return d;
}

// ---- value forms --------------------------------------------------------

FeatureMap channel_attention(const FeatureMap& input, const CamWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  return channel_attention(bind, g.constant(input), weights).value();
}

Tensor channel_scales(const FeatureMap& input, const CamWeights& w) {
  ad::Graph g(false);
  ad::Binder bind(g);
  ad::Var pooled = ad::global_avg_pool(g.constant(input));
  ad::Var hidden = ad::relu(conv(bind, pooled, w.squeeze));
  return ad::sigmoid(conv(bind, hidden, w.excite)).value();
}

SaliencyMap spatial_attention(const FeatureMap& input, const PamWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  return SaliencyMap::from_map(spatial_attention(bind, g.constant(input), weights).value());
}

SaliencyMap attention_fuse(const SaliencyMap& s_a, const SaliencyMap& s_b, const FusionCriterion& criterion) {
  check_aligned(s_a, s_b);
  ad::Graph g(false);
  std::optional<ad::Var> logits;
  if (criterion.mode == CriterionMode::learned) {
    if (!criterion.logits) throw ArgumentError("attention_fuse: learned mode needs logits");
    logits = g.constant(*criterion.logits);
  }
  return SaliencyMap::from_map(
      attention_fuse(g.constant(s_a.to_map()), g.constant(s_b.to_map()), criterion.mode, logits).value());
}

}  // namespace atnf::attention
