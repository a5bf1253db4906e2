#include "atnf/backbone.hpp"

#include <cmath>
#include <string>

#include "atnf/error.hpp"

namespace atnf::backbone {

BackboneWeights BackboneWeights::seeded(std::uint64_t seed, const std::string& prefix) {
  BackboneWeights w;
  w.seed = seed;
  int in = 1;
  for (int i = 0; i < kStages; ++i) {
    w.stages[i] = ConvWeights::he(kStageChannels[i], in, 3, seed, prefix + ".stage" + std::to_string(i + 1));
    in = kStageChannels[i];
  }
  // Projections are linear maps, so unit-gain (not ReLU-gain) scaling.
  w.project4 = he_tensor({kGlobalWidth, kStageChannels[3], 1, 1}, seed, prefix + ".project4", std::sqrt(0.5));
  w.project5 = he_tensor({kGlobalWidth, kStageChannels[4], 1, 1}, seed, prefix + ".project5", std::sqrt(0.5));
  return w;
}

BackboneWeights BackboneWeights::zeros() {
  BackboneWeights w;
  int in = 1;
  for (int i = 0; i < kStages; ++i) {
    w.stages[i] = ConvWeights::zeros(kStageChannels[i], in, 3);
    in = kStageChannels[i];
  }
  w.project4 = Tensor({kGlobalWidth, kStageChannels[3], 1, 1}, 0.0);
  w.project5 = Tensor({kGlobalWidth, kStageChannels[4], 1, 1}, 0.0);
  return w;
}

std::array<ad::Var, kStages> pyramid(ad::Binder& bind, ad::Var image, const BackboneWeights& weights, int depth) {
  if (depth < 1 || depth > kStages) throw ArgumentError("backbone depth must be 1..5");
  const Tensor& v = image.value();
  if (v.rank() != 3 || v.channels() != 1) throw ShapeError("backbone input must be a one-channel map");
  const int need = stage_stride(depth);
  if (v.height() % need != 0 || v.width() % need != 0) {
    throw ArgumentError("backbone input " + std::to_string(v.height()) + "x" + std::to_string(v.width()) +
                        " is not divisible by " + std::to_string(need));
  }
  std::array<ad::Var, kStages> out{};
  ad::Var x = image;
  for (int i = 0; i < depth; ++i) {
    if (i >= 2) x = ad::downsample2(x);
    x = ad::relu(conv(bind, x, weights.stages[i]));
    out[i] = x;
  }
  return out;
}

std::pair<ad::Var, ad::Var> fuse_local_global(ad::Binder& bind, const std::array<ad::Var, kStages>& s,
                                              const BackboneWeights& weights) {
  for (int i = 0; i < kStages; ++i) {
    if (!s[i].valid()) throw ShapeError("fuse_local_global: pyramid is missing stage " + std::to_string(i + 1));
    const Tensor& v = s[i].value();
    if (v.rank() != 3 || v.channels() != kStageChannels[i]) {
      throw ShapeError("fuse_local_global: stage " + std::to_string(i + 1) + " has the wrong channel count");
    }
  }
  const int h = s[0].value().height(), w = s[0].value().width();
  for (int i = 1; i < kStages; ++i) {
    const int f = stage_stride(i + 1);
    if (s[i].value().height() * f != h || s[i].value().width() * f != w) {
      throw ShapeError("fuse_local_global: stage " + std::to_string(i + 1) + " resolution breaks the schedule");
    }
  }
  ad::Var low = ad::add(s[0], s[1]);
  ad::Var g3 = ad::upsample(s[2], 2);
  ad::Var g4 = ad::upsample(ad::conv2d(s[3], bind(weights.project4)), 4);
  ad::Var g5 = ad::upsample(ad::conv2d(s[4], bind(weights.project5)), 8);
  ad::Var high = ad::add(ad::add(g3, g4), g5);
  return {low, high};
}

ad::Var features(ad::Binder& bind, ad::Var image, const BackboneWeights& weights) {
  const auto stages = pyramid(bind, image, weights);
  const auto [low, high] = fuse_local_global(bind, stages, weights);
  return ad::concat({low, high});
}

FeaturePyramid extract_pyramid(const Image& image, const BackboneWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  const auto stages = pyramid(bind, g.constant(image.to_map()), weights);
  FeaturePyramid out;
  for (int i = 0; i < kStages; ++i) out.stages[i] = stages[i].value();
  return out;
}

LocalGlobal fuse_local_global(const FeaturePyramid& pyramid, const BackboneWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  std::array<ad::Var, kStages> stages{};
  for (int i = 0; i < kStages; ++i) stages[i] = g.constant(pyramid.stages[i]);
  const auto [low, high] = fuse_local_global(bind, stages, weights);
  return {low.value(), high.value()};
}

MsrbWeights MsrbWeights::seeded(int channels, int width, std::uint64_t seed, const std::string& name) {
  return {ConvWeights::he(width, channels, 3, seed, name + ".branch3"),
          ConvWeights::he(width, channels, 5, seed, name + ".branch5"),
          // Small residual branch at start so each block begins near the identity.
          ConvWeights::he(channels, 2 * width, 1, seed, name + ".project", 0.1)};
}

MsrbWeights MsrbWeights::zeros(int channels, int width) {
  return {ConvWeights::zeros(width, channels, 3), ConvWeights::zeros(width, channels, 5),
          ConvWeights::zeros(channels, 2 * width, 1)};
}

ad::Var msrb(ad::Binder& bind, ad::Var x, const MsrbWeights& weights) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.channels() != weights.branch3.in_channels() || v.channels() != weights.project.out_channels()) {
    throw ShapeError("msrb: input channels do not match the block configuration");
  }
  ad::Var b3 = ad::relu(conv(bind, x, weights.branch3));
  ad::Var b5 = ad::relu(conv(bind, x, weights.branch5));
  return ad::add(x, conv(bind, ad::concat({b3, b5}), weights.project));
}

FeatureMap msrb(const FeatureMap& input, const MsrbWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  return msrb(bind, g.constant(input), weights).value();
}

}  // namespace atnf::backbone
