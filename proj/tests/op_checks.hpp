#pragma once

#include <string>
#include <vector>

#include "atnf/attention.hpp"
#include "atnf/backbone.hpp"
#include "atnf/gradcheck.hpp"
#include "atnf/losses.hpp"
#include "support.hpp"

namespace testing {

struct OpCheck {
  std::string op;
  atnf::gradcheck::Report report;
};

/// Projects a tensor-valued op onto a scalar with fixed random weights.
inline atnf::ad::Var project(atnf::ad::Var y, std::uint64_t seed) {
  atnf::ad::Graph& g = *y.graph;
  return atnf::ad::sum(atnf::ad::mul(y, g.constant(random_tensor(y.value().shape(), seed ^ 0x5eed))));
}

/// Gradient checks of every differentiable building block on one seed.
/// Input sides cycle through 8..16 with the seed.
inline std::vector<OpCheck> op_gradient_checks(std::uint64_t seed, const atnf::gradcheck::Options& options = {}) {
  using namespace atnf;
  namespace ad = atnf::ad;
  const int sides[5][2] = {{8, 8}, {12, 16}, {16, 12}, {16, 16}, {8, 12}};
  const int h = sides[seed % 5][0], w = sides[seed % 5][1];
  std::vector<OpCheck> out;
  auto run = [&](const std::string& op, std::vector<gradcheck::Param> params, const gradcheck::LossBuilder& loss) {
    out.push_back({op, gradcheck::grad_check(params, loss, options)});
  };

  {
    Tensor x = random_tensor({2, h, w}, seed + 1), k = random_tensor({3, 2, 3, 3}, seed + 2), b = random_tensor({3}, seed + 3);
    run("conv", {{"x", &x}, {"k", &k}, {"b", &b}},
        [&](ad::Binder& bd) { return project(ad::conv2d(bd(x), bd(k), bd(b)), seed); });
    run("conv stride 2 valid", {{"x", &x}, {"k", &k}, {"b", &b}},
        [&](ad::Binder& bd) { return project(ad::conv2d(bd(x), bd(k), bd(b), 2, ad::Padding::valid), seed); });
  }
  {
    Tensor x = random_tensor({2, h / 2, w / 2}, seed + 4);
    run("upsample x2", {{"x", &x}}, [&](ad::Binder& bd) { return project(ad::upsample(bd(x), 2), seed); });
    run("upsample x4", {{"x", &x}}, [&](ad::Binder& bd) { return project(ad::upsample(bd(x), 4), seed); });
    Tensor y = random_tensor({2, h, w}, seed + 5);
    run("downsample", {{"x", &y}}, [&](ad::Binder& bd) { return project(ad::downsample2(bd(y)), seed); });
  }
  {
    Tensor x = random_tensor({8, h, w}, seed + 6);
    attention::CamWeights cam = attention::CamWeights::seeded(8, 4, seed, "cam");
    cam.squeeze.bias = random_tensor({2}, seed + 7, -0.2, 0.2);
    run("CAM", {{"x", &x}, {"sq.k", &cam.squeeze.kernel}, {"sq.b", &cam.squeeze.bias}, {"ex.k", &cam.excite.kernel},
                {"ex.b", &cam.excite.bias}},
        [&](ad::Binder& bd) { return project(attention::channel_attention(bd, bd(x), cam), seed); });
  }
  {
    Tensor x = random_tensor({6, h, w}, seed + 8);
    attention::PamWeights pam = attention::PamWeights::seeded(seed, "pam");
    run("PAM", {{"x", &x}, {"k", &pam.conv.kernel}, {"b", &pam.conv.bias}},
        [&](ad::Binder& bd) { return project(attention::spatial_attention(bd, bd(x), pam), seed); });
  }
  {
    Tensor s = random_tensor({1, h, w}, seed + 9, 0.0, 1.0), x = random_tensor({3, h, w}, seed + 10);
    run("gating", {{"s", &s}, {"x", &x}}, [&](ad::Binder& bd) { return project(ad::gate(bd(s), bd(x)), seed); });
  }
  {
    Tensor sa = random_tensor({1, h, w}, seed + 11, 0.0, 1.0), sb = random_tensor({1, h, w}, seed + 12, 0.0, 1.0);
    Tensor logits = random_tensor({2, h, w}, seed + 13, -2.0, 2.0);
    run("learned criterion", {{"s_a", &sa}, {"s_b", &sb}, {"logits", &logits}}, [&](ad::Binder& bd) {
      return project(attention::attention_fuse(bd(sa), bd(sb), attention::CriterionMode::learned, bd(logits)), seed);
    });
  }
  {
    Tensor x = random_tensor({4, h, w}, seed + 14);
    backbone::MsrbWeights m = backbone::MsrbWeights::seeded(4, 3, seed, "msrb");
    m.branch3.bias = random_tensor({3}, seed + 15, -0.1, 0.1);
    m.branch5.bias = random_tensor({3}, seed + 16, -0.1, 0.1);
    std::vector<gradcheck::Param> params = {{"x", &x}};
    m.visit("msrb", [&](const std::string& name, Tensor& t) { params.push_back({name, &t}); });
    run("MSRB", params, [&](ad::Binder& bd) { return project(backbone::msrb(bd, bd(x), m), seed); });
  }
  {
    Tensor x = random_tensor({1, h, w}, seed + 17, 0.1, 0.9);
    const Tensor y = random_tensor({1, h, w}, seed + 18, 0.1, 0.9);
    const backbone::BackboneWeights phi = backbone::BackboneWeights::seeded(seed);
    auto one = [](ad::Graph& g) { return g.constant(Tensor({1}, 1.0)); };
    run("SSIM loss", {{"x", &x}}, [&](ad::Binder& bd) {
      return ad::sub(one(bd.graph()), losses::ssim_index(bd(x), bd.graph().constant(y)));
    });
    run("perceptual loss", {{"x", &x}}, [&](ad::Binder& bd) {
      const int stage = losses::kDefaultPerceptualStage;
      return ad::mean_squared_error(losses::perceptual_features(bd, bd(x), phi, stage),
                                    losses::perceptual_features(bd, bd.graph().constant(y), phi, stage));
    });
    run("edge loss", {{"x", &x}}, [&](ad::Binder& bd) {
      return ad::sub(one(bd.graph()),
                     losses::ssim_index(losses::edge_map(bd(x)), losses::edge_map(bd.graph().constant(y))));
    });
  }
  return out;
}

}  // namespace testing
