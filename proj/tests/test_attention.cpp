#include <doctest.h>

#include <cmath>

#include "atnf/attention.hpp"
#include "atnf/error.hpp"
#include "atnf/network.hpp"
#include "support.hpp"

using namespace atnf;
using namespace atnf::attention;
using testing::max_abs_diff;

namespace {

SaliencyMap random_saliency(int h, int w, std::uint64_t seed) {
  const Image img = testing::random_image(h, w, seed);
  return SaliencyMap(h, w, std::vector<double>(img.values().begin(), img.values().end()));
}

Tensor direct_scales(const FeatureMap& x, const CamWeights& w) {
  const int c = x.channels(), r = w.squeeze.out_channels();
  std::vector<double> m(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    for (double v : x.channel(i)) m[i] += v;
    m[i] /= static_cast<double>(x.plane());
  }
  std::vector<double> h(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    double s = w.squeeze.bias[j];
    for (int i = 0; i < c; ++i) s += w.squeeze.kernel[j * c + i] * m[i];
    h[j] = std::max(0.0, s);
  }
  Tensor out({c, 1, 1});
  for (int i = 0; i < c; ++i) {
    double s = w.excite.bias[i];
    for (int j = 0; j < r; ++j) s += w.excite.kernel[i * r + j] * h[j];
    out[i] = testing::sigmoid(s);
  }
  return out;
}

// Channel mean and max, per-plane standardisation, replicated 7x7 conv, sigmoid.
std::vector<double> direct_pam(const FeatureMap& x, const PamWeights& w) {
  const int h = x.height(), wd = x.width(), n = h * wd;
  std::vector<double> desc(2 * static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    double sum = 0.0, mx = -INFINITY;
    for (int c = 0; c < x.channels(); ++c) {
      sum += x[c * n + p];
      mx = std::max(mx, x[c * n + p]);
    }
    desc[p] = sum / x.channels();
    desc[n + p] = mx;
  }
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0, var = 0.0;
    for (int p = 0; p < n; ++p) mean += desc[d * n + p];
    mean /= n;
    for (int p = 0; p < n; ++p) var += (desc[d * n + p] - mean) * (desc[d * n + p] - mean);
    const double sd = std::sqrt(var / n + kDescriptorEps);
    for (int p = 0; p < n; ++p) desc[d * n + p] = (desc[d * n + p] - mean) / sd;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < wd; ++xx) {
      double s = w.conv.bias[0];
      for (int d = 0; d < 2; ++d)
        for (int ky = 0; ky < 7; ++ky)
          for (int kx = 0; kx < 7; ++kx) {
            const int sy = std::clamp(y + ky - 3, 0, h - 1), sx = std::clamp(xx + kx - 3, 0, wd - 1);
            s += w.conv.kernel[(d * 7 + ky) * 7 + kx] * desc[d * n + sy * wd + sx];
          }
      out[y * wd + xx] = testing::sigmoid(s);
    }
  return out;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("channel attention") {
  const FeatureMap x = testing::random_tensor({8, 6, 6}, 1);
  SUBCASE("zero weights halve every channel") {
    const FeatureMap y = channel_attention(x, CamWeights::zeros(8, 4));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == 0.5 * x[i]);
  }
  SUBCASE("constant-per-channel input matches pool, affine, sigmoid") {
    CamWeights w = CamWeights::seeded(8, 4, 3, "cam");
    w.squeeze.bias = testing::random_tensor({2}, 4, -0.2, 0.2);
    w.excite.bias = testing::random_tensor({8}, 5, -0.2, 0.2);
    FeatureMap c = Tensor::map(8, 5, 5);
    for (int i = 0; i < 8; ++i)
      for (double& v : c.channel(i)) v = 0.1 * (i - 3);
    const Tensor s = channel_scales(c, w);
    const Tensor ref = direct_scales(c, w);
    CHECK(max_abs_diff(s.values(), ref.values()) < 1e-14);
    const FeatureMap y = channel_attention(c, w);
    for (int i = 0; i < 8; ++i)
      for (double v : y.channel(i)) CHECK(v == doctest::Approx(0.1 * (i - 3) * ref[i]).epsilon(1e-14));
  }
  SUBCASE("never flips a sign") {
    const FeatureMap y = channel_attention(x, CamWeights::seeded(8, 4, 6, "cam"));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK((y[i] > 0) == (x[i] > 0));
      CHECK((y[i] < 0) == (x[i] < 0));
    }
  }
  CHECK_THROWS_AS(CamWeights::seeded(6, 4, 1, "cam"), ArgumentError);
}

TEST_CASE("spatial attention") {
  const SaliencyMap half = spatial_attention(testing::random_tensor({5, 6, 7}, 7), PamWeights::zeros());
  for (double v : half.values()) CHECK(v == 0.5);

  SUBCASE("seeded weights on an impulse feature match the direct evaluation") {
    PamWeights w = PamWeights::seeded(8, "pam");
    CHECK(w.conv.bias[0] == doctest::Approx(std::log(kSalientPrior / (1 - kSalientPrior))).epsilon(1e-7));
    FeatureMap imp = Tensor::map(3, 9, 10);
    imp.at(1, 4, 6) = 2.0;
    imp.at(2, 0, 0) = -1.0;
    const SaliencyMap s = spatial_attention(imp, w);
    CHECK(max_abs_diff(s.values(), direct_pam(imp, w)) < 1e-14);
    const FeatureMap r = testing::random_tensor({4, 8, 8}, 9);
    CHECK(max_abs_diff(spatial_attention(r, w).values(), direct_pam(r, w)) < 1e-14);
  }
  SUBCASE("output lies in [0, 1]") {
    const SaliencyMap s = spatial_attention(testing::random_tensor({4, 8, 8}, 10, -50, 50), PamWeights::seeded(2, "p"));
    for (double v : s.values()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("attention fuse rules") {
  const SaliencyMap a = random_saliency(5, 6, 11), b = random_saliency(5, 6, 12);
  CHECK(attention_fuse(a, b, {CriterionMode::first_only, {}}) == a);
  const SaliencyMap mean = attention_fuse(a, b, {CriterionMode::mean, {}});
  const SaliencyMap mx = attention_fuse(a, b, {CriterionMode::max, {}});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(mean[i] == doctest::Approx((a[i] + b[i]) / 2).epsilon(1e-15));
    CHECK(mx[i] == std::max(a[i], b[i]));
  }

  SUBCASE("learned mode is a per-pixel softmax-weighted sum") {
    const FeatureMap logits = testing::random_tensor({2, 5, 6}, 13, -3, 3);
    const SaliencyMap f = attention_fuse(a, b, {CriterionMode::learned, logits});
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double ea = std::exp(logits[i]), eb = std::exp(logits[n + i]);
      CHECK(f[i] == doctest::Approx((ea * a[i] + eb * b[i]) / (ea + eb)).epsilon(1e-14));
    }
    FeatureMap hard = Tensor::map(2, 5, 6);
    for (std::size_t i = 0; i < n; ++i) hard[i] = 60.0, hard[n + i] = -60.0;
    const SaliencyMap pa = attention_fuse(a, b, {CriterionMode::learned, hard});
    CHECK(max_abs_diff(pa.values(), a.values()) < 1e-15);
  }
  SUBCASE("idempotent on equal inputs for every rule") {
    const FeatureMap logits = testing::random_tensor({2, 5, 6}, 14, -3, 3);
    for (auto mode : {CriterionMode::first_only, CriterionMode::mean, CriterionMode::max, CriterionMode::learned}) {
      const SaliencyMap f = attention_fuse(a, a, {mode, logits});
      CHECK(max_abs_diff(f.values(), a.values()) < 1e-15);
    }
  }
  CHECK_THROWS_AS(attention_fuse(a, random_saliency(5, 5, 1), {CriterionMode::mean, {}}), ShapeError);
  CHECK_THROWS_AS(attention_fuse(a, b, {CriterionMode::learned, {}}), ArgumentError);
}

TEST_CASE("criterion names") {
  for (auto mode : {CriterionMode::first_only, CriterionMode::mean, CriterionMode::max, CriterionMode::learned})
    CHECK(parse_criterion(to_string(mode)) == mode);
  CHECK(parse_criterion("first-only") == CriterionMode::first_only);
  CHECK_THROWS_AS(parse_criterion("median"), ArgumentError);
}

TEST_CASE("detection with shared weights") {
  ModelGraph m = ModelGraph::seeded(21);
  m.criterion = CriterionMode::mean;
  const Image x = testing::random_image(16, 16, 22), y = testing::random_image(16, 16, 23);

  SUBCASE("identical images give the single-modality map") {
    const auto lg = backbone::fuse_local_global(backbone::extract_pyramid(x, m.backbone), m.backbone);
    FeatureMap f = Tensor::map(backbone::kFeatureWidth, 16, 16);
    std::copy(lg.low.values().begin(), lg.low.values().end(), f.values().begin());
    std::copy(lg.high.values().begin(), lg.high.values().end(),
              f.values().begin() + static_cast<std::ptrdiff_t>(lg.low.size()));
    const SaliencyMap single = spatial_attention(channel_attention(f, m.attention.cam), m.attention.pam);
    CHECK(max_abs_diff(attention_map(x, x, m).values(), single.values()) < 1e-12);
  }
  SUBCASE("swapping the inputs under the mean rule gives the identical map") {
    CHECK(attention_map(x, y, m) == attention_map(y, x, m));
  }
  SUBCASE("range and trained-phase requirement") {
    m.criterion = CriterionMode::learned;
    const SaliencyMap s = attention_map(x, y, m);
    for (double v : s.values()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS_AS(detect_attention(x, y, m), ModelError);
    m.trained |= bit(Phase::attention);
    CHECK(detect_attention(x, y, m) == attention_map(x, y, m));
  }
}

}  // TEST_SUITE
