#include <doctest.h>

#include <cstring>
#include <set>

#include "atnf/error.hpp"
#include "atnf/model_io.hpp"
#include "atnf/network.hpp"
#include "support.hpp"

using namespace atnf;
using testing::max_abs_diff;

namespace {

std::vector<FeatureMap> task_inputs(const std::vector<int>& channels, int side, std::uint64_t seed) {
  std::vector<FeatureMap> xs;
  for (std::size_t l = 0; l < channels.size(); ++l) xs.push_back(testing::random_tensor({channels[l], side, side}, seed + l));
  return xs;
}

ModelGraph attention_ready(std::uint64_t seed) {
  ModelGraph m = ModelGraph::seeded(seed);
  m.trained |= bit(Phase::attention);
  return m;
}

std::uint32_t read_u32(const std::string& s, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, s.data() + at, 4);
  return v;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("multitask layer wiring") {
  const std::vector<int> ch = {3, 2, 4};
  MultitaskWeights w = MultitaskWeights::seeded(ch, 5, 1, "mt");
  for (auto& c : w.convs) c.bias = testing::random_tensor({5}, 2, -0.2, 0.2);
  const auto xs = task_inputs(ch, 7, 10);

  SUBCASE("zero couplings reduce every task to its own conv layer") {
    w.coupling.fill(0.0);
    const auto ys = multitask_layer(xs, w);
    for (std::size_t l = 0; l < ch.size(); ++l) {
      const FeatureMap ref = testing::naive_relu(testing::naive_conv(xs[l], w.convs[l].kernel, &w.convs[l].bias, 1, 1));
      CHECK(max_abs_diff(ys[l].values(), ref.values()) < 1e-14);
    }
  }
  SUBCASE("two tasks on impulses match the direct composition") {
    MultitaskWeights w2 = MultitaskWeights::seeded({2, 3}, 4, 3, "two");
    w2.coupling[2] = 0.7;  // coupling[1][0]
    std::vector<FeatureMap> imp = {Tensor::map(2, 6, 6), Tensor::map(3, 6, 6)};
    imp[0].at(1, 2, 3) = 1.0;
    imp[1].at(2, 4, 1) = 1.0;
    const auto ys = multitask_layer(imp, w2);
    const FeatureMap z0 = testing::naive_conv(imp[0], w2.convs[0].kernel, &w2.convs[0].bias, 1, 1);
    FeatureMap t1 = testing::naive_conv(imp[1], w2.convs[1].kernel, &w2.convs[1].bias, 1, 1);
    FeatureMap c0 = z0;
    c0 *= 0.7;
    t1 += c0;
    CHECK(max_abs_diff(ys[0].values(), testing::naive_relu(z0).values()) < 1e-14);
    CHECK(max_abs_diff(ys[1].values(), testing::naive_relu(t1).values()) < 1e-14);
  }
  SUBCASE("perturbing a task input leaves lower tasks bitwise unchanged") {
    const auto base = multitask_layer(xs, w);
    for (std::size_t l = 0; l < ch.size(); ++l) {
      auto pert = xs;
      for (double& v : pert[l].values()) v += 0.25;
      const auto ys = multitask_layer(pert, w);
      for (std::size_t j = 0; j < l; ++j) CHECK(ys[j] == base[j]);
      CHECK(ys[l] != base[l]);
    }
  }
  CHECK_THROWS_AS(multitask_layer(task_inputs({3, 2}, 7, 1), w), ShapeError);
  CHECK_THROWS_AS(multitask_layer(task_inputs({3, 3, 4}, 7, 1), w), ShapeError);
}

TEST_CASE("enhancement autoencoder") {
  const ModelGraph m = ModelGraph::seeded(4);
  const Image x = testing::random_image(16, 24, 5);
  const Enhanced e = enhance(x, m);
  CHECK(e.reconstruction.height() == 16);
  CHECK(e.reconstruction.width() == 24);
  for (double v : e.reconstruction.values()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(e.features.shape() == std::vector<int>{kEnhanceWidth, 16, 24});

  const Enhanced ablated = enhance(x, m, {.ablate_innermost = true});
  CHECK(testing::max_abs(ablated.features.values()) > 0.0);
  CHECK(ablated.features != e.features);
  CHECK_THROWS_AS(enhance(Image(10, 16), m), ArgumentError);
}

TEST_CASE("attention-guided fusion") {
  const ModelGraph m = attention_ready(6);
  const Image a = testing::random_image(16, 16, 7), b = testing::random_image(16, 16, 8);

  SUBCASE("output contract and determinism") {
    const FusionOutput f = fuse(a, b, m);
    CHECK(f.fused.height() == 16);
    CHECK(f.saliency.width() == 16);
    for (double v : f.fused.values()) CHECK((v >= 0.0 && v <= 1.0));
    const FusionOutput g = fuse(a, b, m);
    CHECK(f.fused == g.fused);
    CHECK(f.saliency == g.saliency);
    CHECK(f.enhanced == g.enhanced);
    CHECK(f.saliency == detect_attention(a, b, m));
  }
  SUBCASE("all-ones saliency equals the ungated path") {
    const FusionOutput ones = fuse(a, b, m, {.saliency_override = SaliencyMap(16, 16, 1.0)});
    FuseOptions ungated;
    ungated.gate = false;
    const FusionOutput free = fuse(a, b, m, ungated);
    CHECK(ones.fused == free.fused);
    CHECK(ones.enhanced == free.enhanced);
  }
  SUBCASE("all-zeros saliency zeroes every branch input") {
    const FuseTrace t = fuse_traced(a, b, m, {.saliency_override = SaliencyMap(16, 16, 0.0)});
    CHECK(testing::max_abs(t.gated_a.values()) == 0.0);
    CHECK(testing::max_abs(t.gated_b.values()) == 0.0);
    CHECK(testing::max_abs(t.output.enhanced.values()) == 0.0);
  }
  SUBCASE("identical inputs under the mean rule are symmetric") {
    ModelGraph mm = m;
    mm.criterion = attention::CriterionMode::mean;
    const Image a2 = a;
    CHECK(fuse(a, a2, mm).fused == fuse(a2, a, mm).fused);
  }
  CHECK_THROWS_AS(fuse(a, Image(16, 8), m), ShapeError);
  CHECK_THROWS_AS(fuse(a, b, ModelGraph::seeded(6)), ModelError);
  CHECK_THROWS_AS(fuse(a, b, m, {.saliency_override = SaliencyMap(8, 8, 1.0)}), ShapeError);
}

TEST_CASE("parameter naming and families") {
  ModelGraph m = ModelGraph::seeded(9);
  std::set<std::string> names;
  std::size_t count = 0;
  m.visit(ModelGraph::Visitor([&](const std::string& name, Tensor& t) {
    names.insert(name);
    ++count;
    CHECK(t.all_finite());
  }));
  CHECK(names.size() == count);
  CHECK(family_of_parameter("backbone.stage1.kernel") == Family::attention);
  CHECK(family_of_parameter("attention.pam.conv.bias") == Family::attention);
  CHECK(family_of_parameter("enhance.e1.kernel") == Family::enhance);
  CHECK(family_of_parameter("fusion.out.bias") == Family::fusion);
  CHECK_THROWS_AS(family_of_parameter("other.x"), ModelError);
  std::size_t fam = 0;
  for (Family f : {Family::attention, Family::enhance, Family::fusion}) fam += m.family(f).size();
  CHECK(fam == count);
  CHECK(parse_phase("main") == Phase::main);
  CHECK_THROWS_AS(parse_phase("fusion"), ArgumentError);
}

TEST_CASE("model container") {
  ModelGraph m = ModelGraph::seeded(10);
  m.trained = bit(Phase::attention) | bit(Phase::enhance);
  m.frozen = bit(Family::attention);
  m.criterion = attention::CriterionMode::max;
  const std::string bytes = model_io::serialize(m);
  CHECK(bytes.substr(0, 4) == "ATNF");
  CHECK(read_u32(bytes, 4) == model_io::kFormatVersion);
  CHECK(read_u32(bytes, 16) == backbone::kStages);

  const ModelGraph back = model_io::deserialize(bytes);
  CHECK(back == m);
  CHECK(model_io::serialize(back) == bytes);

  const auto dir = testing::scratch_dir("model");
  model_io::save(m, dir / "m.atnf");
  CHECK(model_io::load(dir / "m.atnf") == m);
  CHECK_THROWS_AS(model_io::load(dir / "missing.atnf"), DataError);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(model_io::deserialize(bad), ModelError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(model_io::deserialize(bad), ModelError);
  CHECK_THROWS_AS(model_io::deserialize(bytes.substr(0, bytes.size() - 3)), ModelError);
  CHECK_THROWS_AS(model_io::deserialize(bytes + "x"), ModelError);
  bad = bytes;
  bad[60] ^= 0x20;  // first byte of the first tensor name
  CHECK_THROWS_AS(model_io::deserialize(bad), ModelError);
}

TEST_CASE("float parameters round-trip bit-exactly") {
  ModelGraph m = ModelGraph::seeded(11);
  m.visit(ModelGraph::Visitor([](const std::string&, Tensor& t) {
    for (double v : t.values()) REQUIRE(static_cast<double>(static_cast<float>(v)) == v);
  }));
  Tensor t({3}, {0.1, 1.0 / 3.0, -2.5});
  round_to_float(t);
  CHECK(t[0] == static_cast<double>(0.1f));
  CHECK(t[2] == -2.5);
}

}  // TEST_SUITE
