#include "atnf/network.hpp"

#include <string>

#include "atnf/error.hpp"

namespace atnf {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::attention: return "attention";
    case Phase::enhance: return "enhance";
    case Phase::main: return "main";
  }
  return "?";
}

Phase parse_phase(std::string_view text) {
  for (auto p : {Phase::attention, Phase::enhance, Phase::main}) {
    if (text == to_string(p)) return p;
  }
  throw ArgumentError("unknown phase '" + std::string(text) + "' (expected attention, enhance or main)");
}

Family family_of(Phase phase) { return static_cast<Family>(static_cast<int>(phase)); }

Family family_of_parameter(std::string_view name) {
  if (name.starts_with("backbone.") || name.starts_with("attention.")) return Family::attention;
  if (name.starts_with("enhance.")) return Family::enhance;
  if (name.starts_with("fusion.")) return Family::fusion;
  throw ModelError("parameter '" + std::string(name) + "' belongs to no family");
}

// ---- multi-task layer ---------------------------------------------------

MultitaskWeights MultitaskWeights::seeded(const std::vector<int>& in_channels, int out, std::uint64_t seed,
                                          const std::string& name) {
  MultitaskWeights w;
  const int t = static_cast<int>(in_channels.size());
  for (int i = 0; i < t; ++i) {
    w.convs.push_back(ConvWeights::he(out, in_channels[i], 3, seed, name + ".task" + std::to_string(i)));
  }
  w.coupling = Tensor({t, t}, 1.0);
  return w;
}

std::vector<ad::Var> multitask_layer(ad::Binder& bind, const std::vector<ad::Var>& inputs,
                                     const MultitaskWeights& w) {
  const int t = w.tasks();
  if (static_cast<int>(inputs.size()) != t) throw ShapeError("multitask_layer: task count differs from the wiring");
  if (w.coupling.rank() != 2 || w.coupling.dim(0) != t || w.coupling.dim(1) != t) {
    throw ShapeError("multitask_layer: coupling must be (tasks, tasks)");
  }
  std::vector<ad::Var> z;
  for (int l = 0; l < t; ++l) {
    const Tensor& x = inputs[static_cast<std::size_t>(l)].value();
    if (x.rank() != 3 || x.channels() != w.convs[static_cast<std::size_t>(l)].in_channels()) {
      throw ShapeError("multitask_layer: task " + std::to_string(l) + " input channels do not match its conv");
    }
    if (l > 0 && (x.height() != inputs[0].value().height() || x.width() != inputs[0].value().width())) {
      throw ShapeError("multitask_layer: task inputs differ in resolution");
    }
    if (l > 0 && w.convs[static_cast<std::size_t>(l)].out_channels() != w.convs[0].out_channels()) {
      throw ShapeError("multitask_layer: task outputs differ in channel count");
    }
    z.push_back(conv(bind, inputs[static_cast<std::size_t>(l)], w.convs[static_cast<std::size_t>(l)]));
  }
  ad::Var coupling = bind(w.coupling);
  std::vector<ad::Var> out;
  for (int l = 0; l < t; ++l) {
    ad::Var acc = z[static_cast<std::size_t>(l)];
    for (int j = 0; j < l; ++j) {
      ad::Var c = ad::element(coupling, static_cast<std::size_t>(l * t + j));
      acc = ad::add(acc, ad::scale_by(z[static_cast<std::size_t>(j)], c));
    }
    out.push_back(ad::relu(acc));
  }
  return out;
}

std::vector<FeatureMap> multitask_layer(const std::vector<FeatureMap>& inputs, const MultitaskWeights& weights) {
  ad::Graph g(false);
  ad::Binder bind(g);
  std::vector<ad::Var> in;
  for (const auto& x : inputs) in.push_back(g.constant(x));
  std::vector<FeatureMap> out;
  for (const auto& v : multitask_layer(bind, in, weights)) out.push_back(v.value());
  return out;
}

// ---- enhancement --------------------------------------------------------

EnhanceWeights EnhanceWeights::seeded(std::uint64_t seed, const std::string& p) {
  EnhanceWeights w;
  w.e1 = ConvWeights::he(8, kEnhanceInputs, 3, seed, p + ".e1");
  w.e2 = ConvWeights::he(16, 8, 3, seed, p + ".e2");
  w.e3 = ConvWeights::he(16, 16, 3, seed, p + ".e3");
  w.d1 = ConvWeights::he(16, 16, 3, seed, p + ".d1");
  w.d2 = ConvWeights::he(8, 48, 3, seed, p + ".d2");
  w.d3 = ConvWeights::he(kEnhanceWidth, 48, 3, seed, p + ".d3");
  // Start the reconstruction near mid-grey with a small data-dependent part.
  w.out = ConvWeights::he(1, kEnhanceWidth, 1, seed, p + ".out", 0.1);
  w.out.bias[0] = 0.5;
  return w;
}

EnhanceGraph enhance_net(ad::Binder& bind, ad::Var input, const EnhanceWeights& w, const EnhanceOptions& options) {
  const Tensor& v = input.value();
  if (v.rank() != 3 || v.channels() != kEnhanceInputs) throw ShapeError("enhance: input must have two channels");
  if (v.height() % 4 != 0 || v.width() % 4 != 0) throw ArgumentError("enhance: input sides must be divisible by 4");
  ad::Var e1 = ad::relu(conv(bind, input, w.e1));
  ad::Var e2 = ad::relu(conv(bind, ad::downsample2(e1), w.e2));
  ad::Var e3 = ad::relu(conv(bind, ad::downsample2(e2), w.e3));
  if (options.ablate_innermost) e3 = input.graph->constant(Tensor(e3.shape(), 0.0));
  ad::Var d1 = ad::relu(conv(bind, e3, w.d1));
  ad::Var d2 = ad::relu(conv(bind, ad::concat({ad::upsample(d1, 2), ad::upsample(e3, 2), e2}), w.d2));
  ad::Var d3 = ad::relu(conv(
      bind, ad::concat({ad::upsample(d2, 2), ad::upsample(e3, 4), ad::upsample(e2, 2), e1}), w.d3));
  return {d3, ad::clamp01(conv(bind, d3, w.out))};
}

// ---- fusion head --------------------------------------------------------

FusionHeadWeights FusionHeadWeights::seeded(std::uint64_t seed, const std::string& p) {
  FusionHeadWeights w;
  constexpr int msrb_width = 4;
  for (int i = 0; i < kMsrbBlocks; ++i) {
    const std::string k = std::to_string(i);
    w.msrb_a[i] = backbone::MsrbWeights::seeded(backbone::kFeatureWidth, msrb_width, seed, p + ".msrb_a" + k);
    w.msrb_b[i] = backbone::MsrbWeights::seeded(backbone::kFeatureWidth, msrb_width, seed, p + ".msrb_b" + k);
    w.msrb_e[i] = backbone::MsrbWeights::seeded(kEnhanceWidth, msrb_width, seed, p + ".msrb_e" + k);
  }
  w.merge = MultitaskWeights::seeded({2 * backbone::kFeatureWidth, kEnhanceWidth, 2 * backbone::kFeatureWidth},
                                     kHeadWidth, seed, p + ".merge");
  w.cam = attention::CamWeights::seeded(kHeadWidth, attention::kCamRatio, seed, p + ".cam");
  w.out = ConvWeights::he(1, kHeadWidth, 1, seed, p + ".out", 0.1);
  w.out.bias[0] = 0.5;
  return w;
}

// ---- model --------------------------------------------------------------

ModelGraph ModelGraph::seeded(std::uint64_t seed) {
  ModelGraph m;
  m.seed = seed;
  m.backbone = backbone::BackboneWeights::seeded(seed);
  m.attention = attention::AttentionWeights::seeded(seed);
  m.enhance = EnhanceWeights::seeded(seed);
  m.fusion = FusionHeadWeights::seeded(seed);
  return m;
}

void ModelGraph::visit(const Visitor& f) {
  backbone.visit("backbone", f);
  attention.visit("attention", f);
  enhance.visit("enhance", f);
  fusion.visit("fusion", f);
}

void ModelGraph::visit(const ConstVisitor& f) const {
  const_cast<ModelGraph*>(this)->visit([&](const std::string& name, Tensor& t) { f(name, t); });
}

std::vector<Tensor*> ModelGraph::family(Family fam) {
  std::vector<Tensor*> out;
  visit([&](const std::string& name, Tensor& t) {
    if (family_of_parameter(name) == fam) out.push_back(&t);
  });
  return out;
}

bool operator==(const ModelGraph& a, const ModelGraph& b) {
  if (a.seed != b.seed || a.criterion != b.criterion || a.trained != b.trained || a.frozen != b.frozen) return false;
  std::vector<const Tensor*> ta, tb;
  a.visit([&](const std::string&, const Tensor& t) { ta.push_back(&t); });
  b.visit([&](const std::string&, const Tensor& t) { tb.push_back(&t); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!(*ta[i] == *tb[i])) return false;
  }
  return true;
}

// ---- inference ----------------------------------------------------------

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || a.channels() != 1 || !a.same_shape(b)) {
    throw ShapeError("image pair must be two one-channel maps of the same size");
  }
}

ad::Var saliency_var(ad::Graph& g, const SaliencyMap& s, const Tensor& like) {
  if (s.height() != like.height() || s.width() != like.width()) {
    throw ShapeError("saliency map is not aligned with the images");
  }
  return g.constant(s.to_map());
}

}  // namespace

FrontEnd fuse_front(ad::Binder& bind, ad::Var a, ad::Var b, const ModelGraph& model, const FuseOptions& options) {
  check_pair(a.value(), b.value());
  ad::Graph& g = bind.graph();
  const auto det = attention::detect(bind, a, b, model.backbone, model.attention, model.criterion);
  FrontEnd f;
  f.saliency = options.saliency_override ? saliency_var(g, *options.saliency_override, a.value()) : det.fused;
  f.attention_features = ad::concat({det.cam_a, det.cam_b});
  const auto enh = enhance_net(bind, ad::concat({a, b}), model.enhance);
  if (options.gate) {
    f.gated_a = ad::mul(f.saliency, a);
    f.gated_b = ad::mul(f.saliency, b);
    f.enhanced = ad::gate(f.saliency, enh.features);
  } else {
    f.gated_a = a;
    f.gated_b = b;
    f.enhanced = enh.features;
  }
  f.features_a = backbone::features(bind, f.gated_a, model.backbone);
  f.features_b = backbone::features(bind, f.gated_b, model.backbone);
  return f;
}

ad::Var fuse_head(ad::Binder& bind, const FrontEnd& front, const FusionHeadWeights& head) {
  ad::Var ba = front.features_a, bb = front.features_b, be = front.enhanced;
  for (int i = 0; i < kMsrbBlocks; ++i) {
    ba = backbone::msrb(bind, ba, head.msrb_a[i]);
    bb = backbone::msrb(bind, bb, head.msrb_b[i]);
    be = backbone::msrb(bind, be, head.msrb_e[i]);
  }
  const auto tasks = multitask_layer(bind, {front.attention_features, be, ad::concat({ba, bb})}, head.merge);
  ad::Var y = attention::channel_attention(bind, tasks[static_cast<int>(Phase::main)], head.cam);
  return ad::clamp01(conv(bind, y, head.out));
}

SaliencyMap attention_map(const Image& a, const Image& b, const ModelGraph& model) {
  ad::Graph g(false);
  ad::Binder bind(g);
  ad::Var va = g.constant(a.to_map()), vb = g.constant(b.to_map());
  check_pair(va.value(), vb.value());
  const auto det = attention::detect(bind, va, vb, model.backbone, model.attention, model.criterion);
  return SaliencyMap::from_map(det.fused.value());
}

SaliencyMap detect_attention(const Image& a, const Image& b, const ModelGraph& model) {
  if (!model.is_trained(Phase::attention)) throw ModelError("model has no trained attention weights");
  return attention_map(a, b, model);
}

Enhanced enhance(const Image& image, const ModelGraph& model, const EnhanceOptions& options) {
  ad::Graph g(false);
  ad::Binder bind(g);
  ad::Var x = g.constant(image.to_map());
  const auto out = enhance_net(bind, ad::concat({x, x}), model.enhance, options);
  return {Image::from_map(out.reconstruction.value()), out.features.value()};
}

FuseTrace fuse_traced(const Image& a, const Image& b, const ModelGraph& model, const FuseOptions& options) {
  if (!options.saliency_override && options.gate && !model.is_trained(Phase::attention)) {
    throw ModelError("model has no trained attention weights");
  }
  ad::Graph g(false);
  ad::Binder bind(g);
  const FrontEnd front = fuse_front(bind, g.constant(a.to_map()), g.constant(b.to_map()), model, options);
  ad::Var fused = fuse_head(bind, front, model.fusion);
  FuseTrace t;
  t.output.fused = Image::from_map(fused.value());
  t.output.saliency = SaliencyMap::from_map(front.saliency.value());
  t.output.enhanced = front.enhanced.value();
  t.gated_a = Image::from_map(front.gated_a.value());
  t.gated_b = Image::from_map(front.gated_b.value());
  return t;
}

FusionOutput fuse(const Image& a, const Image& b, const ModelGraph& model, const FuseOptions& options) {
  return fuse_traced(a, b, model, options).output;
}

}  // namespace atnf
