#include "atnf/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"
#include "atnf/parallel.hpp"
#include "atnf/random.hpp"

namespace atnf::training {

// ---- configuration ------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning rate must be positive");
  if (steps < 1) throw ArgumentError("steps must be at least 1");
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ArgumentError("Adam epsilon must be positive");
  if (loss_weights) {
    for (double w : *loss_weights) {
      if (!std::isfinite(w) || w < 0.0) throw ArgumentError("loss weights must be finite and non-negative");
    }
  }
  if (perceptual_stage < 1 || perceptual_stage > backbone::kStages) {
    throw ArgumentError("perceptual stage must be 1..5");
  }
}

losses::LossConfig TrainConfig::loss_config() const {
  losses::LossConfig c;
  c.perceptual_stage = perceptual_stage;
  if (loss_weights) {
    c.weights = *loss_weights;
  } else if (phase == Phase::attention) {
    c.weights = {1.0, 0.0, 1.0};
  }
  return c;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ArgumentError("config: '" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

long long parse_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ArgumentError("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace

void apply_config_text(TrainConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = unquote(trim(line.substr(eq + 1)));
    if (key == "seed") {
      const long long v = parse_int(key, value);
      if (v < 0) throw ArgumentError("config: seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "learning_rate" || key == "lr") {
      c.learning_rate = parse_double(key, value);
    } else if (key == "batch_size" || key == "batch") {
      c.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "steps") {
      c.steps = static_cast<int>(parse_int(key, value));
    } else if (key == "optimizer") {
      if (value == "adam") c.optimizer = Optimizer::adam;
      else if (value == "sgd") c.optimizer = Optimizer::sgd;
      else throw ArgumentError("config: optimizer must be adam or sgd");
    } else if (key == "beta1") {
      c.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      c.beta2 = parse_double(key, value);
    } else if (key == "epsilon") {
      c.epsilon = parse_double(key, value);
    } else if (key == "phase") {
      c.phase = parse_phase(value);
    } else if (key == "perceptual_stage") {
      c.perceptual_stage = static_cast<int>(parse_int(key, value));
    } else if (key == "loss_weights") {
      std::string_view v = value;
      if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
      std::array<double, 3> w{};
      std::size_t k = 0;
      while (true) {
        const auto comma = v.find(',');
        if (k == 3) throw ArgumentError("config: loss_weights takes three numbers");
        w[k++] = parse_double(key, trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v = v.substr(comma + 1);
      }
      if (k != 3) throw ArgumentError("config: loss_weights takes three numbers");
      c.loss_weights = w;
    } else {
      throw ArgumentError("config: unknown key '" + key + "'");
    }
  }
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  apply_config_text(base, io::read_file(path));
  return base;
}

// ---- losses per phase ---------------------------------------------------

namespace {

struct Item {
  std::size_t sample;
  int side;  // enhance phase: 0 -> a, 1 -> b
};

// Frozen-front-end values of one pair for the main phase.
struct FrontCache {
  Tensor saliency, gated_a, gated_b, attention_features, features_a, features_b, enhanced;
  std::vector<Tensor> ref_features, ref_edges;
};

FrontCache build_cache(const ModelGraph& model, const Sample& s, const losses::LossConfig& loss) {
  ad::Graph g(false);
  ad::Binder bind(g);
  ad::Var a = g.constant(s.a.to_map()), b = g.constant(s.b.to_map());
  const FrontEnd f = fuse_front(bind, a, b, model);
  FrontCache c{f.saliency.value(),   f.gated_a.value(),    f.gated_b.value(), f.attention_features.value(),
               f.features_a.value(), f.features_b.value(), f.enhanced.value(), {}, {}};
  for (ad::Var r : {a, b}) {
    if (loss.weights[1] != 0.0) {
      c.ref_features.push_back(losses::perceptual_features(bind, r, model.backbone, loss.perceptual_stage).value());
    }
    if (loss.weights[2] != 0.0) c.ref_edges.push_back(losses::edge_map(r).value());
  }
  return c;
}

losses::LossGraph main_loss_cached(ad::Binder& bind, const ModelGraph& model, const Sample& s, const FrontCache& c,
                                   const losses::LossConfig& loss) {
  ad::Graph& g = bind.graph();
  FrontEnd f;
  f.saliency = g.constant(c.saliency);
  f.gated_a = g.constant(c.gated_a);
  f.gated_b = g.constant(c.gated_b);
  f.attention_features = g.constant(c.attention_features);
  f.features_a = g.constant(c.features_a);
  f.features_b = g.constant(c.features_b);
  f.enhanced = g.constant(c.enhanced);
  ad::Var fused = fuse_head(bind, f, model.fusion);
  std::vector<losses::Reference> refs;
  const Image* images[2] = {&s.a, &s.b};
  for (std::size_t i = 0; i < 2; ++i) {
    losses::Reference r{g.constant(images[i]->to_map()), std::nullopt, std::nullopt};
    if (!c.ref_features.empty()) r.features = g.constant(c.ref_features[i]);
    if (!c.ref_edges.empty()) r.edges = g.constant(c.ref_edges[i]);
    refs.push_back(r);
  }
  return losses::fusion_loss(bind, fused, refs, loss, model.backbone);
}

void check_sizes(const std::vector<Sample>& data) {
  for (const auto& s : data) {
    if (!s.a.same_shape(s.b)) throw DataError("pair '" + s.name + "' has images of different sizes");
    if (s.a.height() % 8 != 0 || s.a.width() % 8 != 0) {
      throw DataError("pair '" + s.name + "' is " + std::to_string(s.a.height()) + "x" + std::to_string(s.a.width()) +
                      "; training needs sides divisible by 8");
    }
  }
}

std::vector<Item> phase_items(const std::vector<Sample>& data, Phase phase) {
  std::vector<Item> items;
  for (std::size_t i = 0; i < data.size(); ++i) {
    items.push_back({i, 0});
    if (phase == Phase::enhance) items.push_back({i, 1});
  }
  return items;
}

losses::LossTerms mean_terms(const std::vector<losses::LossTerms>& t) {
  losses::LossTerms m;
  for (const auto& x : t) {
    m.ssim += x.ssim;
    m.perceptual += x.perceptual;
    m.edge += x.edge;
    m.total += x.total;
  }
  const double n = static_cast<double>(t.size());
  m.ssim /= n;
  m.perceptual /= n;
  m.edge /= n;
  m.total /= n;
  return m;
}

}  // namespace

losses::LossGraph phase_loss(ad::Binder& bind, const ModelGraph& model, const Sample& s, Phase phase,
                             const losses::LossConfig& loss, int enhance_side) {
  ad::Graph& g = bind.graph();
  switch (phase) {
    case Phase::attention: {
      if (!s.truth) throw DataError("pair '" + s.name + "' has no target mask for attention training");
      const auto det = attention::detect(bind, g.constant(s.a.to_map()), g.constant(s.b.to_map()), model.backbone,
                                         model.attention, model.criterion);
      return losses::fusion_loss(bind, det.fused, {{g.constant(s.truth->to_map()), std::nullopt, std::nullopt}}, loss,
                                 model.backbone);
    }
    case Phase::enhance: {
      ad::Var x = g.constant((enhance_side == 0 ? s.a : s.b).to_map());
      const auto out = enhance_net(bind, ad::concat({x, x}), model.enhance);
      return losses::fusion_loss(bind, out.reconstruction, {{x, std::nullopt, std::nullopt}}, loss, model.backbone);
    }
    case Phase::main: {
      ad::Var a = g.constant(s.a.to_map()), b = g.constant(s.b.to_map());
      const FrontEnd f = fuse_front(bind, a, b, model);
      ad::Var fused = fuse_head(bind, f, model.fusion);
      return losses::fusion_loss(bind, fused, {{a, std::nullopt, std::nullopt}, {b, std::nullopt, std::nullopt}}, loss,
                                 model.backbone);
    }
  }
  throw ArgumentError("unknown phase");
}

// ---- training loop ------------------------------------------------------

TrainResult train_phase(ModelGraph model, const std::vector<Sample>& data, const TrainConfig& config) {
  {
    TrainConfig probe = config;
    probe.steps = std::max(1, probe.steps);
    probe.validate();
  }
  if (config.steps < 0) throw ArgumentError("steps must be non-negative");
  if (config.steps == 0) return {std::move(model), {}};
  if (data.empty()) throw DataError("training data is empty");
  check_sizes(data);
  const Phase phase = config.phase;
  if (phase == Phase::main && !(model.is_trained(Phase::attention) && model.is_trained(Phase::enhance))) {
    throw StateError("main phase needs trained attention and enhance phases first");
  }
  if (phase == Phase::attention) {
    for (const auto& s : data) {
      if (!s.truth) throw DataError("pair '" + s.name + "' has no target mask for attention training");
    }
  }
  const losses::LossConfig loss = config.loss_config();
  const std::vector<Tensor*> params = model.family(family_of(phase));
  const ad::Binder::TensorSet trainable(params.begin(), params.end());

  std::vector<FrontCache> cache;
  if (phase == Phase::main) {
    cache.resize(data.size());
    parallel_for(data.size(), [&](std::size_t i) { cache[i] = build_cache(model, data[i], loss); });
  }

  const std::vector<Item> items = phase_items(data, phase);
  Rng order_rng(config.seed, std::string("batches.") + std::string(to_string(phase)));
  std::vector<std::size_t> order(items.size());
  std::size_t cursor = order.size();
  auto next_item = [&] {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.bits() % i)]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  std::vector<Tensor> m1, m2;
  for (const Tensor* p : params) {
    m1.emplace_back(p->shape(), 0.0);
    m2.emplace_back(p->shape(), 0.0);
  }
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  TrainResult result;
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<std::size_t> picked(batch);
    for (auto& k : picked) k = next_item();
    std::vector<std::vector<Tensor>> grads(batch);
    std::vector<losses::LossTerms> terms(batch);
    parallel_for(batch, [&](std::size_t k) {
      const Item item = items[picked[k]];
      const Sample& s = data[item.sample];
      ad::Graph g;
      ad::Binder bind(g, &trainable);
      const losses::LossGraph lg = phase == Phase::main ? main_loss_cached(bind, model, s, cache[item.sample], loss)
                                                        : phase_loss(bind, model, s, phase, loss, item.side);
      terms[k] = lg.values();
      if (!std::isfinite(terms[k].total)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " on pair '" + s.name + "'");
      }
      g.backward(lg.total);
      for (const Tensor* p : params) grads[k].push_back(bind.gradient(*p));
    });
    result.curve.push_back({step, mean_terms(terms)});

    const double inv = 1.0 / static_cast<double>(batch);
    const double bc1 = 1.0 - std::pow(config.beta1, step);
    const double bc2 = 1.0 - std::pow(config.beta2, step);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Tensor grad = grads[0][pi];
      for (std::size_t k = 1; k < batch; ++k) grad += grads[k][pi];
      grad *= inv;
      if (!grad.all_finite()) throw NumericError("non-finite gradient at step " + std::to_string(step));
      Tensor& p = *params[pi];
      if (config.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * grad[i];
      } else {
        for (std::size_t i = 0; i < p.size(); ++i) {
          m1[pi][i] = config.beta1 * m1[pi][i] + (1.0 - config.beta1) * grad[i];
          m2[pi][i] = config.beta2 * m2[pi][i] + (1.0 - config.beta2) * grad[i] * grad[i];
          const double mh = m1[pi][i] / bc1, vh = m2[pi][i] / bc2;
          p[i] -= config.learning_rate * mh / (std::sqrt(vh) + config.epsilon);
        }
      }
      round_to_float(p);
    }
  }
  model.trained |= bit(phase);
  if (phase != Phase::main) model.frozen |= bit(family_of(phase));
  result.model = std::move(model);
  return result;
}

losses::LossTerms dataset_loss(const ModelGraph& model, const std::vector<Sample>& data, const TrainConfig& config) {
  if (data.empty()) throw DataError("dataset is empty");
  check_sizes(data);
  const losses::LossConfig loss = config.loss_config();
  const auto items = phase_items(data, config.phase);
  std::vector<losses::LossTerms> terms(items.size());
  parallel_for(items.size(), [&](std::size_t k) {
    ad::Graph g(false);
    ad::Binder bind(g);
    terms[k] = phase_loss(bind, model, data[items[k].sample], config.phase, loss, items[k].side).values();
  });
  return mean_terms(terms);
}

// ---- gradient diagnostics -----------------------------------------------

namespace {

losses::LossConfig default_loss(Phase phase) {
  TrainConfig c;
  c.phase = phase;
  return c.loss_config();
}

}  // namespace

gradcheck::Report grad_check(ModelGraph& model, const Sample& sample, Phase phase, const gradcheck::Options& options,
                             const std::vector<std::string>& names) {
  std::vector<gradcheck::Param> params;
  model.visit([&](const std::string& name, Tensor& t) {
    if (names.empty() || std::find(names.begin(), names.end(), name) != names.end()) params.push_back({name, &t});
  });
  if (!names.empty() && params.size() != names.size()) throw ArgumentError("grad_check: unknown parameter name");
  const losses::LossConfig loss = default_loss(phase);
  return gradcheck::grad_check(
      params, [&](ad::Binder& bind) { return phase_loss(bind, model, sample, phase, loss).total; }, options);
}

std::vector<std::pair<std::string, Tensor>> model_gradients(ModelGraph& model, const Sample& sample, Phase phase,
                                                            std::uint32_t trainable_families) {
  ad::Binder::TensorSet trainable;
  std::vector<std::pair<std::string, const Tensor*>> all;
  model.visit([&](const std::string& name, Tensor& t) {
    all.push_back({name, &t});
    if (trainable_families & bit(family_of_parameter(name))) trainable.insert(&t);
  });
  ad::Graph g;
  ad::Binder bind(g, &trainable);
  const auto lg = phase_loss(bind, model, sample, phase, default_loss(phase));
  g.backward(lg.total);
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : all) out.push_back({name, bind.gradient(*t)});
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "iteration,L_SSIM,L_Perceptual,L_Edge,L_f\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", p.step, p.terms.ssim, p.terms.perceptual,
                  p.terms.edge, p.terms.total);
    out += buf;
  }
  return out;
}

}  // namespace atnf::training
