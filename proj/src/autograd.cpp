#include "atnf/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atnf/error.hpp"

namespace atnf::ad {

const Tensor& Var::value() const {
  if (!valid()) throw StateError("variable has no recorded value");
  return graph->value(*this);
}

Var Graph::constant(Tensor value) { return leaf(std::move(value), false); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && record_;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::emit(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return emit(std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Graph::emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.graph != this) throw StateError("op mixes variables from different graphs");
    needs = needs || node(p).requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs && record_;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw StateError("variable was not recorded by this graph");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Graph::Node& Graph::node(Var v) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->node(v));
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

void Graph::backward(Var root) {
  const Node& r = node(root);
  if (r.value.size() != 1) throw ShapeError("backward(root) needs a scalar root; pass an upstream gradient");
  backward(root, Tensor(r.value.shape(), 1.0));
}

void Graph::backward(Var root, const Tensor& upstream) {
  if (!record_) throw StateError("graph was built without recording; no backward pass is available");
  Node& r = node(root);
  if (!upstream.same_shape(r.value)) throw ShapeError("upstream gradient shape differs from the node value");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  backward_done_ = true;
  if (!r.requires_grad) return;
  r.grad = upstream;
  r.has_grad = true;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

const Tensor* Graph::grad_if_any(Var v) const {
  if (!backward_done_) throw StateError("no backward pass has been run on this graph");
  const Node& n = node(v);
  return n.has_grad ? &n.grad : nullptr;
}

Tensor Graph::grad(Var v) const {
  const Tensor* g = grad_if_any(v);
  if (g != nullptr) return *g;
  return Tensor(node(v).value.shape(), 0.0);
}

void Graph::accumulate(Var v, const Tensor& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Graph::accumulate(Var v, Tensor&& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = std::move(g);
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Graph::note_pattern(std::uint64_t h) {
  pattern_ ^= h + 0x9e3779b97f4a7c15ULL + (pattern_ << 6) + (pattern_ >> 2);
}

Var Binder::operator()(const Tensor& param) {
  auto it = bound_.find(&param);
  if (it != bound_.end()) return it->second;
  const bool trainable = trainable_ != nullptr && trainable_->contains(&param);
  Var v = graph_.leaf(param, trainable);
  bound_.emplace(&param, v);
  return v;
}

Tensor Binder::gradient(const Tensor& param) const {
  auto it = bound_.find(&param);
  if (it == bound_.end()) return Tensor(param.shape(), 0.0);
  const Tensor* g = graph_.grad_if_any(it->second);
  return g != nullptr ? *g : Tensor(param.shape(), 0.0);
}

// ---- ops ----------------------------------------------------------------

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": operand shapes differ");
}

void require_map(const Var& a, const char* op) {
  if (a.value().rank() != 3) throw ShapeError(std::string(op) + ": expected a (channels, height, width) map");
}

std::uint64_t hash_bits(const std::vector<bool>& bits) {
  std::uint64_t h = 1469598103934665603ULL;
  std::uint64_t word = 0;
  int n = 0;
  for (bool b : bits) {
    word = (word << 1) | (b ? 1u : 0u);
    if (++n == 64) {
      h = (h ^ word) * 1099511628211ULL;
      word = 0;
      n = 0;
    }
  }
  return (h ^ word ^ static_cast<std::uint64_t>(bits.size())) * 1099511628211ULL;
}

}  // namespace

Var conv2d(Var x, Var kernels, Var bias, int stride, Padding padding) {
  Graph& g = *x.graph;
  Tensor out = imgcore::conv2d(x.value(), kernels.value(), bias.value(), stride, padding);
  return g.emit(std::move(out), {x, kernels, bias}, [x, kernels, bias, stride, padding](Graph& g, const Tensor& d) {
    if (g.requires_grad(x)) {
      g.accumulate(x, imgcore::conv2d_backward_input(d, kernels.value(), x.shape(), stride, padding));
    }
    if (g.requires_grad(kernels)) {
      g.accumulate(kernels, imgcore::conv2d_backward_kernels(d, x.value(), kernels.shape(), stride, padding));
    }
    if (g.requires_grad(bias)) g.accumulate(bias, imgcore::conv2d_backward_bias(d));
  });
}

Var conv2d(Var x, Var kernels, int stride, Padding padding) {
  Graph& g = *x.graph;
  Tensor out = imgcore::conv2d(x.value(), kernels.value(), stride, padding);
  return g.emit(std::move(out), {x, kernels}, [x, kernels, stride, padding](Graph& g, const Tensor& d) {
    if (g.requires_grad(x)) {
      g.accumulate(x, imgcore::conv2d_backward_input(d, kernels.value(), x.shape(), stride, padding));
    }
    if (g.requires_grad(kernels)) {
      g.accumulate(kernels, imgcore::conv2d_backward_kernels(d, x.value(), kernels.shape(), stride, padding));
    }
  });
}

Var relu(Var x) {
  Graph& g = *x.graph;
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  if (g.tracking_patterns()) {
    std::vector<bool> active(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) active[i] = x.value()[i] > 0.0;
    g.note_pattern(hash_bits(active));
  }
  return g.emit(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    Tensor dx = d;
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(in[i] > 0.0)) dx[i] = 0.0;
    }
    g.accumulate(x, std::move(dx));
  });
}

Var sigmoid(Var x) {
  Graph& g = *x.graph;
  Tensor out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  const Var self{&g, static_cast<int>(g.node_count())};
  return g.emit(std::move(out), {x}, [x, self](Graph& g, const Tensor& d) {
    Tensor dx = d;
    const Tensor& s = self.value();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= s[i] * (1.0 - s[i]);
    g.accumulate(x, std::move(dx));
  });
}

Var clamp01(Var x) {
  Graph& g = *x.graph;
  Tensor out = x.value();
  std::vector<bool> inside(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    inside[i] = out[i] >= 0.0 && out[i] <= 1.0;
    out[i] = std::clamp(out[i], 0.0, 1.0);
  }
  if (g.tracking_patterns()) g.note_pattern(hash_bits(inside));
  return g.emit(std::move(out), {x}, [x, inside = std::move(inside)](Graph& g, const Tensor& d) {
    Tensor dx = d;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!inside[i]) dx[i] = 0.0;
    }
    g.accumulate(x, std::move(dx));
  });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& d) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& d) {
    g.accumulate(a, d);
    if (g.requires_grad(b)) {
      Tensor nd = d;
      nd *= -1.0;
      g.accumulate(b, std::move(nd));
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& d) {
    if (g.requires_grad(a)) {
      Tensor da = d;
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= bv[i];
      g.accumulate(a, std::move(da));
    }
    if (g.requires_grad(b)) {
      Tensor db = d;
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= av[i];
      g.accumulate(b, std::move(db));
    }
  });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double t) {
  Tensor out = a.value();
  for (double& v : out.values()) v = s * v + t;
  return a.graph->emit(std::move(out), {a}, [a, s](Graph& g, const Tensor& d) {
    Tensor da = d;
    da *= s;
    g.accumulate(a, std::move(da));
  });
}

Var scale_by(Var a, Var s) {
  if (s.value().size() != 1) throw ShapeError("scale_by: factor must have one element");
  const double k = s.value()[0];
  Tensor out = a.value();
  out *= k;
  return a.graph->emit(std::move(out), {a, s}, [a, s](Graph& g, const Tensor& d) {
    if (g.requires_grad(a)) {
      Tensor da = d;
      da *= s.value()[0];
      g.accumulate(a, std::move(da));
    }
    if (g.requires_grad(s)) {
      double acc = 0.0;
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < d.size(); ++i) acc += d[i] * av[i];
      g.accumulate(s, Tensor(s.shape(), acc));
    }
  });
}

Var element(Var x, std::size_t index) {
  if (index >= x.value().size()) throw ShapeError("element: index out of range");
  return x.graph->emit(Tensor({1}, x.value()[index]), {x}, [x, index](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    dx[index] = d[0];
    g.accumulate(x, std::move(dx));
  });
}

Var gate(Var map, Var x) {
  require_map(map, "gate");
  require_map(x, "gate");
  const Tensor& m = map.value();
  const Tensor& xv = x.value();
  if (m.channels() != 1 || m.height() != xv.height() || m.width() != xv.width()) {
    throw ShapeError("gate: map must be (1,H,W) aligned with the gated tensor");
  }
  Tensor out = xv;
  const std::size_t plane = xv.plane();
  for (int c = 0; c < xv.channels(); ++c) {
    double* o = out.channel(c).data();
    for (std::size_t i = 0; i < plane; ++i) o[i] *= m[i];
  }
  return x.graph->emit(std::move(out), {map, x}, [map, x](Graph& g, const Tensor& d) {
    const Tensor& m = map.value();
    const Tensor& xv = x.value();
    const std::size_t plane = xv.plane();
    if (g.requires_grad(x)) {
      Tensor dx = d;
      for (int c = 0; c < xv.channels(); ++c) {
        double* p = dx.channel(c).data();
        for (std::size_t i = 0; i < plane; ++i) p[i] *= m[i];
      }
      g.accumulate(x, std::move(dx));
    }
    if (g.requires_grad(map)) {
      Tensor dm(m.shape(), 0.0);
      for (int c = 0; c < xv.channels(); ++c) {
        const double* dp = d.channel(c).data();
        const double* xp = xv.channel(c).data();
        for (std::size_t i = 0; i < plane; ++i) dm[i] += dp[i] * xp[i];
      }
      g.accumulate(map, std::move(dm));
    }
  });
}

Var channel_scale(Var x, Var s) {
  require_map(x, "channel_scale");
  const Tensor& xv = x.value();
  if (s.value().size() != static_cast<std::size_t>(xv.channels())) {
    throw ShapeError("channel_scale: one factor per channel required");
  }
  Tensor out = xv;
  for (int c = 0; c < xv.channels(); ++c) {
    const double k = s.value()[static_cast<std::size_t>(c)];
    for (double& v : out.channel(c)) v *= k;
  }
  return x.graph->emit(std::move(out), {x, s}, [x, s](Graph& g, const Tensor& d) {
    const Tensor& xv = x.value();
    if (g.requires_grad(x)) {
      Tensor dx = d;
      for (int c = 0; c < xv.channels(); ++c) {
        const double k = s.value()[static_cast<std::size_t>(c)];
        for (double& v : dx.channel(c)) v *= k;
      }
      g.accumulate(x, std::move(dx));
    }
    if (g.requires_grad(s)) {
      Tensor ds(s.shape(), 0.0);
      for (int c = 0; c < xv.channels(); ++c) {
        const auto dc = d.channel(c);
        const auto xc = xv.channel(c);
        double acc = 0.0;
        for (std::size_t i = 0; i < dc.size(); ++i) acc += dc[i] * xc[i];
        ds[static_cast<std::size_t>(c)] = acc;
      }
      g.accumulate(s, std::move(ds));
    }
  });
}

Var global_avg_pool(Var x) {
  require_map(x, "global_avg_pool");
  const Tensor& xv = x.value();
  Tensor out = Tensor::map(xv.channels(), 1, 1);
  const double n = static_cast<double>(xv.plane());
  for (int c = 0; c < xv.channels(); ++c) {
    double s = 0.0;
    for (double v : xv.channel(c)) s += v;
    out[static_cast<std::size_t>(c)] = s / n;
  }
  return x.graph->emit(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    const double n = static_cast<double>(dx.plane());
    for (int c = 0; c < dx.channels(); ++c) {
      const double v = d[static_cast<std::size_t>(c)] / n;
      for (double& e : dx.channel(c)) e = v;
    }
    g.accumulate(x, std::move(dx));
  });
}

Var pad_replicate(Var x, int r) {
  require_map(x, "pad_replicate");
  if (r < 0) throw ArgumentError("pad_replicate: negative radius");
  const Tensor& xv = x.value();
  const int c = xv.channels(), h = xv.height(), w = xv.width();
  Tensor out = Tensor::map(c, h + 2 * r, w + 2 * r);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h + 2 * r; ++y) {
      for (int q = 0; q < w + 2 * r; ++q) {
        out.at(k, y, q) = xv.at(k, std::clamp(y - r, 0, h - 1), std::clamp(q - r, 0, w - 1));
      }
    }
  }
  return x.graph->emit(std::move(out), {x}, [x, r](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    const int c = dx.channels(), h = dx.height(), w = dx.width();
    for (int k = 0; k < c; ++k) {
      for (int y = 0; y < h + 2 * r; ++y) {
        for (int q = 0; q < w + 2 * r; ++q) {
          dx.at(k, std::clamp(y - r, 0, h - 1), std::clamp(q - r, 0, w - 1)) += d.at(k, y, q);
        }
      }
    }
    g.accumulate(x, std::move(dx));
  });
}

Var standardize(Var x, double eps) {
  require_map(x, "standardize");
  if (!(eps > 0.0)) throw ArgumentError("standardize: eps must be positive");
  const Tensor& xv = x.value();
  Tensor out(xv.shape(), 0.0);
  std::vector<double> inv_sd(static_cast<std::size_t>(xv.channels()));
  const double n = static_cast<double>(xv.plane());
  for (int c = 0; c < xv.channels(); ++c) {
    auto in = xv.channel(c);
    double m = 0.0;
    for (double v : in) m += v;
    m /= n;
    double var = 0.0;
    for (double v : in) var += (v - m) * (v - m);
    const double k = 1.0 / std::sqrt(var / n + eps);
    inv_sd[static_cast<std::size_t>(c)] = k;
    auto o = out.channel(c);
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = (in[i] - m) * k;
  }
  Tensor y = out;
  return x.graph->emit(std::move(out), {x}, [x, y = std::move(y), inv_sd](Graph& g, const Tensor& d) {
    Tensor dx(y.shape(), 0.0);
    const double n = static_cast<double>(y.plane());
    for (int c = 0; c < y.channels(); ++c) {
      auto yc = y.channel(c);
      auto dc = d.channel(c);
      double md = 0.0, mdy = 0.0;
      for (std::size_t i = 0; i < yc.size(); ++i) {
        md += dc[i];
        mdy += dc[i] * yc[i];
      }
      md /= n;
      mdy /= n;
      const double k = inv_sd[static_cast<std::size_t>(c)];
      auto o = dx.channel(c);
      for (std::size_t i = 0; i < yc.size(); ++i) o[i] = k * (dc[i] - md - yc[i] * mdy);
    }
    g.accumulate(x, std::move(dx));
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  int channels = 0;
  const int h = parts[0].value().height(), w = parts[0].value().width();
  for (const Var& p : parts) {
    require_map(p, "concat");
    if (p.value().height() != h || p.value().width() != w) throw ShapeError("concat: spatial sizes differ");
    channels += p.value().channels();
  }
  Tensor out = Tensor::map(channels, h, w);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(), out.storage().begin() + offset);
    offset += p.value().size();
  }
  return parts[0].graph->emit(std::move(out), parts, [parts](Graph& g, const Tensor& d) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.value().size();
      if (g.requires_grad(p)) {
        Tensor dp(p.shape(), std::vector<double>(d.storage().begin() + offset, d.storage().begin() + offset + n));
        g.accumulate(p, std::move(dp));
      }
      offset += n;
    }
  });
}

Var slice_channel(Var x, int c) {
  require_map(x, "slice_channel");
  const Tensor& xv = x.value();
  if (c < 0 || c >= xv.channels()) throw ArgumentError("slice_channel: channel out of range");
  const auto src = xv.channel(c);
  Tensor out({1, xv.height(), xv.width()}, std::vector<double>(src.begin(), src.end()));
  return x.graph->emit(std::move(out), {x}, [x, c](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    std::copy(d.storage().begin(), d.storage().end(), dx.channel(c).begin());
    g.accumulate(x, std::move(dx));
  });
}

Var channel_mean(Var x) {
  require_map(x, "channel_mean");
  const Tensor& xv = x.value();
  Tensor out = Tensor::map(1, xv.height(), xv.width());
  for (int c = 0; c < xv.channels(); ++c) {
    const auto xc = xv.channel(c);
    for (std::size_t i = 0; i < xc.size(); ++i) out[i] += xc[i];
  }
  out *= 1.0 / xv.channels();
  return x.graph->emit(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    const double inv = 1.0 / dx.channels();
    for (int c = 0; c < dx.channels(); ++c) {
      auto dc = dx.channel(c);
      for (std::size_t i = 0; i < dc.size(); ++i) dc[i] = d[i] * inv;
    }
    g.accumulate(x, std::move(dx));
  });
}

Var channel_max(Var x) {
  require_map(x, "channel_max");
  const Tensor& xv = x.value();
  const std::size_t plane = xv.plane();
  Tensor out = Tensor::map(1, xv.height(), xv.width());
  std::vector<int> arg(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    double best = xv[i];
    for (int c = 1; c < xv.channels(); ++c) {
      const double v = xv[c * plane + i];
      if (v > best) {
        best = v;
        arg[i] = c;
      }
    }
    out[i] = best;
  }
  Graph& g = *x.graph;
  if (g.tracking_patterns()) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int a : arg) h = (h ^ static_cast<std::uint64_t>(a)) * 1099511628211ULL;
    g.note_pattern(h);
  }
  return g.emit(std::move(out), {x}, [x, arg = std::move(arg)](Graph& g, const Tensor& d) {
    Tensor dx(x.shape(), 0.0);
    const std::size_t plane = dx.plane();
    for (std::size_t i = 0; i < plane; ++i) dx[arg[i] * plane + i] = d[i];
    g.accumulate(x, std::move(dx));
  });
}

Var softmax_channels(Var x) {
  require_map(x, "softmax_channels");
  const Tensor& xv = x.value();
  const std::size_t plane = xv.plane();
  const int channels = xv.channels();
  Tensor out = xv;
  for (std::size_t i = 0; i < plane; ++i) {
    double m = xv[i];
    for (int c = 1; c < channels; ++c) m = std::max(m, xv[c * plane + i]);
    double z = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double e = std::exp(xv[c * plane + i] - m);
      out[c * plane + i] = e;
      z += e;
    }
    for (int c = 0; c < channels; ++c) out[c * plane + i] /= z;
  }
  const Var self{x.graph, static_cast<int>(x.graph->node_count())};
  return x.graph->emit(std::move(out), {x}, [x, self](Graph& g, const Tensor& d) {
    const Tensor& s = self.value();
    const std::size_t plane = s.plane();
    const int channels = s.channels();
    Tensor dx(s.shape(), 0.0);
    for (std::size_t i = 0; i < plane; ++i) {
      double dot = 0.0;
      for (int c = 0; c < channels; ++c) dot += d[c * plane + i] * s[c * plane + i];
      for (int c = 0; c < channels; ++c) dx[c * plane + i] = s[c * plane + i] * (d[c * plane + i] - dot);
    }
    g.accumulate(x, std::move(dx));
  });
}

Var upsample(Var x, int factor) {
  Tensor out = imgcore::bilinear_upsample(x.value(), factor);
  return x.graph->emit(std::move(out), {x}, [x, factor](Graph& g, const Tensor& d) {
    g.accumulate(x, imgcore::bilinear_upsample_backward(d, factor));
  });
}

Var downsample2(Var x) {
  Tensor out = imgcore::downsample2(x.value());
  return x.graph->emit(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    g.accumulate(x, imgcore::downsample2_backward(d, x.shape()));
  });
}

Var filter_replicate(Var x, const Tensor& kernel) {
  Tensor out = imgcore::filter_replicate(x.value(), kernel);
  return x.graph->emit(std::move(out), {x}, [x, kernel](Graph& g, const Tensor& d) {
    g.accumulate(x, imgcore::filter_replicate_backward(d, kernel));
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.graph->emit(Tensor({1}, s), {x}, [x](Graph& g, const Tensor& d) { g.accumulate(x, Tensor(x.shape(), d[0])); });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mean_squared_error(Var a, Var b) {
  require_same(a, b, "mean_squared_error");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double e = av[i] - bv[i];
    s += e * e;
  }
  return a.graph->emit(Tensor({1}, s / n), {a, b}, [a, b](Graph& g, const Tensor& d) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const double k = 2.0 * d[0] / static_cast<double>(av.size());
    Tensor da(av.shape(), 0.0);
    for (std::size_t i = 0; i < av.size(); ++i) da[i] = k * (av[i] - bv[i]);
    if (g.requires_grad(b)) {
      Tensor db = da;
      db *= -1.0;
      g.accumulate(b, std::move(db));
    }
    g.accumulate(a, std::move(da));
  });
}

}  // namespace atnf::ad
