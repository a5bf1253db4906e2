#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "atnf/imgcore.hpp"
#include "atnf/tensor.hpp"

// Minimal reverse-mode differentiation over Tensor-valued nodes.
//
// A Graph records nodes in creation order, so node ids are a topological order
// and backward() is a single reverse sweep. Gradients are accumulated in fixed
// order, which keeps results bitwise reproducible.
namespace atnf::ad {

class Graph;

struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape(); }
};

using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

class Graph {
 public:
  /// With `record` false no backward closures are kept (inference mode).
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  /// A leaf whose gradient is collected when `requires_grad` is set.
  Var leaf(Tensor value, bool requires_grad = true);
  /// Appends an op node. `fn` is kept only if some parent requires a gradient.
  Var emit(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Reverse sweep from a scalar root seeded with 1.
  void backward(Var root);
  /// Reverse sweep seeded with an explicit upstream gradient.
  void backward(Var root, const Tensor& upstream);

  /// Gradient of the last backward root with respect to `v`; zeros if `v` was not reached.
  Tensor grad(Var v) const;
  const Tensor* grad_if_any(Var v) const;

  /// Used by op backward closures.
  void accumulate(Var v, const Tensor& g);
  void accumulate(Var v, Tensor&& g);

  // Activation-pattern fingerprint of non-smooth ops (ReLU, max, clamp).
  // Finite-difference checks use it to discard samples that straddle a kink.
  void set_track_patterns(bool on) { track_patterns_ = on; }
  bool tracking_patterns() const { return track_patterns_; }
  void note_pattern(std::uint64_t h);
  std::uint64_t pattern() const { return pattern_; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool record_;
  bool backward_done_ = false;
  bool track_patterns_ = false;
  std::uint64_t pattern_ = 1469598103934665603ULL;
};

/// Maps parameter tensors to graph leaves, once per tensor.
///
/// Tensors in the trainable set become gradient-carrying leaves; all others
/// enter the graph as constants, so frozen parameters get exactly zero gradient.
class Binder {
 public:
  using TensorSet = std::unordered_set<const Tensor*>;

  explicit Binder(Graph& graph, const TensorSet* trainable = nullptr) : graph_(graph), trainable_(trainable) {}

  Var operator()(const Tensor& param);
  Graph& graph() const { return graph_; }

  /// Gradient for `param` after graph().backward(); zeros if frozen or unused.
  Tensor gradient(const Tensor& param) const;

 private:
  Graph& graph_;
  const TensorSet* trainable_;
  std::unordered_map<const Tensor*, Var> bound_;
};

using imgcore::Padding;

// ---- differentiable ops -------------------------------------------------

Var conv2d(Var x, Var kernels, Var bias, int stride = 1, Padding padding = Padding::same);
Var conv2d(Var x, Var kernels, int stride = 1, Padding padding = Padding::same);

Var relu(Var x);
Var sigmoid(Var x);
/// Values pass through inside [0,1]; gradient is zero where clamping is active.
Var clamp01(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal-shape tensors.
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// s * a + t elementwise.
Var affine(Var a, double s, double t);
/// Scalar-tensor product: `s` has one element.
Var scale_by(Var a, Var s);

/// Picks one element of x as a one-element tensor.
Var element(Var x, std::size_t index);

/// Broadcasts a one-channel (1,H,W) gate over every channel of x.
Var gate(Var map, Var x);
/// Multiplies channel c of x by s[c]; s is (C,1,1).
Var channel_scale(Var x, Var s);
/// (C,H,W) -> (C,1,1) spatial mean.
Var global_avg_pool(Var x);
Var concat(const std::vector<Var>& parts);
Var slice_channel(Var x, int c);
Var channel_mean(Var x);
Var channel_max(Var x);
/// Pads every channel by r pixels, copying the nearest border value.
Var pad_replicate(Var x, int r);
/// Per-channel (x - mean) / sqrt(var + eps) over the spatial plane.
Var standardize(Var x, double eps);
/// Per-pixel softmax across channels.
Var softmax_channels(Var x);

Var upsample(Var x, int factor);
Var downsample2(Var x);
/// Replicate-border filtering with a fixed rank-2 kernel.
Var filter_replicate(Var x, const Tensor& kernel);

/// Sum of all elements as a one-element tensor.
Var sum(Var x);
Var mean(Var x);
/// ||a - b||^2 / numel as a one-element tensor.
Var mean_squared_error(Var a, Var b);

}  // namespace atnf::ad
