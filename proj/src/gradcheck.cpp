#include "atnf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "atnf/error.hpp"
#include "atnf/random.hpp"

namespace atnf::gradcheck {

namespace {

struct Eval {
  double value;
  std::uint64_t pattern;
};

Eval evaluate(const LossBuilder& loss) {
  ad::Graph g(false);
  g.set_track_patterns(true);
  ad::Binder bind(g);
  ad::Var root = loss(bind);
  if (root.value().size() != 1) throw ShapeError("grad_check: loss must be a scalar");
  const double v = root.value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return {v, g.pattern()};
}

std::vector<std::size_t> sample_entries(const Param& p, const Options& o) {
  std::vector<std::size_t> idx(p.tensor->size());
  std::iota(idx.begin(), idx.end(), 0);
  if (o.max_entries_per_tensor <= 0 || idx.size() <= static_cast<std::size_t>(o.max_entries_per_tensor)) return idx;
  Rng rng(o.seed, p.name);
  // Partial Fisher-Yates: the first k slots become a uniform sample.
  const std::size_t k = static_cast<std::size_t>(o.max_entries_per_tensor);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bits() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<Tensor> analytic_gradients(const std::vector<Param>& params, const LossBuilder& loss) {
  ad::Binder::TensorSet trainable;
  for (const auto& p : params) trainable.insert(p.tensor);
  ad::Graph g;
  ad::Binder bind(g, &trainable);
  ad::Var root = loss(bind);
  if (root.value().size() != 1) throw ShapeError("grad_check: loss must be a scalar");
  if (!std::isfinite(root.value()[0])) throw NumericError("grad_check: loss is not finite");
  g.backward(root);
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(bind.gradient(*p.tensor));
  return out;
}

Report grad_check(const std::vector<Param>& params, const LossBuilder& loss, const Options& o) {
  if (!(o.eps > 0.0)) throw ArgumentError("grad_check: eps must be positive");
  const auto analytic = analytic_gradients(params, loss);
  const std::uint64_t base_pattern = evaluate(loss).pattern;
  Report r;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Param& p = params[pi];
    for (std::size_t i : sample_entries(p, o)) {
      double& slot = (*p.tensor)[i];
      const double saved = slot;
      Eval at[4];
      const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
      bool kink = false;
      for (int k = 0; k < 4; ++k) {
        slot = saved + offsets[k] * o.eps;
        at[k] = evaluate(loss);
        kink = kink || at[k].pattern != base_pattern;
      }
      slot = saved;
      if (kink) {
        ++r.skipped_kinks;
        continue;
      }
      // Fourth-order central difference: (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h.
      const double numeric = (8.0 * (at[1].value - at[2].value) - (at[0].value - at[3].value)) / (12.0 * o.eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), o.floor});
      ++r.checked;
      if (r.worst_name.empty() || rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_name = p.name;
        r.worst_index = i;
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
    }
  }
  return r;
}

}  // namespace atnf::gradcheck
