#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "atnf/autograd.hpp"
#include "atnf/random.hpp"
#include "atnf/tensor.hpp"

namespace atnf {

/// Kernel bank (out, in, kh, kw) plus per-output bias.
struct ConvWeights {
  Tensor kernel;
  Tensor bias;

  int out_channels() const { return kernel.dim(0); }
  int in_channels() const { return kernel.dim(1); }

  /// He-normal kernel (std = sqrt(2 / fan_in) * gain), zero bias, drawn from a
  /// stream keyed by (seed, name) and rounded to float precision.
  static ConvWeights he(int out, int in, int k, std::uint64_t seed, std::string_view name, double gain = 1.0);
  static ConvWeights zeros(int out, int in, int k);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".kernel", kernel);
    f(prefix + ".bias", bias);
  }
};

/// He-normal tensor of the given shape; fan_in is the product of all but the first dimension.
Tensor he_tensor(std::vector<int> shape, std::uint64_t seed, std::string_view name, double gain = 1.0);

inline ad::Var conv(ad::Binder& bind, ad::Var x, const ConvWeights& w) {
  return ad::conv2d(x, bind(w.kernel), bind(w.bias));
}

}  // namespace atnf
