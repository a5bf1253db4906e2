#include "atnf/layers.hpp"

#include <cmath>
#include <numbers>

namespace atnf {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  do {
    u = uniform();
  } while (u <= 0.0);
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

Tensor he_tensor(std::vector<int> shape, std::uint64_t seed, std::string_view name, double gain) {
  Tensor t(std::move(shape), 0.0);
  const double fan_in = static_cast<double>(t.size()) / t.dim(0);
  const double std = gain * std::sqrt(2.0 / fan_in);
  Rng rng(seed, name);
  for (double& v : t.values()) v = std * rng.normal();
  round_to_float(t);
  return t;
}

ConvWeights ConvWeights::he(int out, int in, int k, std::uint64_t seed, std::string_view name, double gain) {
  return {he_tensor({out, in, k, k}, seed, name, gain), Tensor({out}, 0.0)};
}

ConvWeights ConvWeights::zeros(int out, int in, int k) { return {Tensor({out, in, k, k}, 0.0), Tensor({out}, 0.0)}; }

}  // namespace atnf
