#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "atnf/random.hpp"
#include "atnf/tensor.hpp"

namespace testing {

using atnf::FeatureMap;
using atnf::Image;
using atnf::Tensor;

inline Image random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  atnf::Rng rng(seed, "test-image");
  Image img(h, w);
  for (double& v : img.values()) v = rng.uniform(lo, hi);
  return img;
}

inline Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  atnf::Rng rng(seed, "test-tensor");
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Direct cross-correlation with zero padding `pad` and the given stride.
inline FeatureMap naive_conv(const FeatureMap& x, const Tensor& k, const Tensor* bias, int stride, int pad) {
  const int oc = k.dim(0), ic = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  const int ho = (x.height() + 2 * pad - kh) / stride + 1;
  const int wo = (x.width() + 2 * pad - kw) / stride + 1;
  FeatureMap out = Tensor::map(oc, ho, wo);
  for (int o = 0; o < oc; ++o)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        double s = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
        for (int c = 0; c < ic; ++c)
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
              const int sy = y * stride + dy - pad, sx = xx * stride + dx - pad;
              if (sy < 0 || sx < 0 || sy >= x.height() || sx >= x.width()) continue;
              s += k[((static_cast<std::size_t>(o) * ic + c) * kh + dy) * kw + dx] * x.at(c, sy, sx);
            }
        out.at(o, y, xx) = s;
      }
  return out;
}

inline FeatureMap naive_relu(FeatureMap x) {
  for (double& v : x.values()) v = std::max(v, 0.0);
  return x;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Half-pixel-centre bilinear resampling by an integer factor.
inline FeatureMap naive_upsample(const FeatureMap& x, int f) {
  const int h = x.height(), w = x.width();
  FeatureMap out = Tensor::map(x.channels(), h * f, w * f);
  auto src = [](int d, int f, int n) { return std::clamp((d + 0.5) / f - 0.5, 0.0, static_cast<double>(n - 1)); };
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < h * f; ++y)
      for (int xx = 0; xx < w * f; ++xx) {
        const double sy = src(y, f, h), sx = src(xx, f, w);
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double ty = sy - y0, tx = sx - x0;
        out.at(c, y, xx) = (1 - ty) * ((1 - tx) * x.at(c, y0, x0) + tx * x.at(c, y0, x1)) +
                           ty * ((1 - tx) * x.at(c, y1, x0) + tx * x.at(c, y1, x1));
      }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("atnf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
