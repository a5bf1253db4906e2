#include "atnf/imgcore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "atnf/error.hpp"

namespace atnf::imgcore {

namespace {

void require_map(const FeatureMap& t, const char* what) {
  if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected a (channels, height, width) map");
}

void validate_conv(const FeatureMap& input, const Tensor& kernels, int stride) {
  require_map(input, "conv2d");
  if (kernels.rank() != 4) throw ShapeError("conv2d: kernel bank must be (out, in, kh, kw)");
  if (kernels.dim(1) != input.channels()) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernels.dim(1)) + " input channels, map has " +
                     std::to_string(input.channels()));
  }
  if (kernels.dim(2) % 2 == 0 || kernels.dim(3) % 2 == 0) throw ShapeError("conv2d: kernel extent must be odd");
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
}

// Range of output indices o with 0 <= o*stride + offset < in.
std::pair<int, int> valid_range(int out, int in, int offset, int stride) {
  int lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  int hi = out;
  if (in - 1 - offset < 0) {
    hi = 0;
  } else {
    hi = std::min(out, (in - 1 - offset) / stride + 1);
  }
  return {lo, std::max(lo, hi)};
}

int pad_for(int k, Padding padding) { return padding == Padding::same ? k / 2 : 0; }

double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

int conv_extent(int in, int k, int stride, Padding padding) {
  const int pad = pad_for(k, padding);
  const int span = in + 2 * pad - k;
  if (span < 0) throw ShapeError("conv2d: input smaller than kernel in valid mode");
  return span / stride + 1;
}

FeatureMap conv2d(const FeatureMap& input, const Tensor& kernels, int stride, Padding padding) {
  return conv2d(input, kernels, Tensor({kernels.dim(0)}, 0.0), stride, padding);
}

FeatureMap conv2d(const FeatureMap& input, const Tensor& kernels, const Tensor& bias, int stride, Padding padding) {
  validate_conv(input, kernels, stride);
  const int out_c = kernels.dim(0), in_c = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  if (bias.rank() != 1 || bias.dim(0) != out_c) throw ShapeError("conv2d: bias length must equal output channels");
  const int h = input.height(), w = input.width();
  const int ho = conv_extent(h, kh, stride, padding), wo = conv_extent(w, kw, stride, padding);
  const int py = pad_for(kh, padding), px = pad_for(kw, padding);

  FeatureMap out = Tensor::map(out_c, ho, wo);
  for (int o = 0; o < out_c; ++o) {
    double* op = out.channel(o).data();
    std::fill(op, op + static_cast<std::size_t>(ho) * wo, bias[o]);
    for (int c = 0; c < in_c; ++c) {
      const double* ip = input.channel(c).data();
      const double* kp = kernels.data() + ((static_cast<std::size_t>(o) * in_c + c) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        const auto [y0, y1] = valid_range(ho, h, ky - py, stride);
        for (int kx = 0; kx < kw; ++kx) {
          const double k = kp[ky * kw + kx];
          if (k == 0.0) continue;
          const auto [x0, x1] = valid_range(wo, w, kx - px, stride);
          for (int y = y0; y < y1; ++y) {
            double* orow = op + static_cast<std::size_t>(y) * wo;
            const double* irow = ip + static_cast<std::size_t>(y * stride + ky - py) * w + (kx - px);
            if (stride == 1) {
              for (int x = x0; x < x1; ++x) orow[x] += k * irow[x];
            } else {
              for (int x = x0; x < x1; ++x) orow[x] += k * irow[x * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureMap conv2d_backward_input(const FeatureMap& grad_out, const Tensor& kernels, const std::vector<int>& input_shape,
                                 int stride, Padding padding) {
  const int out_c = kernels.dim(0), in_c = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  const int h = input_shape[1], w = input_shape[2];
  const int ho = grad_out.height(), wo = grad_out.width();
  const int py = pad_for(kh, padding), px = pad_for(kw, padding);
  FeatureMap dx(input_shape, 0.0);
  for (int o = 0; o < out_c; ++o) {
    const double* gp = grad_out.channel(o).data();
    for (int c = 0; c < in_c; ++c) {
      double* dp = dx.channel(c).data();
      const double* kp = kernels.data() + ((static_cast<std::size_t>(o) * in_c + c) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        const auto [y0, y1] = valid_range(ho, h, ky - py, stride);
        for (int kx = 0; kx < kw; ++kx) {
          const double k = kp[ky * kw + kx];
          if (k == 0.0) continue;
          const auto [x0, x1] = valid_range(wo, w, kx - px, stride);
          for (int y = y0; y < y1; ++y) {
            const double* grow = gp + static_cast<std::size_t>(y) * wo;
            double* drow = dp + static_cast<std::size_t>(y * stride + ky - py) * w + (kx - px);
            if (stride == 1) {
              for (int x = x0; x < x1; ++x) drow[x] += k * grow[x];
            } else {
              for (int x = x0; x < x1; ++x) drow[x * stride] += k * grow[x];
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor conv2d_backward_kernels(const FeatureMap& grad_out, const FeatureMap& input, const std::vector<int>& kernel_shape,
                               int stride, Padding padding) {
  const int out_c = kernel_shape[0], in_c = kernel_shape[1], kh = kernel_shape[2], kw = kernel_shape[3];
  const int h = input.height(), w = input.width();
  const int ho = grad_out.height(), wo = grad_out.width();
  const int py = pad_for(kh, padding), px = pad_for(kw, padding);
  Tensor dk(kernel_shape, 0.0);
  for (int o = 0; o < out_c; ++o) {
    const double* gp = grad_out.channel(o).data();
    for (int c = 0; c < in_c; ++c) {
      const double* ip = input.channel(c).data();
      double* kp = dk.data() + ((static_cast<std::size_t>(o) * in_c + c) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        const auto [y0, y1] = valid_range(ho, h, ky - py, stride);
        for (int kx = 0; kx < kw; ++kx) {
          const auto [x0, x1] = valid_range(wo, w, kx - px, stride);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = gp + static_cast<std::size_t>(y) * wo;
            const double* irow = ip + static_cast<std::size_t>(y * stride + ky - py) * w + (kx - px);
            if (stride == 1) {
              acc += dot(grow + x0, irow + x0, x1 - x0);
            } else {
              for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x * stride];
            }
          }
          kp[ky * kw + kx] = acc;
        }
      }
    }
  }
  return dk;
}

Tensor conv2d_backward_bias(const FeatureMap& grad_out) {
  Tensor db({grad_out.channels()}, 0.0);
  for (int o = 0; o < grad_out.channels(); ++o) {
    double s = 0.0;
    for (double v : grad_out.channel(o)) s += v;
    db[o] = s;
  }
  return db;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;  // weight of `hi`
};

// Half-pixel source coordinates for one axis.
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

FeatureMap bilinear_upsample(const FeatureMap& input, int factor) {
  require_map(input, "bilinear_upsample");
  if (factor < 1) throw ArgumentError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return input;
  const int h = input.height(), w = input.width(), ho = h * factor, wo = w * factor;
  const auto ty = bilinear_taps(h, ho);
  const auto tx = bilinear_taps(w, wo);
  FeatureMap out = Tensor::map(input.channels(), ho, wo);
  std::vector<double> row(static_cast<std::size_t>(wo));
  for (int c = 0; c < input.channels(); ++c) {
    const double* ip = input.channel(c).data();
    double* op = out.channel(c).data();
    for (int y = 0; y < ho; ++y) {
      const double* r0 = ip + static_cast<std::size_t>(ty[y].lo) * w;
      const double* r1 = ip + static_cast<std::size_t>(ty[y].hi) * w;
      const double fy = ty[y].frac;
      double* orow = op + static_cast<std::size_t>(y) * wo;
      for (int x = 0; x < wo; ++x) {
        const Tap& t = tx[x];
        const double top = r0[t.lo] + t.frac * (r0[t.hi] - r0[t.lo]);
        const double bottom = r1[t.lo] + t.frac * (r1[t.hi] - r1[t.lo]);
        orow[x] = top + fy * (bottom - top);
      }
    }
  }
  return out;
}

FeatureMap bilinear_upsample_backward(const FeatureMap& grad_out, int factor) {
  if (factor < 1) throw ArgumentError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return grad_out;
  const int ho = grad_out.height(), wo = grad_out.width();
  if (ho % factor != 0 || wo % factor != 0) throw ShapeError("bilinear_upsample_backward: size not a multiple of factor");
  const int h = ho / factor, w = wo / factor;
  const auto ty = bilinear_taps(h, ho);
  const auto tx = bilinear_taps(w, wo);
  FeatureMap dx = Tensor::map(grad_out.channels(), h, w);
  for (int c = 0; c < grad_out.channels(); ++c) {
    const double* gp = grad_out.channel(c).data();
    double* dp = dx.channel(c).data();
    for (int y = 0; y < ho; ++y) {
      double* r0 = dp + static_cast<std::size_t>(ty[y].lo) * w;
      double* r1 = dp + static_cast<std::size_t>(ty[y].hi) * w;
      const double fy = ty[y].frac;
      const double* grow = gp + static_cast<std::size_t>(y) * wo;
      for (int x = 0; x < wo; ++x) {
        const Tap& t = tx[x];
        const double g = grow[x];
        const double gt = g * (1.0 - fy), gb = g * fy;
        r0[t.lo] += gt * (1.0 - t.frac);
        r0[t.hi] += gt * t.frac;
        r1[t.lo] += gb * (1.0 - t.frac);
        r1[t.hi] += gb * t.frac;
      }
    }
  }
  return dx;
}

FeatureMap downsample2(const FeatureMap& input) {
  require_map(input, "downsample2");
  const int h = input.height(), w = input.width();
  if (h < 2 || w < 2) throw ArgumentError("downsample2: height and width must be >= 2");
  const int ho = (h + 1) / 2, wo = (w + 1) / 2;
  FeatureMap out = Tensor::map(input.channels(), ho, wo);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < ho; ++y) {
      const int y1 = std::min(2 * y + 2, h);
      for (int x = 0; x < wo; ++x) {
        const int x1 = std::min(2 * x + 2, w);
        double s = 0.0;
        for (int yy = 2 * y; yy < y1; ++yy) {
          for (int xx = 2 * x; xx < x1; ++xx) s += input.at(c, yy, xx);
        }
        out.at(c, y, x) = s / ((y1 - 2 * y) * (x1 - 2 * x));
      }
    }
  }
  return out;
}

FeatureMap downsample2_backward(const FeatureMap& grad_out, const std::vector<int>& input_shape) {
  const int h = input_shape[1], w = input_shape[2];
  FeatureMap dx(input_shape, 0.0);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < grad_out.height(); ++y) {
      const int y1 = std::min(2 * y + 2, h);
      for (int x = 0; x < grad_out.width(); ++x) {
        const int x1 = std::min(2 * x + 2, w);
        const double g = grad_out.at(c, y, x) / ((y1 - 2 * y) * (x1 - 2 * x));
        for (int yy = 2 * y; yy < y1; ++yy) {
          for (int xx = 2 * x; xx < x1; ++xx) dx.at(c, yy, xx) += g;
        }
      }
    }
  }
  return dx;
}

Tensor laplacian_kernel() { return Tensor({3, 3}, {0, 1, 0, 1, -4, 1, 0, 1, 0}); }

namespace {

void validate_kernel(const Tensor& kernel) {
  if (kernel.rank() != 2) throw ShapeError("filter kernel must be rank 2");
  if (kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) throw ShapeError("filter kernel extent must be odd");
}

}  // namespace

FeatureMap filter_replicate(const FeatureMap& input, const Tensor& kernel) {
  require_map(input, "filter_replicate");
  validate_kernel(kernel);
  const int kh = kernel.dim(0), kw = kernel.dim(1), ry = kh / 2, rx = kw / 2;
  const int h = input.height(), w = input.width();
  FeatureMap out = Tensor::map(input.channels(), h, w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = std::clamp(y + ky - ry, 0, h - 1);
          for (int kx = 0; kx < kw; ++kx) {
            const double k = kernel[static_cast<std::size_t>(ky) * kw + kx];
            if (k == 0.0) continue;
            s += k * input.at(c, sy, std::clamp(x + kx - rx, 0, w - 1));
          }
        }
        out.at(c, y, x) = s;
      }
    }
  }
  return out;
}

FeatureMap filter_replicate_backward(const FeatureMap& grad_out, const Tensor& kernel) {
  validate_kernel(kernel);
  const int kh = kernel.dim(0), kw = kernel.dim(1), ry = kh / 2, rx = kw / 2;
  const int h = grad_out.height(), w = grad_out.width();
  FeatureMap dx = Tensor::map(grad_out.channels(), h, w);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = grad_out.at(c, y, x);
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = std::clamp(y + ky - ry, 0, h - 1);
          for (int kx = 0; kx < kw; ++kx) {
            const double k = kernel[static_cast<std::size_t>(ky) * kw + kx];
            if (k == 0.0) continue;
            dx.at(c, sy, std::clamp(x + kx - rx, 0, w - 1)) += k * g;
          }
        }
      }
    }
  }
  return dx;
}

FeatureMap laplacian(const Image& input) { return filter_replicate(input.to_map(), laplacian_kernel()); }

FeatureMap laplacian(const Image& input, const Tensor& kernel) {
  if (!(kernel == laplacian_kernel())) throw ArgumentError("laplacian: only the fixed 3x3 Laplacian kernel is supported");
  return laplacian(input);
}

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

}  // namespace

Image binomial_blur(const Image& input) {
  const int h = input.height(), w = input.width();
  std::vector<double> tmp(input.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += kBinomial[k] * input.at(y, std::clamp(x + k - 2, 0, w - 1));
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += kBinomial[k] * tmp[static_cast<std::size_t>(std::clamp(y + k - 2, 0, h - 1)) * w + x];
      out.at(y, x) = s;
    }
  }
  return out;
}

Image pyramid_reduce(const Image& input) {
  if (input.height() < 2 || input.width() < 2) throw ArgumentError("pyramid_reduce: image too small to halve");
  const Image blurred = binomial_blur(input);
  const int ho = (input.height() + 1) / 2, wo = (input.width() + 1) / 2;
  Image out(ho, wo);
  for (int y = 0; y < ho; ++y) {
    for (int x = 0; x < wo; ++x) out.at(y, x) = blurred.at(2 * y, 2 * x);
  }
  return out;
}

Image pyramid_expand(const Image& input, int height, int width) {
  if ((height + 1) / 2 != input.height() || (width + 1) / 2 != input.width()) {
    throw ShapeError("pyramid_expand: target size inconsistent with the coarse level");
  }
  // Each output sample gathers the coarse samples whose upsampled position falls under
  // the 5-tap kernel; the factor 2 per axis restores unit gain.
  Image out(height, width);
  const int h = input.height(), w = input.width();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int ky = 0; ky < 5; ++ky) {
        const int py = y + ky - 2;
        if (py % 2 != 0) continue;
        const int sy = std::clamp(py / 2, 0, h - 1);
        for (int kx = 0; kx < 5; ++kx) {
          const int px = x + kx - 2;
          if (px % 2 != 0) continue;
          const int sx = std::clamp(px / 2, 0, w - 1);
          s += 4.0 * kBinomial[ky] * kBinomial[kx] * input.at(sy, sx);
        }
      }
      out.at(y, x) = s;
    }
  }
  return out;
}

std::vector<Image> gaussian_pyramid(const Image& input, int levels) {
  if (levels < 1) throw ArgumentError("gaussian_pyramid: levels must be >= 1");
  std::vector<Image> pyramid{input};
  pyramid.reserve(static_cast<std::size_t>(levels));
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyramid.back();
    if (prev.height() < 2 || prev.width() < 2) {
      throw ArgumentError("gaussian_pyramid: " + std::to_string(levels) + " levels do not fit a " +
                          std::to_string(input.height()) + "x" + std::to_string(input.width()) + " image");
    }
    pyramid.push_back(pyramid_reduce(prev));
  }
  return pyramid;
}

}  // namespace atnf::imgcore
