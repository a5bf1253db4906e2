#pragma once

#include <vector>

#include "atnf/tensor.hpp"

// Deterministic image and tensor kernels. Everything here is a pure function.
namespace atnf::imgcore {

enum class Padding { same, valid };

/// Output extent of a convolution along one axis.
int conv_extent(int in, int k, int stride, Padding padding);

/// 2-D cross-correlation of a (C,H,W) map with a (O,C,kh,kw) kernel bank.
/// `same` zero-pads by k/2 on each side; `valid` uses no padding.
FeatureMap conv2d(const FeatureMap& input, const Tensor& kernels, int stride = 1, Padding padding = Padding::same);
FeatureMap conv2d(const FeatureMap& input, const Tensor& kernels, const Tensor& bias, int stride = 1,
                  Padding padding = Padding::same);

// Adjoints of conv2d with respect to its input, kernels and bias.
FeatureMap conv2d_backward_input(const FeatureMap& grad_out, const Tensor& kernels, const std::vector<int>& input_shape,
                                 int stride, Padding padding);
Tensor conv2d_backward_kernels(const FeatureMap& grad_out, const FeatureMap& input, const std::vector<int>& kernel_shape,
                               int stride, Padding padding);
Tensor conv2d_backward_bias(const FeatureMap& grad_out);

/// Integer-factor bilinear upsampling with half-pixel sample centres:
/// src = (dst + 0.5) / factor - 0.5, clamped to the input extent.
FeatureMap bilinear_upsample(const FeatureMap& input, int factor);
FeatureMap bilinear_upsample_backward(const FeatureMap& grad_out, int factor);

/// 2x2 mean pooling; odd trailing rows/columns average the pixels that exist.
FeatureMap downsample2(const FeatureMap& input);
FeatureMap downsample2_backward(const FeatureMap& grad_out, const std::vector<int>& input_shape);

/// The fixed 3x3 Laplacian [[0,1,0],[1,-4,1],[0,1,0]] as a rank-2 tensor.
Tensor laplacian_kernel();

/// Per-channel filtering with an odd rank-2 kernel and edge-replicated borders.
FeatureMap filter_replicate(const FeatureMap& input, const Tensor& kernel);
FeatureMap filter_replicate_backward(const FeatureMap& grad_out, const Tensor& kernel);

/// Laplacian response; borders replicate so constant images map to zero.
FeatureMap laplacian(const Image& input);
FeatureMap laplacian(const Image& input, const Tensor& kernel);

/// 5x5 binomial blur with replicated borders.
Image binomial_blur(const Image& input);
/// Blur then keep even rows and columns: output is ceil(n/2) per axis.
Image pyramid_reduce(const Image& input);
/// Burt-Adelson expansion to (height, width) with replicated borders.
Image pyramid_expand(const Image& input, int height, int width);

/// Level 0 is the input; each further level is pyramid_reduce of the previous one.
std::vector<Image> gaussian_pyramid(const Image& input, int levels);

}  // namespace atnf::imgcore
