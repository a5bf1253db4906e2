#include "atnf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "atnf/error.hpp"

namespace atnf {

namespace {

std::size_t element_count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) throw ShapeError("tensor data length does not match its shape");
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) throw ShapeError("tensor += with mismatched shapes");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) throw ShapeError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width) throw ShapeError("image data length mismatch");
}

Image Image::from_map(const FeatureMap& map) {
  if (map.rank() != 3 || map.channels() != 1) throw ShapeError("image requires a one-channel map");
  Image img(map.height(), map.width(), map.storage());
  img.clamp();
  return img;
}

FeatureMap Image::to_map() const { return Tensor({1, height_, width_}, data_); }

void Image::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

SaliencyMap::SaliencyMap(int height, int width, double fill)
    : SaliencyMap(height, width, std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill)) {}

SaliencyMap::SaliencyMap(int height, int width, std::vector<double> weights)
    : height_(height), width_(width), weights_(std::move(weights)) {
  if (height < 1 || width < 1) throw ShapeError("saliency dimensions must be positive");
  if (weights_.size() != static_cast<std::size_t>(height) * width) throw ShapeError("saliency data length mismatch");
  for (double& v : weights_) v = std::clamp(v, 0.0, 1.0);
}

SaliencyMap SaliencyMap::from_map(const FeatureMap& map) {
  if (map.rank() != 3 || map.channels() != 1) throw ShapeError("saliency requires a one-channel map");
  return SaliencyMap(map.height(), map.width(), map.storage());
}

FeatureMap SaliencyMap::to_map() const { return Tensor({1, height_, width_}, weights_); }

Image SaliencyMap::to_image() const { return Image(height_, width_, weights_); }

void round_to_float(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace atnf
