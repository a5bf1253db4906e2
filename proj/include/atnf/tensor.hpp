#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace atnf {

/// Dense row-major array of doubles with rank 1..4.
///
/// Rank-3 tensors are feature maps laid out as (channels, height, width);
/// rank-4 tensors are kernel banks laid out as (out, in, kh, kw).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor map(int channels, int height, int width, double fill = 0.0) {
    return Tensor({channels, height, width}, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Feature-map accessors; valid for rank-3 tensors only.
  int channels() const { return shape_[0]; }
  int height() const { return shape_[1]; }
  int width() const { return shape_[2]; }
  std::size_t plane() const { return static_cast<std::size_t>(shape_[1]) * shape_[2]; }
  double& at(int c, int y, int x) { return data_[(c * plane()) + static_cast<std::size_t>(y) * shape_[2] + x]; }
  double at(int c, int y, int x) const { return data_[(c * plane()) + static_cast<std::size_t>(y) * shape_[2] + x]; }
  std::span<double> channel(int c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {data_.data() + c * plane(), plane()}; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Multi-channel activation map (rank-3 Tensor).
using FeatureMap = Tensor;

/// Single-channel intensity grid in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> data);

  /// Copies channel 0 of a one-channel map; values outside [0,1] are clamped.
  static Image from_map(const FeatureMap& map);
  FeatureMap to_map() const;

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  double& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool same_shape(const Image& other) const { return height_ == other.height_ && width_ == other.width_; }
  void clamp();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Per-pixel attention weights in [0, 1], aligned to the images they gate.
class SaliencyMap {
 public:
  SaliencyMap() = default;
  SaliencyMap(int height, int width, double fill);
  /// Clamps every value into [0, 1].
  SaliencyMap(int height, int width, std::vector<double> weights);

  static SaliencyMap from_map(const FeatureMap& map);
  FeatureMap to_map() const;
  Image to_image() const;

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return weights_.size(); }
  double at(int y, int x) const { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> values() const { return weights_; }

  bool same_shape(const SaliencyMap& other) const { return height_ == other.height_ && width_ == other.width_; }
  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> weights_;
};

/// Rounds every value to the nearest float32; parameters live at float precision.
void round_to_float(Tensor& t);

}  // namespace atnf
