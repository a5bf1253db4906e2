#include "atnf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"
#include "atnf/imgcore.hpp"
#include "atnf/random.hpp"

namespace atnf::synthetic {

namespace {

constexpr double kPi = std::numbers::pi;

struct Shape {
  double cx, cy;
  double rx, ry, angle;
  std::vector<double> radii;  // polygon vertex radii; empty for an ellipse
  double level;               // target brightness in modality b
};

bool inside(const Shape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  const double u = c * dx + sn * dy, v = -sn * dx + c * dy;
  if (s.radii.empty()) return (u * u) / (s.rx * s.rx) + (v * v) / (s.ry * s.ry) <= 1.0;
  // Star-shaped polygon: compare the radius with the edge between the two
  // vertices bracketing this direction.
  const int n = static_cast<int>(s.radii.size());
  double theta = std::atan2(v, u);
  if (theta < 0) theta += 2 * kPi;
  const double step = 2 * kPi / n;
  const int i = std::min(n - 1, static_cast<int>(theta / step));
  const int j = (i + 1) % n;
  const double t0 = i * step, t1 = (i + 1) * step;
  const double x0 = s.radii[i] * std::cos(t0), y0 = s.radii[i] * std::sin(t0);
  const double x1 = s.radii[j] * std::cos(t1), y1 = s.radii[j] * std::sin(t1);
  // Point is inside when it lies on the origin's side of the edge.
  const double cross_p = (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0);
  const double cross_o = (x1 - x0) * (0 - y0) - (y1 - y0) * (0 - x0);
  return cross_p * cross_o >= 0;
}

}  // namespace

SyntheticPair make_pair(std::uint64_t seed, std::uint64_t index, int size) {
  if (size < 16) throw ArgumentError("synthetic images must be at least 16 pixels wide");
  Rng rng(mix64(seed) ^ mix64(index + 0x5bd1e995ULL), "synthetic");
  const int n = size;
  const double scale = n / 64.0;

  std::vector<Shape> shapes(static_cast<std::size_t>(rng.integer(1, 3)));
  for (auto& s : shapes) {
    const double r = rng.uniform(5.0, 12.0) * scale;
    s.cx = rng.uniform(r + 2, n - r - 2);
    s.cy = rng.uniform(r + 2, n - r - 2);
    s.angle = rng.uniform(0.0, kPi);
    s.level = rng.uniform(0.78, 0.92);
    if (rng.uniform() < 0.5) {
      s.rx = r;
      s.ry = r * rng.uniform(0.6, 1.0);
    } else {
      s.rx = s.ry = r;
      s.radii.resize(static_cast<std::size_t>(rng.integer(3, 7)));
      for (double& v : s.radii) v = r * rng.uniform(0.75, 1.0);
    }
  }

  // Modality a: high-frequency texture; targets barely lift it.
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    const double period = rng.uniform(3.0, 8.0) * scale;
    const double dir = rng.uniform(0.0, kPi);
    w.fx = std::cos(dir) * 2 * kPi / period;
    w.fy = std::sin(dir) * 2 * kPi / period;
    w.phase = rng.uniform(0.0, 2 * kPi);
    w.amp = rng.uniform(0.05, 0.1);
  }
  const double base_a = rng.uniform(0.4, 0.5);
  const double lift_a = rng.uniform(0.04, 0.08);

  // Modality b: dark smooth background with a gentle gradient.
  const double base_b = rng.uniform(0.15, 0.25);
  const double gx = rng.uniform(-0.05, 0.05), gy = rng.uniform(-0.05, 0.05);

  Image a(n, n), b(n, n);
  std::vector<double> mask(static_cast<std::size_t>(n) * n, 0.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double tex = 0.0;
      for (const auto& w : waves) tex += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      double va = base_a + tex + 0.03 * (rng.uniform() - 0.5);
      double vb = base_b + gx * (x / double(n) - 0.5) + gy * (y / double(n) - 0.5);
      for (const auto& s : shapes) {
        if (inside(s, x + 0.5, y + 0.5)) {
          mask[static_cast<std::size_t>(y) * n + x] = 1.0;
          va = base_a + tex + lift_a;
          vb = s.level;
        }
      }
      a.at(y, x) = va;
      b.at(y, x) = vb;
    }
  }
  b = imgcore::binomial_blur(b);
  for (auto& v : b.values()) v += 0.02 * rng.normal();
  a.clamp();
  b.clamp();
  return {io::quantized(a), io::quantized(b), SaliencyMap(n, n, std::move(mask))};
}

std::vector<SyntheticPair> gen_synthetic(std::uint64_t seed, int count, int size, std::uint64_t first_index) {
  if (count < 1) throw ArgumentError("synthetic dataset needs at least one pair");
  std::vector<SyntheticPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_pair(seed, first_index + static_cast<std::uint64_t>(i), size));
  return out;
}

double target_contrast(const Image& image, const SaliencyMap& truth) {
  double in = 0, out = 0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (truth[i] > 0.5) {
      in += image[i];
      ++n_in;
    } else {
      out += image[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) return 0.0;
  return in / n_in - out / n_out;
}

}  // namespace atnf::synthetic
