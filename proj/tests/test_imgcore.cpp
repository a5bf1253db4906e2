#include <doctest.h>

#include <cmath>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"
#include "atnf/imgcore.hpp"
#include "support.hpp"

using namespace atnf;
using namespace atnf::imgcore;
using testing::max_abs_diff;

TEST_SUITE("imgcore") {

TEST_CASE("conv2d with an identity kernel returns the input") {
  const FeatureMap x = testing::random_image(3, 3, 1).to_map();
  Tensor k({1, 1, 3, 3}, 0.0);
  k[4] = 1.0;
  CHECK(conv2d(x, k) == x);
}

TEST_CASE("conv2d mean kernel on a ramp gives 5/9 at the centre") {
  FeatureMap x = Tensor::map(1, 3, 3);
  for (int i = 0; i < 9; ++i) x[i] = (i + 1) / 9.0;
  const FeatureMap y = conv2d(x, Tensor({1, 1, 3, 3}, 1.0 / 9.0));
  CHECK(y.at(0, 1, 1) == doctest::Approx(5.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("conv2d zero-sum kernel annihilates constants in the interior") {
  const FeatureMap x = Tensor::map(1, 6, 7, 0.3);
  Tensor k({1, 1, 3, 3}, {0, 1, 0, 1, -4, 1, 0, 1, 0});
  const FeatureMap y = conv2d(x, k);
  for (int r = 1; r < 5; ++r)
    for (int c = 1; c < 6; ++c) CHECK(std::abs(y.at(0, r, c)) < 1e-15);
}

TEST_CASE("conv2d matches direct summation for strides and paddings") {
  const FeatureMap x = testing::random_tensor({2, 7, 6}, 3);
  const Tensor k = testing::random_tensor({3, 2, 3, 3}, 4);
  const Tensor b = testing::random_tensor({3}, 5);
  for (int stride : {1, 2, 3}) {
    const FeatureMap same = conv2d(x, k, b, stride, Padding::same);
    const FeatureMap ref_same = testing::naive_conv(x, k, &b, stride, 1);
    REQUIRE(same.shape() == ref_same.shape());
    CHECK(max_abs_diff(same.values(), ref_same.values()) < 1e-14);
    const FeatureMap valid = conv2d(x, k, b, stride, Padding::valid);
    const FeatureMap ref_valid = testing::naive_conv(x, k, &b, stride, 0);
    REQUIRE(valid.shape() == ref_valid.shape());
    CHECK(max_abs_diff(valid.values(), ref_valid.values()) < 1e-14);
  }
  CHECK(conv_extent(7, 3, 2, Padding::same) == 4);
  CHECK(conv_extent(7, 3, 1, Padding::valid) == 5);
}

TEST_CASE("conv2d is linear") {
  const FeatureMap x = testing::random_tensor({2, 8, 8}, 10, -0.1, 0.1);
  const FeatureMap y = testing::random_tensor({2, 8, 8}, 11, -0.1, 0.1);
  const Tensor k = testing::random_tensor({4, 2, 5, 5}, 12);
  const double a = 0.7, b = -1.3;
  FeatureMap mix = x;
  mix *= a;
  FeatureMap yb = y;
  yb *= b;
  mix += yb;
  FeatureMap lhs = conv2d(mix, k);
  FeatureMap rhs = conv2d(x, k);
  rhs *= a;
  FeatureMap ry = conv2d(y, k);
  ry *= b;
  rhs += ry;
  CHECK(max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
}

TEST_CASE("conv2d rejects bad arguments") {
  const FeatureMap x = Tensor::map(2, 4, 4);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}), 0), ArgumentError);
}

TEST_CASE("bilinear upsampling") {
  const FeatureMap x = testing::random_tensor({2, 3, 5}, 20, 0.0, 1.0);
  CHECK(bilinear_upsample(x, 1) == x);
  const FeatureMap c = bilinear_upsample(Tensor::map(1, 3, 3, 0.7), 4);
  for (double v : c.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(bilinear_upsample(x, 0), ArgumentError);

  SUBCASE("2x2 grid by 2 follows the half-pixel formula") {
    FeatureMap g = Tensor::map(1, 2, 2);
    for (int i = 0; i < 4; ++i) g[i] = i / 3.0;
    const FeatureMap up = bilinear_upsample(g, 2);
    REQUIRE(up.shape() == std::vector<int>{1, 4, 4});
    // Sample positions along each axis: clamp((d + 0.5) / 2 - 0.5) = 0, 0.25, 0.75, 1.
    const double pos[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 4; ++xx) {
        const double expect = (2.0 * pos[y] + pos[xx]) / 3.0;
        CHECK(up.at(0, y, xx) == doctest::Approx(expect).epsilon(1e-15));
      }
  }
  SUBCASE("matches direct interpolation and stays within the input range") {
    for (int f : {2, 3, 4, 8}) {
      const FeatureMap up = bilinear_upsample(x, f);
      const FeatureMap ref = testing::naive_upsample(x, f);
      CHECK(max_abs_diff(up.values(), ref.values()) < 1e-14);
      const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
      for (double v : up.values()) {
        CHECK(v >= *lo);
        CHECK(v <= *hi);
      }
    }
  }
}

TEST_CASE("laplacian responses") {
  const FeatureMap zero = laplacian(Image(6, 6, 0.42));
  CHECK(testing::max_abs(zero.values()) == 0.0);

  SUBCASE("affine images give an exactly zero interior") {
    Image ramp(8, 9);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 9; ++x) ramp.at(y, x) = x / 16.0 + y / 64.0;
    const FeatureMap l = laplacian(ramp);
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 8; ++x) CHECK(l.at(0, y, x) == 0.0);
  }
  SUBCASE("impulse gives -4v at the centre and v at the four neighbours") {
    const double v = 0.75;
    Image img(8, 8, 0.0);
    img.at(4, 3) = v;
    const FeatureMap l = laplacian(img);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        double expect = 0.0;
        if (y == 4 && x == 3) expect = -4 * v;
        else if (std::abs(y - 4) + std::abs(x - 3) == 1) expect = v;
        CHECK(l.at(0, y, x) == expect);
      }
  }
  const Tensor k = laplacian_kernel();
  CHECK(k.shape() == std::vector<int>{3, 3});
  CHECK(k.storage() == std::vector<double>{0, 1, 0, 1, -4, 1, 0, 1, 0});
}

TEST_CASE("downsample2") {
  FeatureMap q = Tensor::map(1, 2, 2);
  q[0] = 0.1, q[1] = 0.2, q[2] = 0.4, q[3] = 0.8;
  CHECK(downsample2(q).at(0, 0, 0) == doctest::Approx(1.5 / 4).epsilon(1e-15));

  FeatureMap board = Tensor::map(1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) board.at(0, y, x) = (x + y) % 2;
  const FeatureMap d = downsample2(board);
  CHECK(d.shape() == std::vector<int>{1, 2, 2});
  for (double v : d.values()) CHECK(v == 0.5);

  const FeatureMap c = downsample2(Tensor::map(2, 6, 4, 0.3));
  CHECK(c.shape() == std::vector<int>{2, 3, 2});
  for (double v : c.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

  const FeatureMap r = testing::random_tensor({1, 10, 12}, 30, 0.0, 1.0);
  double m0 = 0.0, m1 = 0.0;
  for (double v : r.values()) m0 += v;
  const FeatureMap rd = downsample2(r);
  for (double v : rd.values()) m1 += v;
  CHECK(std::abs(m0 / r.size() - m1 / rd.size()) < 1e-12);

  FeatureMap odd = Tensor::map(1, 3, 3);
  for (int i = 0; i < 9; ++i) odd[i] = i;
  const FeatureMap od = downsample2(odd);
  REQUIRE(od.shape() == std::vector<int>{1, 2, 2});
  CHECK(od.at(0, 0, 0) == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
  CHECK(od.at(0, 0, 1) == doctest::Approx((2 + 5) / 2.0));
  CHECK(od.at(0, 1, 0) == doctest::Approx((6 + 7) / 2.0));
  CHECK(od.at(0, 1, 1) == 8.0);

  CHECK_THROWS_AS(downsample2(Tensor::map(1, 1, 8)), ArgumentError);
}

TEST_CASE("gaussian pyramid") {
  const Image x = testing::random_image(16, 16, 40);
  const auto one = gaussian_pyramid(x, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == x);

  for (const Image& level : gaussian_pyramid(Image(16, 16, 0.6), 4))
    for (double v : level.values()) CHECK(v == doctest::Approx(0.6).epsilon(1e-15));

  SUBCASE("impulse level 1 equals products of binomial taps") {
    Image imp(8, 8, 0.0);
    imp.at(4, 4) = 1.0;
    const auto pyr = gaussian_pyramid(imp, 2);
    REQUIRE(pyr.size() == 2);
    REQUIRE(pyr[1].height() == 4);
    const double taps[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    auto tap = [&](int d) { return std::abs(d) <= 2 ? taps[d + 2] : 0.0; };
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(pyr[1].at(i, j) == doctest::Approx(tap(2 * i - 4) * tap(2 * j - 4)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(gaussian_pyramid(Image(8, 8), 5), ArgumentError);
  CHECK_THROWS_AS(gaussian_pyramid(Image(8, 8), 0), ArgumentError);
}

TEST_CASE("pyramid expand of a constant is constant") {
  const Image e = pyramid_expand(Image(4, 5, 0.25), 8, 9);
  CHECK(e.height() == 8);
  CHECK(e.width() == 9);
  for (double v : e.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

}  // TEST_SUITE

TEST_SUITE("io") {

TEST_CASE("8-bit quantisation round-trips every level") {
  for (int q = 0; q < 256; ++q) CHECK(io::quantize(io::dequantize(static_cast<std::uint8_t>(q))) == q);
  CHECK(io::quantize(-0.5) == 0);
  CHECK(io::quantize(1.5) == 255);
  CHECK(io::quantize(0.75) == 191);  // 191.25
  CHECK(io::quantize(0.5) == 128);   // 127.5 rounds up
}

TEST_CASE("PNG and PGM storage are lossless for quantised images") {
  const auto dir = testing::scratch_dir("io");
  const Image img = io::quantized(testing::random_image(13, 7, 50));
  for (const char* name : {"x.png", "x.pgm"}) {
    io::save_image(img, dir / name);
    const Image back = io::load_image(dir / name);
    CHECK(back == img);
  }
  CHECK(io::read_file(dir / "x.pgm").starts_with("P5"));
  CHECK(io::read_file(dir / "x.png").substr(1, 3) == "PNG");
  CHECK_THROWS_AS(io::load_image(dir / "missing.png"), DataError);
  io::write_file_atomic(dir / "junk.png", "not an image");
  CHECK_THROWS_AS(io::load_image(dir / "junk.png"), DataError);
}

TEST_CASE("Image and SaliencyMap clamp to [0, 1]") {
  FeatureMap m = Tensor::map(1, 1, 3);
  m[0] = -1, m[1] = 0.5, m[2] = 3;
  const Image img = Image::from_map(m);
  CHECK(img.values()[0] == 0.0);
  CHECK(img.values()[1] == 0.5);
  CHECK(img.values()[2] == 1.0);
  const SaliencyMap s(1, 3, std::vector<double>{-2, 0.25, 2});
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 0.25);
  CHECK(s[2] == 1.0);
}

}  // TEST_SUITE
