#include <doctest.h>

#include <cmath>

#include "atnf/error.hpp"
#include "op_checks.hpp"

using namespace atnf;

TEST_SUITE("autograd") {

TEST_CASE("ReLU passes no gradient at negative pre-activations") {
  ad::Graph g;
  Tensor x({1, 1, 4}, {-1.0, 0.5, -0.25, 2.0});
  ad::Var v = g.leaf(x);
  g.backward(ad::sum(ad::relu(v)));
  CHECK(g.grad(v).storage() == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("gating gradient with respect to the image is the gate") {
  ad::Graph g;
  const Tensor s = testing::random_tensor({1, 3, 4}, 1, 0.0, 1.0);
  ad::Var sv = g.constant(s);
  ad::Var x = g.leaf(testing::random_tensor({2, 3, 4}, 2));
  g.backward(ad::sum(ad::gate(sv, x)));
  const Tensor gx = g.grad(x);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(gx[c * s.size() + i] == s[i]);
}

TEST_CASE("gradients accumulate over shared uses") {
  ad::Graph g;
  ad::Var x = g.leaf(Tensor({1}, 3.0));
  g.backward(ad::mul(x, x));
  CHECK(g.grad(x)[0] == 6.0);
}

TEST_CASE("backward needs a recorded forward pass") {
  ad::Graph infer(false);
  ad::Var x = infer.leaf(Tensor({1}, 1.0));
  CHECK_THROWS_AS(infer.backward(ad::sum(x)), StateError);
  ad::Graph g;
  ad::Var y = g.leaf(Tensor({1}, 1.0));
  CHECK_THROWS_AS(g.grad(y), StateError);
  CHECK_THROWS_AS(ad::Var{}.value(), StateError);
}

TEST_CASE("frozen tensors are constants with zero gradient") {
  Tensor a({1}, 2.0), b({1}, 5.0);
  ad::Binder::TensorSet trainable = {&a};
  ad::Graph g;
  ad::Binder bind(g, &trainable);
  g.backward(ad::mul(bind(a), bind(b)));
  CHECK(bind.gradient(a)[0] == 5.0);
  CHECK(bind.gradient(b)[0] == 0.0);
}

TEST_CASE("standardize and replicate padding") {
  ad::Graph g(false);
  const Tensor x = testing::random_tensor({2, 5, 4}, 3);
  const Tensor s = ad::standardize(g.constant(x), 1e-4).value();
  for (int c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0;
    for (double e : s.channel(c)) m += e;
    m /= 20;
    for (double e : s.channel(c)) v += (e - m) * (e - m);
    CHECK(std::abs(m) < 1e-14);
    CHECK(v / 20 == doctest::Approx(1.0).epsilon(1e-3));
  }
  const Tensor p = ad::pad_replicate(g.constant(x), 2).value();
  CHECK(p.shape() == std::vector<int>{2, 9, 8});
  CHECK(p.at(1, 0, 0) == x.at(1, 0, 0));
  CHECK(p.at(0, 8, 7) == x.at(0, 4, 3));
  CHECK(p.at(0, 3, 5) == x.at(0, 1, 3));
}

}  // TEST_SUITE

TEST_SUITE("gradcheck") {

TEST_CASE("linear single-layer toy with the SSIM loss") {
  Tensor k = testing::random_tensor({1, 1, 3, 3}, 4, 0.0, 0.3), b({1}, 0.1);
  const Tensor x = testing::random_tensor({1, 8, 8}, 5, 0.0, 1.0);
  const Tensor y = testing::random_tensor({1, 8, 8}, 6, 0.0, 1.0);
  const auto r = gradcheck::grad_check({{"k", &k}, {"b", &b}}, [&](ad::Binder& bd) {
    ad::Graph& g = bd.graph();
    return ad::sub(g.constant(Tensor({1}, 1.0)),
                   losses::ssim_index(ad::conv2d(g.constant(x), bd(k), bd(b)), g.constant(y)));
  });
  CHECK(r.checked == 10);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("every building block passes on one seed") {
  for (const auto& c : testing::op_gradient_checks(0)) {
    INFO(c.op);
    CHECK(c.report.checked > 0);
    CHECK(c.report.max_rel_error <= 1e-4);
  }
}

TEST_CASE("a wrong gradient is detected") {
  Tensor x = testing::random_tensor({1, 2, 2}, 7);
  const auto r = gradcheck::grad_check({{"x", &x}}, [&](ad::Binder& bd) {
    ad::Var v = bd(x);
    // Forward is sum(x^2) but the backward claims 3x.
    Tensor y({1}, 0.0);
    for (double e : v.value().values()) y[0] += e * e;
    return v.graph->emit(std::move(y), {v}, [v](ad::Graph& g, const Tensor& d) {
      Tensor gx = v.value();
      gx *= 3.0 * d[0];
      g.accumulate(v, std::move(gx));
    });
  });
  CHECK(r.max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("result does not depend on parameter order") {
  Tensor k = testing::random_tensor({2, 1, 3, 3}, 8), x = testing::random_tensor({1, 6, 6}, 9);
  auto loss = [&](ad::Binder& bd) { return testing::project(ad::sigmoid(ad::conv2d(bd(x), bd(k))), 1); };
  const auto r1 = gradcheck::grad_check({{"k", &k}, {"x", &x}}, loss);
  const auto r2 = gradcheck::grad_check({{"x", &x}, {"k", &k}}, loss);
  CHECK(r1.max_rel_error == r2.max_rel_error);
  CHECK(r1.checked == r2.checked);
}

TEST_CASE("argument and numeric errors") {
  Tensor x({1}, 1.0);
  auto loss = [&](ad::Binder& bd) { return ad::sum(bd(x)); };
  gradcheck::Options o;
  o.eps = 0;
  CHECK_THROWS_AS(gradcheck::grad_check({{"x", &x}}, loss, o), ArgumentError);
  CHECK_THROWS_AS(gradcheck::grad_check({{"x", &x}}, [&](ad::Binder& bd) { return ad::scale(bd(x), INFINITY); }),
                  NumericError);
}

}  // TEST_SUITE
