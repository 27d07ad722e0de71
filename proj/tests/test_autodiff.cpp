#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"

#include "dgm/autodiff.hpp"
#include "dgm/rng.hpp"

using namespace dgm;
using ad::Tape;
using ad::Value;

namespace {

double fd1(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("input nodes hold their value") {
  Tape t;
  Value a = t.input(2.5);
  CHECK(a.value() == 2.5);
  CHECK(t.size() == 1);
}

TEST_CASE("arithmetic forwards exactly") {
  Tape t;
  Value a = t.input(3.0), b = t.input(2.0);
  CHECK((a + b).value() == 5.0);
  CHECK((a - b).value() == 1.0);
  CHECK((a * b).value() == 6.0);
  CHECK((a / b).value() == 1.5);
  CHECK((-a).value() == -3.0);
  CHECK((a + 1.5).value() == 4.5);
  CHECK((1.5 + a).value() == 4.5);
  CHECK((a - 1.0).value() == 2.0);
  CHECK((10.0 - a).value() == 7.0);
  CHECK((a * 2.0).value() == 6.0);
  CHECK((2.0 * a).value() == 6.0);
  CHECK((a / 2.0).value() == 1.5);
}

TEST_CASE("unary forwards match the scalar shim") {
  Tape t;
  for (double x : {-1.7, -0.3, 0.4, 2.2}) {
    Value v = t.input(x);
    CHECK(ad::exp(v).value() == sm::exp(x));
    CHECK(ad::logistic(v).value() == sm::logistic(x));
    CHECK(ad::softplus(v).value() == sm::softplus(x));
    CHECK(ad::relu(v).value() == sm::relu(x));
    CHECK(ad::abs(v).value() == sm::abs(x));
    CHECK(ad::clamp(v, -1.0, 1.0).value() == sm::clamp(x, -1.0, 1.0));
  }
  CHECK(ad::log(t.input(2.0)).value() == sm::log(2.0));
}

TEST_CASE("simple gradients are exact") {
  Tape t;
  Value x = t.input(3.0), y = t.input(2.0);
  Value out = x * y + x;  // d/dx = y + 1, d/dy = x
  t.backward(out);
  CHECK(t.grad(x) == 3.0);
  CHECK(t.grad(y) == 3.0);
}

TEST_CASE("fan-out accumulates gradients") {
  Tape t;
  Value x = t.input(1.5);
  Value out = x * x * x;  // 3 x^2
  t.backward(out);
  CHECK(t.grad(x) == doctest::Approx(3.0 * 1.5 * 1.5).epsilon(1e-14));
}

TEST_CASE("division gradient") {
  Tape t;
  Value a = t.input(3.0), b = t.input(4.0);
  Value out = a / b;
  t.backward(out);
  CHECK(t.grad(a) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(t.grad(b) == doctest::Approx(-3.0 / 16.0).epsilon(1e-14));
}

TEST_CASE("unary gradients match finite differences") {
  struct Case {
    std::function<Value(Value)> op;
    std::function<double(double)> ref;
    std::vector<double> points;
  };
  const std::vector<Case> cases = {
      {[](Value v) { return ad::exp(v); }, [](double x) { return std::exp(x); }, {-1.0, 0.3, 1.7}},
      {[](Value v) { return ad::log(v); }, [](double x) { return std::log(x); }, {0.2, 1.0, 3.5}},
      {[](Value v) { return ad::logistic(v); }, [](double x) { return sm::logistic(x); },
       {-2.0, 0.1, 2.4}},
      {[](Value v) { return ad::softplus(v); }, [](double x) { return sm::softplus(x); },
       {-3.0, 0.2, 4.0}},
      {[](Value v) { return ad::relu(v); }, [](double x) { return sm::relu(x); }, {-1.2, 0.8}},
      {[](Value v) { return ad::abs(v); }, [](double x) { return std::fabs(x); }, {-0.7, 0.9}},
  };
  for (const auto& c : cases) {
    for (double x : c.points) {
      Tape t;
      Value v = t.input(x);
      t.backward(c.op(v));
      const double fd = fd1(c.ref, x);
      CHECK(ad::rel_err(t.grad(v), fd) < 2e-9);
    }
  }
}

TEST_CASE("kink conventions: zero gradient at the corner") {
  Tape t;
  Value a = t.input(0.0);
  t.backward(ad::relu(a));
  CHECK(t.grad(a) == 0.0);

  Tape t2;
  Value b = t2.input(0.0);
  t2.backward(ad::abs(b));
  CHECK(t2.grad(b) == 0.0);
}

TEST_CASE("clamp passes gradient only strictly inside") {
  for (double x : {-1.5, -1.0, 0.3, 1.0, 1.5}) {
    Tape t;
    Value v = t.input(x);
    t.backward(ad::clamp(v, -1.0, 1.0));
    const double expect = (x > -1.0 && x < 1.0) ? 1.0 : 0.0;
    CHECK(t.grad(v) == expect);
  }
}

TEST_CASE("constant-side operations fold into one node") {
  Tape t;
  Value x = t.input(2.0);
  const std::size_t before = t.size();
  Value y = x * 3.0 + 1.0;
  CHECK(t.size() == before + 2);  // MulC and AddC only
  t.backward(y);
  CHECK(t.grad(x) == 3.0);

  Tape t2;
  Value z = t2.input(2.0);
  Value w = 5.0 - z;
  CHECK(t2.size() == 2);
  t2.backward(w);
  CHECK(t2.grad(z) == -1.0);
}

TEST_CASE("composite expression gradient vs finite differences") {
  auto f = [](std::span<const double> x) {
    double a = x[0], b = x[1], c = x[2];
    return std::exp(a * b) / (1.0 + c * c) + sm::softplus(a - c) * 0.5;
  };
  const std::vector<double> x0 = {0.4, -0.7, 1.2};
  const std::vector<double> fd = ad::finite_difference(f, x0);

  Tape t;
  Value a = t.input(x0[0]), b = t.input(x0[1]), c = t.input(x0[2]);
  Value out = ad::exp(a * b) / (1.0 + c * c) + ad::softplus(a - c) * 0.5;
  CHECK(out.value() == doctest::Approx(f(x0)).epsilon(1e-15));
  t.backward(out);
  CHECK(ad::rel_err(t.grad(a), fd[0]) < 1e-8);
  CHECK(ad::rel_err(t.grad(b), fd[1]) < 1e-8);
  CHECK(ad::rel_err(t.grad(c), fd[2]) < 1e-8);
}

TEST_CASE("gradients of many random dag expressions match finite differences") {
  Rng rng(6021);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x0(4);
    for (double& v : x0) v = rng.uniform(0.3, 1.7);  // positive keeps log/div safe
    auto f = [](std::span<const double> v) {
      double a = v[0], b = v[1], c = v[2], d = v[3];
      double u = std::log(a) * b + c / d;
      double w = sm::logistic(u) * sm::softplus(a * d - b);
      return w + std::fabs(c - b) * 0.25 + sm::clamp(u, -0.5, 0.5);
    };
    Tape t;
    Value a = t.input(x0[0]), b = t.input(x0[1]), c = t.input(x0[2]), d = t.input(x0[3]);
    Value u = ad::log(a) * b + c / d;
    Value w = ad::logistic(u) * ad::softplus(a * d - b);
    Value out = w + ad::abs(c - b) * 0.25 + ad::clamp(u, -0.5, 0.5);
    CHECK(out.value() == doctest::Approx(f(x0)).epsilon(1e-12));
    t.backward(out);
    const std::vector<double> fd = ad::finite_difference(f, x0);
    const Value vars[4] = {a, b, c, d};
    for (int i = 0; i < 4; ++i) {
      // skip points that landed too close to the abs/clamp kinks
      if (std::fabs(x0[2] - x0[1]) < 1e-3) continue;
      if (std::fabs(std::fabs(std::log(x0[0]) * x0[1] + x0[2] / x0[3]) - 0.5) < 1e-3) continue;
      CHECK(ad::rel_err(t.grad(vars[i]), fd[static_cast<std::size_t>(i)]) < 1e-6);
    }
  }
}

TEST_CASE("tape reuse after clear") {
  Tape t;
  Value a = t.input(2.0);
  t.backward(a * a);
  CHECK(t.grad(a) == 4.0);
  t.clear();
  CHECK(t.size() == 0);
  Value b = t.input(3.0);
  t.backward(b * 2.0);
  CHECK(t.grad(b) == 2.0);
}

TEST_CASE("mixing tapes throws") {
  Tape t1, t2;
  Value a = t1.input(1.0);
  Value b = t2.input(2.0);
  CHECK_THROWS_AS(a + b, Error);
  CHECK_THROWS_AS(t1.grad(b), Error);
}

TEST_CASE("zero_like creates a fresh zero input on the same tape") {
  Tape t;
  Value a = t.input(5.0);
  Value z = sm::zero_like(a);
  CHECK(z.value() == 0.0);
  CHECK(z.tape() == &t);
}

TEST_CASE("finite differences of a quadratic are near-exact") {
  auto f = [](std::span<const double> x) { return x[0] * x[0] + 3.0 * x[1]; };
  const std::vector<double> x0 = {1.5, -2.0};
  const std::vector<double> fd = ad::finite_difference(f, x0);
  CHECK(fd[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(fd[1] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("relative error floors tiny magnitudes") {
  CHECK(ad::rel_err(0.0, 0.0) == 0.0);
  CHECK(ad::rel_err(1e-12, 0.0) == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(ad::rel_err(2.0, 1.0) == 0.5);
}

TEST_CASE("backward on a lone input gives unit gradient") {
  Tape t;
  Value a = t.input(7.0);
  t.backward(a);
  CHECK(t.grad(a) == 1.0);
}

TEST_CASE("min max against constants gate strictly") {
  for (double x : {-0.5, 0.5, 1.0, 1.5}) {
    Tape t;
    Value v = t.input(x);
    t.backward(ad::vmin(v, 1.0));
    CHECK(t.grad(v) == (x < 1.0 ? 1.0 : 0.0));
    Tape t2;
    Value w = t2.input(x);
    t2.backward(ad::vmax(w, 0.5));
    CHECK(t2.grad(w) == (x > 0.5 ? 1.0 : 0.0));
  }
}
