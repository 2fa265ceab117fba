#include <cmath>

#include <doctest.h>

#include "rldyn/autodiff.hpp"
#include "rldyn/rng.hpp"
#include "support/test_util.hpp"

using namespace rldyn;
using namespace rldyn::ad;
using rldyn::testutil::max_rel_err;
using rldyn::testutil::random_matrix;
using rldyn::testutil::rel_err;

namespace {

/// Small 2-hidden-layer MLP with a scalar loss, used for backward-vs-FD
/// cross-checks. Returns the loss for the current parameter values.
double mlp_scalar_loss(const ParameterSet& params, const Matrix& x, Activation act) {
  NodePtr h1 = activation(linear(constant(x), params.get("W1"), params.get("b1")), act);
  NodePtr h2 = activation(linear(h1, params.get("W2"), params.get("b2")), act);
  NodePtr out = linear(h2, params.get("W3"), params.get("b3"));
  return reduce(mul(out, out), Reduce::mean)->value.scalar();
}

ParameterSet make_mlp_params(std::size_t in, std::size_t h, std::size_t out, Rng& rng) {
  ParameterSet params;
  params.add("W1", leaf(random_matrix(in, h, rng)));
  params.add("b1", leaf(random_matrix(1, h, rng)));
  params.add("W2", leaf(random_matrix(h, h, rng)));
  params.add("b2", leaf(random_matrix(1, h, rng)));
  params.add("W3", leaf(random_matrix(h, out, rng)));
  params.add("b3", leaf(random_matrix(1, out, rng)));
  return params;
}

}  // namespace

TEST_CASE("linear: identity and hand arithmetic") {
  NodePtr x = constant(Matrix::identity(2));
  NodePtr w = leaf(Matrix::identity(2));
  NodePtr b = leaf(Matrix(1, 2));
  NodePtr y = linear(x, w, b);
  CHECK(y->value(0, 0) == 1.0);
  CHECK(y->value(0, 1) == 0.0);
  CHECK(y->value(1, 0) == 0.0);
  CHECK(y->value(1, 1) == 1.0);

  NodePtr x2 = constant(Matrix::from_rows(1, 2, {1, 2}));
  NodePtr w2 = leaf(Matrix::from_rows(2, 1, {1, 1}));
  NodePtr b2 = leaf(Matrix::from_rows(1, 1, {3}));
  CHECK(linear(x2, w2, b2)->value.scalar() == 6.0);
}

TEST_CASE("linear: shape mismatch is a configuration error") {
  NodePtr x = constant(Matrix(2, 3));
  NodePtr w = leaf(Matrix(4, 2));
  NodePtr b = leaf(Matrix(1, 2));
  CHECK_THROWS_AS(linear(x, w, b), std::invalid_argument);
  NodePtr w_ok = leaf(Matrix(3, 2));
  NodePtr b_bad = leaf(Matrix(1, 3));
  CHECK_THROWS_AS(linear(x, w_ok, b_bad), std::invalid_argument);
}

TEST_CASE("linear: backward matches finite differences on random 3x4 * 4x2") {
  Rng rng(2024);
  Matrix x = random_matrix(3, 4, rng);
  ParameterSet params;
  params.add("W", leaf(random_matrix(4, 2, rng)));
  params.add("b", leaf(random_matrix(1, 2, rng)));

  auto f = [&](const ParameterSet& p) {
    return reduce(mul(linear(constant(x), p.get("W"), p.get("b")),
                      linear(constant(x), p.get("W"), p.get("b"))),
                  Reduce::sum)
        ->value.scalar();
  };

  NodePtr y = linear(constant(x), params.get("W"), params.get("b"));
  NodePtr loss = reduce(mul(y, y), Reduce::sum);
  params.zero_gradients();
  backward(loss);

  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-6);
}

TEST_CASE("activation values and derivatives") {
  NodePtr x = leaf(Matrix::from_rows(1, 3, {-1.0, 0.0, 2.0}));

  NodePtr r = activation(x, Activation::relu);
  CHECK(r->value(0, 0) == 0.0);
  CHECK(r->value(0, 2) == 2.0);

  NodePtr t = activation(x, Activation::tanh);
  CHECK(t->value(0, 1) == 0.0);

  NodePtr s = activation(x, Activation::softplus);
  CHECK(s->value(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // tanh'(0) = 1
  ParameterSet params;
  params.add("x", x);
  params.zero_gradients();
  backward(reduce(activation(x, Activation::tanh), Reduce::sum));
  CHECK(x->grad(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("log_softmax: analytic rows and normalization invariant") {
  NodePtr uniform = constant(Matrix(3, 4, 0.7));
  NodePtr lsm = log_softmax(uniform);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(lsm->value(i, j) == doctest::Approx(std::log(0.25)).epsilon(1e-12));

  NodePtr two = constant(Matrix::from_rows(1, 2, {0.0, std::log(3.0)}));
  NodePtr lsm2 = log_softmax(two);
  CHECK(lsm2->value(0, 0) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  CHECK(lsm2->value(0, 1) == doctest::Approx(std::log(0.75)).epsilon(1e-12));

  Rng rng(7);
  Matrix logits = random_matrix(6, 5, rng, -30.0, 30.0);
  NodePtr out = log_softmax(constant(logits));
  for (std::size_t i = 0; i < 6; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 5; ++j) total += std::exp(out->value(i, j));
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("log_softmax: gradient matches finite differences on random 5x8") {
  Rng rng(11);
  ParameterSet params;
  params.add("L", leaf(random_matrix(5, 8, rng)));
  Matrix weights = random_matrix(5, 8, rng);  // fixed projection to a scalar

  auto f = [&](const ParameterSet& p) {
    return reduce(mul(log_softmax(p.get("L")), constant(weights)), Reduce::sum)
        ->value.scalar();
  };

  params.zero_gradients();
  backward(reduce(mul(log_softmax(params.get("L")), constant(weights)), Reduce::sum));
  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-6);
}

TEST_CASE("reduce: values, errors, mean backward") {
  CHECK(reduce(constant(Matrix::identity(3)), Reduce::sum)->value.scalar() == 3.0);
  CHECK(reduce(constant(Matrix::from_rows(1, 2, {2, 4})), Reduce::mean)->value.scalar() ==
        3.0);
  CHECK_THROWS_AS(reduce(constant(Matrix(0, 0)), Reduce::sum), std::invalid_argument);

  NodePtr x = leaf(Matrix(2, 3, 1.5));
  ParameterSet params;
  params.add("x", x);
  params.zero_gradients();
  backward(reduce(x, Reduce::mean));
  for (double g : x->grad.data) CHECK(g == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("backward: sum of leaf gives all-ones gradient; non-scalar seed rejected") {
  NodePtr w = leaf(Matrix(3, 2, 0.25));
  ParameterSet params;
  params.add("W", w);
  params.zero_gradients();
  backward(reduce(w, Reduce::sum));
  for (double g : w->grad.data) CHECK(g == 1.0);

  CHECK_THROWS_AS(backward(w), std::invalid_argument);
}

TEST_CASE("backward: 1x1 least squares matches the analytic gradient") {
  const double xv = 1.7, yv = -0.4, wv = 0.9;
  NodePtr w = leaf(Matrix::from_rows(1, 1, {wv}));
  ParameterSet params;
  params.add("W", w);

  NodePtr pred = linear(constant(Matrix::from_rows(1, 1, {xv})), w,
                        constant(Matrix(1, 1)));
  NodePtr err = sub(pred, constant(Matrix::from_rows(1, 1, {yv})));
  params.zero_gradients();
  backward(reduce(mul(err, err), Reduce::mean));

  const double expected = 2.0 * xv * (xv * wv - yv);
  CHECK(w->grad.scalar() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward: gradients accumulate without reset") {
  NodePtr w = leaf(Matrix(2, 2, 0.5));
  ParameterSet params;
  params.add("W", w);
  params.zero_gradients();
  backward(reduce(w, Reduce::sum));
  backward(reduce(w, Reduce::sum));
  for (double g : w->grad.data) CHECK(g == 2.0);
}

TEST_CASE("backward vs finite differences on random 2-hidden-layer MLPs") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (Activation act : {Activation::tanh, Activation::softplus}) {
      Rng rng(seed * 1000 + static_cast<int>(act));
      Matrix x = random_matrix(4, 3, rng);
      ParameterSet params = make_mlp_params(3, 5, 2, rng);

      auto f = [&](const ParameterSet& p) { return mlp_scalar_loss(p, x, act); };
      NodePtr h1 = activation(linear(constant(x), params.get("W1"), params.get("b1")), act);
      NodePtr h2 = activation(linear(h1, params.get("W2"), params.get("b2")), act);
      NodePtr out = linear(h2, params.get("W3"), params.get("b3"));
      params.zero_gradients();
      backward(reduce(mul(out, out), Reduce::mean));

      std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
      CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-5);
    }
  }
}

TEST_CASE("elementwise ops: exp, log, div backward vs finite differences") {
  Rng rng(42);
  ParameterSet params;
  params.add("a", leaf(random_matrix(3, 3, rng, 0.5, 2.0)));
  params.add("b", leaf(random_matrix(3, 3, rng, 0.5, 2.0)));

  auto graph = [](const ParameterSet& p) {
    NodePtr z = div(exp(p.get("a")), p.get("b"));
    return reduce(log(z), Reduce::sum);
  };
  auto f = [&](const ParameterSet& p) { return graph(p)->value.scalar(); };

  params.zero_gradients();
  backward(graph(params));
  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-6);
}

TEST_CASE("gather and row_sum backward vs finite differences") {
  Rng rng(43);
  ParameterSet params;
  params.add("x", leaf(random_matrix(4, 3, rng)));
  std::vector<std::size_t> idx = {2, 0, 1, 0};

  auto graph = [&](const ParameterSet& p) {
    return reduce(add(gather_cols(p.get("x"), idx), row_sum(square(p.get("x")))),
                  Reduce::mean);
  };
  auto f = [&](const ParameterSet& p) { return graph(p)->value.scalar(); };

  params.zero_gradients();
  backward(graph(params));
  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-6);
}

TEST_CASE("softmax_cross_entropy: value and gradient vs finite differences") {
  Rng rng(51);
  ParameterSet params;
  params.add("L", leaf(random_matrix(4, 5, rng)));
  Matrix target(4, 5);
  for (std::size_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      target(i, j) = rng.uniform() + 0.05;
      sum += target(i, j);
    }
    for (std::size_t j = 0; j < 5; ++j) target(i, j) /= sum;
  }

  auto graph = [&](const ParameterSet& p) {
    return reduce(softmax_cross_entropy(p.get("L"), target), Reduce::mean);
  };
  NodePtr loss = graph(params);

  // Value agrees with the composed route.
  NodePtr composed = reduce(
      neg(row_sum(mul(constant(target), log_softmax(params.get("L"))))), Reduce::mean);
  CHECK(loss->value.scalar() == doctest::Approx(composed->value.scalar()).epsilon(1e-12));

  params.zero_gradients();
  backward(loss);
  auto f = [&](const ParameterSet& p) { return graph(p)->value.scalar(); };
  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-6);
}

TEST_CASE("normal_forward_kl: zero at equality, gradient vs finite differences") {
  Rng rng(52);
  Matrix mt = random_matrix(3, 2, rng);
  Matrix st = random_matrix(3, 2, rng, 0.3, 1.5);

  // Bit-exact zero loss and zero gradient when the model equals the target.
  ParameterSet eq;
  eq.add("m", leaf(mt));
  eq.add("s", leaf(st));
  NodePtr kl_eq = reduce(normal_forward_kl(eq.get("m"), eq.get("s"), mt, st),
                         Reduce::mean);
  CHECK(kl_eq->value.scalar() == 0.0);
  eq.zero_gradients();
  backward(kl_eq);
  for (double g : eq.flatten_gradients()) CHECK(g == 0.0);

  ParameterSet params;
  params.add("m", leaf(random_matrix(3, 2, rng)));
  params.add("s", leaf(random_matrix(3, 2, rng, 0.4, 1.2)));
  auto graph = [&](const ParameterSet& p) {
    return reduce(normal_forward_kl(p.get("m"), p.get("s"), mt, st), Reduce::mean);
  };
  params.zero_gradients();
  backward(graph(params));
  auto f = [&](const ParameterSet& p) { return graph(p)->value.scalar(); };
  std::vector<double> fd = finite_difference_gradient(f, params, 1e-6);
  CHECK(max_rel_err(params.flatten_gradients(), fd) < 1e-5);
}

TEST_CASE("finite_difference_gradient: quadratic and constant cases") {
  ParameterSet params;
  params.add("p", leaf(Matrix::from_rows(1, 1, {3.0})));

  auto square_fn = [](const ParameterSet& p) {
    double v = p.get("p")->value.scalar();
    return v * v;
  };
  std::vector<double> g = finite_difference_gradient(square_fn, params, 1e-6);
  CHECK(std::abs(g[0] - 6.0) < 1e-6);

  auto const_fn = [](const ParameterSet&) { return 4.2; };
  std::vector<double> gc = finite_difference_gradient(const_fn, params, 1e-6);
  CHECK(gc[0] == 0.0);

  CHECK_THROWS_AS(finite_difference_gradient(const_fn, params, 0.0),
                  std::invalid_argument);
}

TEST_CASE("graph evaluation is deterministic") {
  auto build = [] {
    Rng rng(99);
    Matrix x = random_matrix(6, 4, rng);
    ParameterSet params = make_mlp_params(4, 8, 3, rng);
    return mlp_scalar_loss(params, x, Activation::tanh);
  };
  CHECK(build() == build());
}

TEST_CASE("ParameterSet: duplicate names rejected, flatten round-trips") {
  ParameterSet params;
  params.add("w", leaf(Matrix(2, 2, 1.0)));
  CHECK_THROWS_AS(params.add("w", leaf(Matrix(1, 1))), std::invalid_argument);
  CHECK_THROWS_AS(params.add("c", constant(Matrix(1, 1))), std::invalid_argument);

  params.add("b", leaf(Matrix::from_rows(1, 2, {3, 4})));
  std::vector<double> flat = params.flatten_values();
  CHECK(flat.size() == 6);
  flat[0] = -5.0;
  params.load_values(flat);
  CHECK(params.get("w")->value(0, 0) == -5.0);
}
