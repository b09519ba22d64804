#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "newsrec/error.hpp"
#include "newsrec/gradcheck.hpp"
#include "newsrec/nn.hpp"
#include "newsrec/optim.hpp"
#include "oracles.hpp"

using namespace newsrec;

namespace {

double max_abs_diff(const Tensor& t, const oracle::Mat& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j)
      worst = std::max(worst, std::abs(t.at(i, j) - m[i][j]));
  return worst;
}

double max_abs_diff(const Tensor& t, const oracle::Vec& v) {
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(t[i] - v[i]));
  return worst;
}

void set_param(Parameter& p, const oracle::Mat& m) { p.value = oracle::to_tensor(m); }
void set_param(Parameter& p, const oracle::Vec& v) { p.value = oracle::to_tensor(v); }

// Random linear functional of a tensor output, so a gradient check sees
// every output entry.
Var probe(Tape& tape, Var out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(out.shape());
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  return dot(out, tape.constant(std::move(w)));
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(t.reshaped({4}), DimensionError);
}

TEST_CASE("matmul") {
  Tape tape;
  SUBCASE("identity") {
    Var eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK(matmul(eye, m).value() == m.value());
  }
  SUBCASE("annihilating row") {
    Var a = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 0}));
    Var b = tape.constant(Tensor::matrix(2, 1, {0, 5}));
    CHECK(matmul(a, b).value() == Tensor::matrix(2, 1, {0, 0}));
  }
  SUBCASE("random against triple loop") {
    Rng rng(11);
    auto a = oracle::random_mat(rng, 3, 4);
    auto b = oracle::random_mat(rng, 4, 2);
    Var c = matmul(tape.constant(oracle::to_tensor(a)), tape.constant(oracle::to_tensor(b)));
    CHECK(max_abs_diff(c.value(), oracle::matmul(a, b)) <= 1e-12);
  }
  SUBCASE("shape mismatch names both shapes") {
    Var a = tape.constant(Tensor(Shape{2, 3}));
    Var b = tape.constant(Tensor(Shape{2, 3}));
    try {
      matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
    }
  }
  SUBCASE("associativity") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      auto a = oracle::random_mat(rng, 3, 4);
      auto b = oracle::random_mat(rng, 4, 5);
      auto c = oracle::random_mat(rng, 5, 2);
      Var va = tape.constant(oracle::to_tensor(a));
      Var vb = tape.constant(oracle::to_tensor(b));
      Var vc = tape.constant(oracle::to_tensor(c));
      Var left = matmul(matmul(va, vb), vc);
      Var right = matmul(va, matmul(vb, vc));
      CHECK(max_abs_diff(left.value(), oracle::to_mat(right.value())) <= 1e-9);
    }
  }
}

TEST_CASE("softmax_masked") {
  Tape tape;
  Var a = softmax_masked(tape.constant(Tensor::vector({0, 0})), {true, true});
  CHECK(a.value()[0] == doctest::Approx(0.5));
  CHECK(a.value()[1] == doctest::Approx(0.5));
  Var b = softmax_masked(tape.constant(Tensor::vector({9, 3})), {true, false});
  CHECK(b.value()[0] == 1.0);
  CHECK(b.value()[1] == 0.0);
  Var c = softmax_masked(tape.constant(Tensor::vector({1, 2, 3})), {true, true, true});
  CHECK(std::abs(c.value()[0] - 0.09003) < 1e-5);
  CHECK(std::abs(c.value()[1] - 0.24473) < 1e-5);
  CHECK(std::abs(c.value()[2] - 0.66524) < 1e-5);
  CHECK_THROWS_AS(softmax_masked(tape.constant(Tensor::vector({1, 2})), {false, false}),
                  DegenerateInputError);

  SUBCASE("rows sum to one and permute with their inputs") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.index(6);
      auto x = oracle::random_vec(rng, n, -5, 5);
      Mask mask(n);
      for (std::size_t i = 0; i < n; ++i) mask[i] = rng.bernoulli(0.7);
      mask[rng.index(n)] = true;
      Var y = softmax_masked(tape.constant(oracle::to_tensor(x)), mask);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        total += y.value()[i];
        if (!mask[i]) CHECK(y.value()[i] == 0.0);
        else CHECK(y.value()[i] > 0.0);
      }
      CHECK(std::abs(total - 1.0) <= 1e-6);
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng.engine());
      oracle::Vec px(n);
      Mask pm(n);
      for (std::size_t i = 0; i < n; ++i) {
        px[i] = x[perm[i]];
        pm[i] = mask[perm[i]];
      }
      Var py = softmax_masked(tape.constant(oracle::to_tensor(px)), pm);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(py.value()[i] - y.value()[perm[i]]) <= 1e-12);
    }
  }
}

TEST_CASE("conv1d_same") {
  ParameterStore store;
  Rng rng(21);
  SUBCASE("zero kernels give the bias") {
    Conv1d conv = Conv1d::create(store, "conv", 3, 2, 2, rng);
    conv.kernels->value.fill(0.0);
    set_param(*conv.bias, oracle::Vec{0.5, -1.0});
    Tape tape;
    Var out = conv1d_same(tape, conv, tape.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6})));
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(out.value().at(t, 0) == 0.5);
      CHECK(out.value().at(t, 1) == -1.0);
    }
  }
  SUBCASE("window one with identity kernel") {
    Conv1d conv = Conv1d::create(store, "conv", 1, 2, 2, rng);
    conv.kernels->value = Tensor(Shape{1, 2, 2}, {1, 0, 0, 1});
    set_param(*conv.bias, oracle::Vec{1.0, 2.0});
    Tape tape;
    Var out = conv1d_same(tape, conv, tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})));
    CHECK(out.value() == Tensor::matrix(2, 2, {2, 4, 4, 6}));
  }
  SUBCASE("sliding window oracle") {
    Conv1d conv = Conv1d::create(store, "conv", 3, 4, 3, rng);
    oracle::Kernel k(3, oracle::random_mat(rng, 4, 3));
    for (auto& slice : k) slice = oracle::random_mat(rng, 4, 3);
    std::vector<double> flat;
    for (auto& slice : k)
      for (auto& r : slice) flat.insert(flat.end(), r.begin(), r.end());
    conv.kernels->value = Tensor(Shape{3, 4, 3}, flat);
    auto bias = oracle::random_vec(rng, 3);
    set_param(*conv.bias, bias);
    auto seq = oracle::random_mat(rng, 5, 4);
    Tape tape;
    Var out = conv1d_same(tape, conv, tape.constant(oracle::to_tensor(seq)));
    CHECK(max_abs_diff(out.value(), oracle::conv1d_same(seq, k, bias)) <= 1e-10);
  }
  SUBCASE("even window is a configuration error") {
    CHECK_THROWS_AS(Conv1d::create(store, "bad", 2, 2, 2, rng), ConfigError);
  }
}

TEST_CASE("additive_attention_pool") {
  ParameterStore store;
  Rng rng(8);
  AdditiveAttention att = AdditiveAttention::create(store, "att", 3, 2, rng);
  SUBCASE("singleton") {
    Tape tape;
    auto pool = additive_attention_pool(tape, att, tape.constant(Tensor::matrix(1, 3, {1, 2, 3})),
                                        {true});
    CHECK(pool.pooled.value() == Tensor::vector({1, 2, 3}));
    CHECK(pool.weights.value() == Tensor::vector({1}));
  }
  SUBCASE("identical rows") {
    Tape tape;
    auto pool = additive_attention_pool(
        tape, att, tape.constant(Tensor::matrix(4, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3})),
        {true, true, true, true});
    for (std::size_t i = 0; i < 4; ++i) CHECK(pool.weights.value()[i] == doctest::Approx(0.25));
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(std::abs(pool.pooled.value()[c] - (c + 1.0)) < 1e-12);
  }
  SUBCASE("scalar-loop oracle and convex hull") {
    for (int trial = 0; trial < 10; ++trial) {
      auto w = oracle::random_mat(rng, 3, 2);
      auto b = oracle::random_vec(rng, 2);
      auto q = oracle::random_vec(rng, 2);
      set_param(*att.projection, w);
      set_param(*att.bias, b);
      set_param(*att.query, q);
      auto seq = oracle::random_mat(rng, 4, 3);
      Mask mask{true, rng.bernoulli(0.5), true, rng.bernoulli(0.5)};
      Tape tape;
      auto pool = additive_attention_pool(tape, att, tape.constant(oracle::to_tensor(seq)), mask);
      auto expect = oracle::additive_attention(seq, mask, w, b, q);
      CHECK(max_abs_diff(pool.pooled.value(), expect.pooled) <= 1e-10);
      CHECK(max_abs_diff(pool.weights.value(), expect.weights) <= 1e-10);
      double total = 0.0;
      for (double v : pool.weights.value().values()) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
  SUBCASE("fully masked propagates") {
    Tape tape;
    CHECK_THROWS_AS(additive_attention_pool(tape, att, tape.constant(Tensor(Shape{2, 3})),
                                            {false, false}),
                    DegenerateInputError);
  }
}

TEST_CASE("multi_head_self_attention") {
  ParameterStore store;
  Rng rng(17);
  SUBCASE("singleton is the value projection") {
    auto mhsa = MultiHeadSelfAttention::create(store, "mhsa", 3, 4, 2, rng);
    auto seq = oracle::random_mat(rng, 1, 3);
    Tape tape;
    Var out = multi_head_self_attention(tape, mhsa, tape.constant(oracle::to_tensor(seq)), {true});
    auto v = oracle::matmul(seq, oracle::to_mat(mhsa.value->value));
    CHECK(max_abs_diff(out.value(), v) <= 1e-12);
  }
  SUBCASE("identical rows give identical outputs") {
    auto mhsa = MultiHeadSelfAttention::create(store, "mhsa", 3, 4, 2, rng);
    Tape tape;
    Var out = multi_head_self_attention(
        tape, mhsa, tape.constant(Tensor::matrix(3, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3})),
        {true, true, false});
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(out.value().at(0, c) == doctest::Approx(out.value().at(1, c)));
      CHECK(out.value().at(2, c) == 0.0);
    }
  }
  SUBCASE("per-head oracle") {
    auto mhsa = MultiHeadSelfAttention::create(store, "mhsa", 3, 4, 2, rng);
    auto seq = oracle::random_mat(rng, 3, 3);
    Mask mask{true, true, false};
    Tape tape;
    Var out = multi_head_self_attention(tape, mhsa, tape.constant(oracle::to_tensor(seq)), mask);
    auto expect = oracle::mhsa(seq, mask, oracle::to_mat(mhsa.query->value),
                               oracle::to_mat(mhsa.key->value),
                               oracle::to_mat(mhsa.value->value), 2);
    CHECK(max_abs_diff(out.value(), expect) <= 1e-10);
  }
  SUBCASE("indivisible heads") {
    CHECK_THROWS_AS(MultiHeadSelfAttention::create(store, "bad", 3, 5, 2, rng), ConfigError);
  }
}

TEST_CASE("gru_forward") {
  ParameterStore store;
  Rng rng(33);
  Gru gru = Gru::create(store, "gru", 3, 2, rng);
  auto weights_of = [&] {
    return oracle::GruWeights{oracle::to_mat(gru.input_update->value),
                              oracle::to_mat(gru.input_reset->value),
                              oracle::to_mat(gru.input_cand->value),
                              oracle::to_mat(gru.state_update->value),
                              oracle::to_mat(gru.state_reset->value),
                              oracle::to_mat(gru.state_cand->value),
                              gru.bias_update->value.data(),
                              gru.bias_reset->value.data(),
                              gru.bias_cand->value.data()};
  };
  SUBCASE("zero weights halve the state") {
    for (Parameter* p : store.all()) p->value.fill(0.0);
    Tape tape;
    auto out = gru_forward(tape, gru, tape.constant(oracle::to_tensor(oracle::random_mat(rng, 3, 3))),
                           {true, true, true}, tape.constant(Tensor::vector({1.0, -2.0})));
    CHECK(out.last.value()[0] == doctest::Approx(0.125));
    CHECK(out.last.value()[1] == doctest::Approx(-0.25));
  }
  SUBCASE("all masked returns h0") {
    Tape tape;
    Var h0 = tape.constant(Tensor::vector({0.3, 0.7}));
    auto out = gru_forward(tape, gru, tape.constant(Tensor(Shape{2, 3})), {false, false}, h0);
    CHECK(out.last.value() == h0.value());
  }
  SUBCASE("unrolled oracle") {
    auto seq = oracle::random_mat(rng, 4, 3);
    Mask mask{true, false, true, true};
    oracle::Vec h0{0.1, -0.2};
    Tape tape;
    auto out = gru_forward(tape, gru, tape.constant(oracle::to_tensor(seq)), mask,
                           tape.constant(oracle::to_tensor(h0)));
    auto expect = oracle::gru(seq, mask, weights_of(), h0);
    CHECK(max_abs_diff(out.states.value(), expect.states) <= 1e-10);
    CHECK(max_abs_diff(out.last.value(), expect.last) <= 1e-10);
  }
  SUBCASE("masked suffix equals unmasked prefix") {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t prefix = 1 + rng.index(4);
      auto seq = oracle::random_mat(rng, prefix + 3, 3);
      Mask full(prefix + 3, false);
      for (std::size_t i = 0; i < prefix; ++i) full[i] = true;
      oracle::Mat head(seq.begin(), seq.begin() + static_cast<long>(prefix));
      Tape tape;
      Var h0 = tape.constant(Tensor::vector({0.0, 0.0}));
      auto a = gru_forward(tape, gru, tape.constant(oracle::to_tensor(seq)), full, h0);
      auto b = gru_forward(tape, gru, tape.constant(oracle::to_tensor(head)), Mask(prefix, true), h0);
      CHECK(a.last.value() == b.last.value());
    }
  }
}

TEST_CASE("backward") {
  ParameterStore store;
  Parameter& w = store.add("w", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Parameter& unused = store.add("unused", Tensor::vector({1, 1}));
  SUBCASE("linear map") {
    Tape tape;
    tape.parameter(unused);
    Var x = tape.constant(Tensor::vector({0.5, -2.0, 3.0}));
    Var loss = sum(matmul(tape.parameter(w), reshape(x, {3, 1})));
    tape.backward(loss);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(w.grad.at(r, 0) == 0.5);
      CHECK(w.grad.at(r, 1) == -2.0);
      CHECK(w.grad.at(r, 2) == 3.0);
    }
    CHECK(unused.has_grad);
    CHECK(unused.grad == Tensor::vector({0, 0}));
  }
  SUBCASE("non-scalar loss") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(tape.parameter(w)), UsageError);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameter unchanged") {
    ParameterStore store;
    Parameter& p = store.add("p", Tensor::vector({1.0, -3.0}));
    p.zero_grad();
    std::vector<Parameter*> params{&p};
    adam_step(params, {});
    CHECK(p.value == Tensor::vector({1.0, -3.0}));
    CHECK(p.step_count == 1);
    CHECK_FALSE(p.has_grad);
  }
  SUBCASE("first step moves by about lr against the gradient") {
    ParameterStore store;
    Parameter& p = store.add("p", Tensor::vector({1.0, 1.0}));
    p.zero_grad();
    p.grad = Tensor::vector({3.0, -0.01});
    std::vector<Parameter*> params{&p};
    adam_step(params, {0.1, 0.9, 0.999, 1e-8});
    CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p.value[1] == doctest::Approx(1.1).epsilon(1e-5));
  }
  SUBCASE("three steps on x^2 match the reference equations") {
    ParameterStore store;
    Parameter& p = store.add("x", Tensor::vector({1.0}));
    std::vector<Parameter*> params{&p};
    oracle::AdamState state;
    double x = 1.0;
    for (int step = 0; step < 3; ++step) {
      Tape tape;
      Var v = tape.parameter(p);
      tape.backward(dot(v, v));
      adam_step(params, {0.1, 0.9, 0.999, 1e-8});
      x = oracle::adam_update(x, 2.0 * x, state, 0.1, 0.9, 0.999, 1e-8);
      CHECK(std::abs(p.value[0] - x) <= 1e-12);
    }
  }
  SUBCASE("missing gradient") {
    ParameterStore store;
    Parameter& p = store.add("p", Tensor::vector({1.0}));
    std::vector<Parameter*> params{&p};
    CHECK_THROWS_AS(adam_step(params, {}), UsageError);
  }
}

TEST_CASE("gradient checks of the primitives") {
  ParameterStore store;
  Rng rng(99);
  SUBCASE("linear layer") {
    Linear lin = Linear::create(store, "lin", 4, 3, rng);
    set_param(*lin.bias, oracle::random_vec(rng, 3));
    auto x = oracle::random_mat(rng, 5, 4);
    auto report = gradient_check(
        [&](Tape& t) { return probe(t, linear(t, lin, t.constant(oracle::to_tensor(x))), 1); },
        store.trainable(), {.tolerance = 1e-6});
    CHECK(report.passed());
  }
  SUBCASE("additive attention pool") {
    AdditiveAttention att = AdditiveAttention::create(store, "att", 4, 3, rng, 2);
    set_param(*att.bias, oracle::random_vec(rng, 3));
    Parameter& seq = store.add("seq", oracle::to_tensor(oracle::random_mat(rng, 5, 4)));
    Parameter& ctx = store.add("ctx", oracle::to_tensor(oracle::random_vec(rng, 2)));
    Mask mask{true, true, false, true, true};
    auto report = gradient_check(
        [&](Tape& t) {
          return probe(t, additive_attention_pool(t, att, t.parameter(seq), mask,
                                                  t.parameter(ctx)).pooled, 2);
        },
        store.trainable());
    CHECK(report.passed());
  }
  SUBCASE("GRU over five steps") {
    Gru gru = Gru::create(store, "gru", 3, 4, rng);
    set_param(*gru.bias_update, oracle::random_vec(rng, 4));
    Parameter& seq = store.add("seq", oracle::to_tensor(oracle::random_mat(rng, 5, 3)));
    Parameter& h0 = store.add("h0", oracle::to_tensor(oracle::random_vec(rng, 4)));
    auto report = gradient_check(
        [&](Tape& t) {
          auto out = gru_forward(t, gru, t.parameter(seq), {true, true, false, true, true},
                                 t.parameter(h0));
          return probe(t, out.states, 3);
        },
        store.trainable());
    CHECK(report.passed());
  }
  SUBCASE("convolution and self-attention") {
    Conv1d conv = Conv1d::create(store, "conv", 3, 4, 6, rng);
    auto mhsa = MultiHeadSelfAttention::create(store, "mhsa", 6, 6, 3, rng);
    Parameter& seq = store.add("seq", oracle::to_tensor(oracle::random_mat(rng, 5, 4)));
    Mask mask{true, true, true, false, true};
    auto report = gradient_check(
        [&](Tape& t) {
          Var h = relu(conv1d_same(t, conv, t.parameter(seq)));
          return probe(t, multi_head_self_attention(t, mhsa, h, mask), 4);
        },
        store.trainable());
    CHECK(report.passed());
  }
  SUBCASE("cross entropy") {
    Parameter& s = store.add("scores", oracle::to_tensor(oracle::random_vec(rng, 5)));
    auto report = gradient_check([&](Tape& t) { return cross_entropy(t.parameter(s), 2); },
                                 store.trainable(), {.tolerance = 1e-6});
    CHECK(report.passed());
  }
}
