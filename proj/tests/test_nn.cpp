#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "dgua/nn.hpp"
#include "dgua/rng.hpp"

using namespace dgua;

TEST_CASE("layer init is deterministic with zero bias and xavier bounds") {
  LinearLayer a(4, 3, 42), b(4, 3, 42), c(4, 3, 43);
  CHECK(a.weight()->values()[0] == b.weight()->values()[0]);
  CHECK(a.weight()->values()[11] == b.weight()->values()[11]);
  CHECK(a.weight()->values()[0] != c.weight()->values()[0]);
  for (double v : a.bias()->values()) CHECK(v == 0.0);

  const double bound = std::sqrt(6.0 / (4 + 3));
  for (double v : a.weight()->values()) {
    CHECK(v >= -bound);
    CHECK(v <= bound);
  }
}

TEST_CASE("sampled weights center on zero") {
  LinearLayer big(100, 100, 7);
  double mean = 0;
  for (double v : big.weight()->values()) mean += v;
  mean /= 1e4;
  const double bound = std::sqrt(6.0 / 200);
  const double sd_of_mean = bound / std::sqrt(3.0) / 100.0;
  CHECK(std::abs(mean) < 3 * sd_of_mean);
}

TEST_CASE("linear forward matches hand evaluation") {
  LinearLayer layer(2, 2, 5, Activation::relu);
  layer.weight()->values_mut()[0] = 1;   // w[0][0]
  layer.weight()->values_mut()[1] = -2;  // w[0][1]
  layer.weight()->values_mut()[2] = 3;   // w[1][0]
  layer.weight()->values_mut()[3] = 0.5; // w[1][1]
  layer.bias()->values_mut()[0] = 0.1;
  layer.bias()->values_mut()[1] = -0.1;
  Tape tape;
  auto out = layer.forward(tape, Tensor::create({1, 2}, {2, 1}));
  CHECK(out->at(0, 0) == doctest::Approx(2 * 1 + 1 * 3 + 0.1));
  CHECK(out->at(0, 1) == 0.0);  // 2*-2 + 1*0.5 - 0.1 < 0, clipped by relu
}

TEST_CASE("adam with zero gradient and zero decay is the identity") {
  auto p = Tensor::create({2}, {1.5, -2.5}, true);
  Adam opt({{"p", p, true}}, AdamConfig{0.1, 0.0, 0.9, 0.999, 1e-8, false});
  p->ensure_grad();
  opt.step();
  CHECK(p->values()[0] == 1.5);
  CHECK(p->values()[1] == -2.5);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step matches the hand-evaluated formulas") {
  auto p = Tensor::create({1}, {1.0}, true);
  const AdamConfig cfg{0.1, 0.0, 0.9, 0.999, 1e-8, false};
  Adam opt({{"p", p, true}}, cfg);
  p->ensure_grad();
  p->grad_mut()[0] = 1.0;
  opt.step();

  const double m = (1 - cfg.beta1) * 1.0;
  const double v = (1 - cfg.beta2) * 1.0;
  const double m_hat = m / (1 - cfg.beta1);
  const double v_hat = v / (1 - cfg.beta2);
  const double expected = 1.0 - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  CHECK(p->values()[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(p->values()[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK_FALSE(p->has_grad());  // grads dropped after the step
}

TEST_CASE("adam drives p^2 below 1e-2 within 500 steps") {
  auto p = Tensor::create({1}, {1.0}, true);
  Adam opt({{"p", p, true}}, AdamConfig{0.05, 0.0, 0.9, 0.999, 1e-8, false});
  bool converged = false;
  for (int i = 0; i < 500 && !converged; ++i) {
    p->ensure_grad();
    p->grad_mut()[0] = 2.0 * p->values()[0];
    opt.step();
    converged = std::abs(p->values()[0]) < 1e-2;
  }
  CHECK(converged);
}

TEST_CASE("decoupled weight decay skips biases by default") {
  auto w = Tensor::create({1}, {2.0}, true);
  auto b = Tensor::create({1}, {2.0}, true);
  Adam opt({{"w", w, true}, {"b", b, false}}, AdamConfig{0.1, 0.1, 0.9, 0.999, 1e-8, false});
  w->ensure_grad();
  b->ensure_grad();
  opt.step();
  CHECK(w->values()[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.1)).epsilon(1e-15));
  CHECK(b->values()[0] == 2.0);

  auto b2 = Tensor::create({1}, {2.0}, true);
  Adam opt2({{"b", b2, false}}, AdamConfig{0.1, 0.1, 0.9, 0.999, 1e-8, true});
  b2->ensure_grad();
  opt2.step();
  CHECK(b2->values()[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.1)).epsilon(1e-15));
}

TEST_CASE("missing gradient names the parameter") {
  auto w = Tensor::create({1}, {1.0}, true);
  Adam opt({{"layer.weight", w, true}}, AdamConfig{});
  try {
    opt.step();
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
  }
}

TEST_CASE("registration order does not change updates") {
  auto make = [] {
    return std::pair{Tensor::create({1}, {1.0}, true), Tensor::create({1}, {-1.0}, true)};
  };
  auto [a1, b1] = make();
  auto [a2, b2] = make();
  Adam fwd({{"a", a1, true}, {"b", b1, true}}, AdamConfig{0.1, 0.01, 0.9, 0.999, 1e-8, false});
  Adam rev({{"b", b2, true}, {"a", a2, true}}, AdamConfig{0.1, 0.01, 0.9, 0.999, 1e-8, false});
  for (int i = 0; i < 3; ++i) {
    for (auto& t : {a1, b1, a2, b2}) {
      t->ensure_grad();
      t->grad_mut()[0] = 0.3 * t->values()[0] + 0.1;
    }
    fwd.step();
    rev.step();
  }
  CHECK(a1->values()[0] == a2->values()[0]);
  CHECK(b1->values()[0] == b2->values()[0]);
}

TEST_CASE("optimizer state round trip") {
  auto p = Tensor::create({2}, {1.0, 2.0}, true);
  Adam opt({{"p", p, true}}, AdamConfig{0.1, 0.0, 0.9, 0.999, 1e-8, false});
  p->ensure_grad();
  p->grad_mut()[0] = 0.5;
  p->grad_mut()[1] = -0.5;
  opt.step();
  const auto m = opt.first_moment(0);
  const auto v = opt.second_moment(0);
  CHECK(m[0] == doctest::Approx(0.05));
  CHECK(v[1] == doctest::Approx(0.00025));

  Adam fresh({{"p", p, true}}, AdamConfig{0.1, 0.0, 0.9, 0.999, 1e-8, false});
  fresh.restore_state(0, m, v);
  fresh.restore_step_count(opt.step_count());
  CHECK(fresh.step_count() == 1);
  CHECK(fresh.first_moment(0)[0] == m[0]);
}
