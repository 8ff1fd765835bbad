#include <doctest.h>

#include <cmath>

#include "dpvae/errors.hpp"
#include "dpvae/nn.hpp"

using namespace dpvae;

TEST_CASE("mlp shapes, naming and width checks") {
  Rng rng(3);
  ParamStore ps;
  Mlp net = make_mlp(ps, "net", {3, 5, 2}, Activation::relu, Activation::linear, Init::uniform_fan_sum, rng);
  CHECK(net.in_dim() == 3);
  CHECK(ps.find("net.l0.w").has_value());
  CHECK(ps.find("net.l1.b").has_value());
  CHECK(ps.value(*ps.find("net.l0.w")).rows() == 5);
  const Matrix out = net.evaluate(ps, Matrix::Ones(4, 3));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 2);
  CHECK_THROWS_AS(net.evaluate(ps, Matrix::Ones(4, 2)), ShapeError);
}

TEST_CASE("uniform fan-sum initialization respects its bound") {
  Rng rng(5);
  const Matrix w = init_weights(40, 60, Init::uniform_fan_sum, rng);
  const double bound = std::sqrt(6.0 / 100.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  CHECK(w.cwiseAbs().maxCoeff() > 0.9 * bound);
  CHECK(init_weights(3, 3, Init::identity, rng) == Matrix::Identity(3, 3));
  CHECK_THROWS_AS(init_weights(3, 2, Init::identity, rng), ShapeError);
}

TEST_CASE("mlp gradient matches finite differences") {
  Rng rng(9);
  ParamStore ps;
  Mlp net = make_mlp(ps, "n", {2, 6, 6, 3}, Activation::tanh, Activation::linear, Init::uniform_fan_sum, rng);
  const Matrix x = standard_normal(rng, 5, 2);
  CHECK(grad_check([&](Tape& t) { return sum(square(net.forward(t, ps, t.constant(x)))); }, ps) < 1e-6);
}
