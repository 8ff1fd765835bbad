#include <doctest.h>

#include <cmath>

#include "dpvae/errors.hpp"
#include "dpvae/flow.hpp"

using namespace dpvae;

namespace {

DecoupledPrior random_prior(ParamStore& ps, Index L, std::uint64_t seed, Init init = Init::uniform_fan_sum) {
  Rng rng = substream(seed, "flow-test");
  FlowSpec spec;
  spec.width = 16;
  return make_decoupled_prior(ps, "prior", L, spec, init, rng);
}

}  // namespace

TEST_CASE("checkerboard masks alternate and are complementary across blocks") {
  CHECK(checkerboard_mask(4, true) == Eigen::RowVector4d(1, 0, 1, 0));
  CHECK(checkerboard_mask(3, false) == Eigen::RowVector3d(0, 1, 0));
  ParamStore ps;
  const DecoupledPrior p = random_prior(ps, 3, 1);
  REQUIRE(p.blocks().size() == 4);
  CHECK(p.blocks()[0].mask == checkerboard_mask(3, true));
  CHECK(p.blocks()[1].mask == checkerboard_mask(3, false));
}

TEST_CASE("the flow needs at least two latent dimensions") {
  ParamStore ps;
  Rng rng(1);
  CHECK_THROWS(make_decoupled_prior(ps, "p", 1, FlowSpec{}, Init::uniform_fan_sum, rng));
}

TEST_CASE("zero-initialized coupling nets give the identity map") {
  ParamStore ps;
  const DecoupledPrior p = random_prior(ps, 2, 2, Init::zeros);
  Rng rng(4);
  const Matrix z = standard_normal(rng, 10, 2);
  Eigen::VectorXd ld;
  CHECK(p.forward_values(ps, z, &ld) == z);
  CHECK(ld.isZero());
  CHECK(p.inverse_values(ps, z) == z);
  CHECK(p.log_density_values(ps, z).isApprox(standard_normal_log_density(z)));
}

TEST_CASE("round trip and analytic log-determinant for L = 2 and L = 5") {
  for (Index L : {Index{2}, Index{5}}) {
    ParamStore ps;
    const DecoupledPrior p = random_prior(ps, L, 10 + static_cast<std::uint64_t>(L));
    Rng rng(6);
    const Matrix z = 1.5 * standard_normal(rng, 20, L);
    Eigen::VectorXd ld;
    const Matrix z0 = p.forward_values(ps, z, &ld);
    CHECK((p.inverse_values(ps, z0) - z).cwiseAbs().maxCoeff() < 1e-10);

    const double h = 1e-6;
    for (Index i = 0; i < z.rows(); ++i) {
      Matrix jac(L, L);
      for (Index c = 0; c < L; ++c) {
        Matrix up = z.row(i);
        Matrix dn = z.row(i);
        up(0, c) += h;
        dn(0, c) -= h;
        jac.col(c) = ((p.forward_values(ps, up) - p.forward_values(ps, dn)) / (2 * h)).transpose();
      }
      CHECK(std::log(std::abs(jac.determinant())) == doctest::Approx(ld(i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("coupling scale is bounded by s_max") {
  ParamStore ps;
  Rng rng(8);
  FlowSpec spec;
  spec.width = 8;
  const DecoupledPrior p = make_decoupled_prior(ps, "p", 2, spec, Init::uniform_fan_sum, rng);
  for (std::size_t i = 0; i < ps.size(); ++i) ps.entry(i).value *= 50.0;
  Tape t;
  const Matrix z = 10.0 * standard_normal(rng, 50, 2);
  for (const auto& block : p.blocks()) {
    const Matrix s = coupling_scale(t, ps, block, p.s_max(), t.constant(z)).value();
    CHECK(s.cwiseAbs().maxCoeff() <= 2.0);
  }
}

TEST_CASE("flow gradients agree with finite differences") {
  ParamStore ps;
  const DecoupledPrior p = random_prior(ps, 3, 21);
  Rng rng(2);
  const Matrix z = standard_normal(rng, 6, 3);
  CHECK(grad_check([&](Tape& t) { return sum(p.log_density(t, ps, t.constant(z))); }, ps) < 1e-6);
  CHECK(grad_check([&](Tape& t) { return sum(square(p.inverse(t, ps, t.constant(z)))); }, ps) < 1e-6);
}

TEST_CASE("standard normal log density") {
  CHECK(standard_normal_log_density(Matrix::Zero(1, 2))(0) == doctest::Approx(-std::log(2 * M_PI)));
}
