#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpvae/errors.hpp"
#include "dpvae/metrics.hpp"

using namespace dpvae;

namespace {

/// A model whose encoder ignores x and outputs N(0, I): zero weights and biases.
VaeModel prior_matching_model(PriorMode mode) {
  VaeArchitecture arch;
  arch.hidden = {4};
  arch.flow.width = 4;
  Rng rng(1);
  return make_vae(arch, mode, rng, Init::zeros, Init::zeros);
}

VaeModel random_model(PriorMode mode, std::uint64_t seed) {
  VaeArchitecture arch;
  arch.hidden = {8, 8};
  arch.flow.width = 8;
  Rng rng = substream(seed, "metrics-test");
  return make_vae(arch, mode, rng);
}

double direct_mixture_log_density(const AggregatePosterior& agg, const Eigen::RowVectorXd& z) {
  double total = 0.0;
  for (Index j = 0; j < agg.size(); ++j) {
    double p = 1.0;
    for (Index d = 0; d < agg.dim(); ++d) {
      const double var = std::exp(agg.log_var(j, d));
      const double r = z(d) - agg.mu(j, d);
      p *= std::exp(-0.5 * r * r / var) / std::sqrt(2 * M_PI * var);
    }
    total += p;
  }
  return std::log(total / static_cast<double>(agg.size()));
}

}  // namespace

TEST_CASE("aggregate posterior density: single component, idempotence, direct-summation oracle") {
  AggregatePosterior one{Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
  CHECK(aggregate_posterior_log_density(one, Matrix::Zero(1, 2))(0) == doctest::Approx(-std::log(2 * M_PI)));

  Rng rng(3);
  AggregatePosterior a{standard_normal(rng, 1, 2), 0.5 * standard_normal(rng, 1, 2)};
  AggregatePosterior twice{a.mu.replicate(2, 1), a.log_var.replicate(2, 1)};
  const Matrix z = standard_normal(rng, 5, 2);
  CHECK((aggregate_posterior_log_density(a, z) - aggregate_posterior_log_density(twice, z)).cwiseAbs().maxCoeff() <
        1e-12);

  AggregatePosterior many{2.0 * standard_normal(rng, 100, 3), 0.5 * standard_normal(rng, 100, 3)};
  const Matrix zz = 2.0 * standard_normal(rng, 20, 3);
  const Eigen::VectorXd got = aggregate_posterior_log_density(many, zz);
  for (Index i = 0; i < zz.rows(); ++i) CHECK(std::abs(got(i) - direct_mixture_log_density(many, zz.row(i))) < 1e-10);
}

TEST_CASE("aggregate posterior std matches the mixture moments") {
  Matrix mu(2, 1);
  mu << -1.0, 1.0;
  AggregatePosterior agg{mu, Matrix::Zero(2, 1)};
  CHECK(aggregate_posterior_std(agg)(0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("symmetric KL of N(0,1) and N(1,1) is 1") {
  const Sampler sp = [](Index n, Rng& r) -> Matrix { return standard_normal(r, n, 1); };
  const Sampler sq = [](Index n, Rng& r) -> Matrix { return (standard_normal(r, n, 1).array() + 1.0).matrix(); };
  const LogDensity lp = [](const Matrix& z) { return standard_normal_log_density(z); };
  const LogDensity lq = [](const Matrix& z) { return standard_normal_log_density((z.array() - 1.0).matrix()); };
  const MetricValue v = symmetric_kl_mc(sp, lp, sq, lq, 20000, 4);
  CHECK(std::abs(v.value - 1.0) < 3.0 * v.std_error);
  CHECK(v.n == 20000);
}

TEST_CASE("sKL vanishes when the aggregate posterior is the prior") {
  for (PriorMode mode : {PriorMode::standard, PriorMode::decoupled}) {
    const VaeModel m = prior_matching_model(mode);
    Rng rng(5);
    const MetricValue v = skl(m, standard_normal(rng, 30, 2), 5000, 6);
    CHECK(std::abs(v.value) < 1e-12);
  }
}

TEST_CASE("NLL is exact when the decoder ignores z") {
  VaeModel m = prior_matching_model(PriorMode::standard);
  Rng rng(7);
  const Matrix x = standard_normal(rng, 10, 2);
  const MetricValue v = nll_importance(m, x, 50, 1);
  const double exact = -standard_normal_log_density(x).mean();
  CHECK(v.value == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("MC metrics are deterministic in the seed") {
  const VaeModel m = random_model(PriorMode::decoupled, 2);
  Rng rng(8);
  const Matrix data = standard_normal(rng, 40, 2);
  CHECK(skl(m, data, 300, 9).value == skl(m, data, 300, 9).value);
  CHECK(nll_importance(m, data, 30, 9).value == nll_importance(m, data, 30, 9).value);
  CHECK(sample_quality_mmd(m, data, 50, 3).value == sample_quality_mmd(m, data, 50, 3).value);
  CHECK(skl(m, data, 300, 9).value != skl(m, data, 300, 10).value);
}

TEST_CASE("leakage score: empty flag set, zero log-ratio, set inclusion") {
  const VaeModel flat = prior_matching_model(PriorMode::standard);
  Rng rng(10);
  const Matrix data = standard_normal(rng, 25, 2);
  for (double tau : {-8.0, -3.0, -1.0}) CHECK(std::abs(leakage_score(flat, data, tau, 2000, 1).value) < 1e-12);

  for (PriorMode mode : {PriorMode::standard, PriorMode::decoupled}) {
    const VaeModel m = random_model(mode, 11);
    const LeakageDraws d = leakage_draws(m, aggregate_posterior(m, data), 3000, 12);
    CHECK(leakage_score(d, -std::numeric_limits<double>::infinity()).value == 0.0);
    std::vector<Index> prev;
    for (double tau : {-6.0, -4.0, -3.0, -2.5, -2.0, 0.0}) {
      const std::vector<Index> cur = leakage_flagged(d, tau);
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
  const VaeModel dm = random_model(PriorMode::decoupled, 13);
  const AggregatePosterior agg = aggregate_posterior(dm, data);
  const LeakageDraws base = leakage_draws(dm, agg, 100, 2, LeakageFlag::base_at_h);
  const LeakageDraws cov = leakage_draws(dm, agg, 100, 2, LeakageFlag::change_of_variables);
  CHECK(base.z == cov.z);
  CHECK(cov.log_flag.isApprox(prior_log_density(dm, cov.z)));
}

TEST_CASE("low- and high-posterior ranking agree with a full sort") {
  Rng rng(14);
  const Matrix data = standard_normal(rng, 40, 2);
  for (PriorMode mode : {PriorMode::standard, PriorMode::decoupled}) {
    const VaeModel m = random_model(mode, 15);
    const AggregatePosterior agg = aggregate_posterior(m, data);

    const RankedSamples all = low_posterior_samples(m, data, 200, 200, 16);
    CHECK(std::is_sorted(all.score.data(), all.score.data() + all.score.size()));
    const RankedSamples lp = low_posterior_samples(m, data, 200, 20, 16);
    CHECK(lp.kind == SampleKind::low_posterior);
    CHECK(lp.score == all.score.head(20));
    CHECK(lp.score.maxCoeff() <= all.score.tail(180).minCoeff());
    CHECK(lp.score.isApprox(aggregate_posterior_log_density(agg, lp.z)));

    const RankedSamples hp = high_posterior_samples(m, data, 200, 20, 16);
    const RankedSamples hall = high_posterior_samples(m, data, 200, 200, 16);
    CHECK(hp.kind == SampleKind::high_posterior);
    CHECK(hp.score == hall.score.head(20));
    CHECK(hp.score.isApprox(base_log_density_at_h(m, hp.z)));

    CHECK_THROWS_AS(low_posterior_samples(m, data, 10, 11, 1), ArgumentError);
    CHECK_THROWS_AS(high_posterior_samples(m, data, 10, 11, 1), ArgumentError);
  }
}

TEST_CASE("rank_lowest keeps pool order on ties") {
  Matrix z(4, 1);
  z << 0, 1, 2, 3;
  Eigen::VectorXd s(4);
  s << 1.0, 0.0, 1.0, 0.0;
  const RankedSamples r = rank_lowest(z, s, 3, SampleKind::low_posterior);
  CHECK(r.z(0, 0) == 1);
  CHECK(r.z(1, 0) == 3);
  CHECK(r.z(2, 0) == 0);
}

TEST_CASE("mean nearest distance") {
  Matrix ref(2, 2);
  ref << 0, 0, 10, 0;
  Matrix pts(2, 2);
  pts << 1, 0, 10, 2;
  CHECK(mean_nearest_distance(pts, ref) == doctest::Approx(1.5));
  CHECK(mean_nearest_distance(ref, ref) == 0.0);
}
