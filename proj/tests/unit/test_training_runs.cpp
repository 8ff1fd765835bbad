// Full-length training runs on two moons.

#include <doctest.h>

#include <cmath>

#include "dpvae/metrics.hpp"
#include "dpvae/train.hpp"

using namespace dpvae;

namespace {

/// Mean squared reconstruction error implied by a logged log-likelihood.
double squared_error(const LossBreakdown& row, const VaeArchitecture& arch) {
  const double s = arch.obs_std;
  const double d = static_cast<double>(arch.data_dim);
  const double constant = 0.5 * d * std::log(2 * M_PI) + d * std::log(s);
  return 2.0 * s * s * (-row.recon - constant);
}

double tail_mean_error(const RunLog& log, const VaeArchitecture& arch, std::size_t tail) {
  double acc = 0.0;
  for (std::size_t i = log.rows.size() - tail; i < log.rows.size(); ++i) acc += squared_error(log.rows[i], arch);
  return acc / static_cast<double>(tail);
}

}  // namespace

TEST_CASE("vanilla VAE on two moons: final reconstruction loss below 25% of initial") {
  const TrainConfig cfg = two_moons_config(ObjectiveKind::vanilla, PriorMode::standard, 1);
  REQUIRE(cfg.iterations == 20000);
  REQUIRE(cfg.batch_size == 100);
  const TrainResult r = train(cfg);
  const double initial = squared_error(r.log.rows.front(), cfg.arch);
  const double final_err = tail_mean_error(r.log, cfg.arch, 100);
  MESSAGE("squared reconstruction error: initial " << initial << ", final " << final_err);
  CHECK(final_err < 0.25 * initial);

  const DataSplit data = checkpoint_data(r.checkpoint);
  const double trained = sample_quality_mmd(r.checkpoint.model, data.heldout.points, 1000, 3).value;
  const double untrained = sample_quality_mmd(initialize(cfg).model, data.heldout.points, 1000, 3).value;
  MESSAGE("sample-quality MMD: untrained " << untrained << ", trained " << trained);
  CHECK(untrained > trained);
}

TEST_CASE("beta-VAE on two moons: LP decodes lie off the data, HP decodes on it") {
  const TrainConfig cfg = two_moons_config(ObjectiveKind::beta_h, PriorMode::standard, 2);
  const TrainResult r = train(cfg);
  const Matrix train_x = checkpoint_data(r.checkpoint).train.points;
  const VaeModel& m = r.checkpoint.model;

  Rng rng = substream(5, "random-decodes");
  const double random_d = mean_nearest_distance(decode_values(m, sample_prior(m, 100, rng)), train_x);
  const double lp_d = mean_nearest_distance(decode_values(m, low_posterior_samples(m, train_x, 5000, 100, 5).z), train_x);
  const double hp_d =
      mean_nearest_distance(decode_values(m, high_posterior_samples(m, train_x, 5000, 100, 5).z), train_x);
  MESSAGE("mean nearest-data distance: random " << random_d << ", LP " << lp_d << ", HP " << hp_d);
  CHECK(lp_d > random_d);
  CHECK(hp_d < lp_d);
}
