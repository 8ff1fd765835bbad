#include "dpvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpvae/errors.hpp"
#include "dpvae/objectives.hpp"

namespace dpvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr Index kChunk = 512;

double log_mean_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

MetricValue mean_and_error(const Eigen::VectorXd& v, std::uint64_t seed) {
  const double n = static_cast<double>(v.size());
  const double m = v.mean();
  double var = 0.0;
  if (v.size() > 1) var = (v.array() - m).square().sum() / (n - 1.0);
  return MetricValue{m, std::sqrt(var / n), v.size(), seed};
}

}  // namespace

AggregatePosterior aggregate_posterior(const VaeModel& model, const Matrix& data) {
  if (data.rows() == 0) throw ArgumentError("aggregate posterior needs at least one datum");
  AggregatePosterior agg;
  encode_values(model, data, agg.mu, agg.log_var);
  return agg;
}

Eigen::VectorXd aggregate_posterior_log_density(const AggregatePosterior& agg, const Matrix& z) {
  if (z.cols() != agg.dim()) throw ShapeError("aggregate posterior: query dimension mismatch");
  const Index N = agg.size();
  const Index L = agg.dim();
  const Eigen::RowVectorXd base =
      (-0.5 * static_cast<double>(L) * kLog2Pi - 0.5 * agg.log_var.rowwise().sum().array()).transpose().matrix();
  const Matrix precision = (-agg.log_var.array()).exp().matrix();
  const double log_n = std::log(static_cast<double>(N));
  Eigen::VectorXd out(z.rows());
  for (Index start = 0; start < z.rows(); start += kChunk) {
    const Index m = std::min(kChunk, z.rows() - start);
    Eigen::ArrayXXd logp = base.replicate(m, 1).array();
    for (Index d = 0; d < L; ++d) {
      const Eigen::ArrayXXd diff = z.col(d).segment(start, m).replicate(1, N).array() -
                                   agg.mu.col(d).transpose().replicate(m, 1).array();
      logp -= 0.5 * diff.square() * precision.col(d).transpose().replicate(m, 1).array();
    }
    const Eigen::VectorXd mx = logp.rowwise().maxCoeff();
    for (Index i = 0; i < m; ++i) {
      out(start + i) = mx(i) + std::log((logp.row(i) - mx(i)).exp().sum()) - log_n;
    }
  }
  return out;
}

Matrix sample_aggregate_posterior(const AggregatePosterior& agg, Index n, Rng& rng) {
  Matrix z(n, agg.dim());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const Index j = uniform_index(rng, agg.size());
    for (Index d = 0; d < agg.dim(); ++d) z(i, d) = agg.mu(j, d) + std::exp(0.5 * agg.log_var(j, d)) * normal(rng);
  }
  return z;
}

Eigen::VectorXd aggregate_posterior_std(const AggregatePosterior& agg) {
  const Eigen::RowVectorXd mean_mu = agg.mu.colwise().mean();
  const Eigen::RowVectorXd mean_var = agg.log_var.array().exp().colwise().mean();
  const Eigen::RowVectorXd var_mu = (agg.mu.rowwise() - mean_mu).array().square().colwise().mean();
  return (mean_var + var_mu).array().sqrt().transpose();
}

MetricValue symmetric_kl_mc(const Sampler& sample_p, const LogDensity& log_p, const Sampler& sample_q,
                            const LogDensity& log_q, Index n, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("symmetric KL needs n >= 2");
  Rng rp = substream(seed, "skl-prior");
  Rng rq = substream(seed, "skl-posterior");
  const Matrix zp = sample_p(n, rp);
  const Matrix zq = sample_q(n, rq);
  const Eigen::VectorXd a = log_p(zp) - log_q(zp);
  const Eigen::VectorXd b = log_q(zq) - log_p(zq);
  const MetricValue ma = mean_and_error(a, seed);
  const MetricValue mb = mean_and_error(b, seed);
  return MetricValue{ma.value + mb.value, std::hypot(ma.std_error, mb.std_error), n, seed};
}

MetricValue skl(const VaeModel& model, const Matrix& dataset, Index n, std::uint64_t seed) {
  const AggregatePosterior agg = aggregate_posterior(model, dataset);
  return symmetric_kl_mc([&](Index m, Rng& r) { return sample_prior(model, m, r); },
                         [&](const Matrix& z) { return prior_log_density(model, z); },
                         [&](Index m, Rng& r) { return sample_aggregate_posterior(agg, m, r); },
                         [&](const Matrix& z) { return aggregate_posterior_log_density(agg, z); }, n, seed);
}

MetricValue nll_importance(const VaeModel& model, const Matrix& heldout, Index n, std::uint64_t seed) {
  if (heldout.rows() == 0) throw ArgumentError("nll_importance: empty held-out set");
  if (n < 1) throw ArgumentError("nll_importance: n must be >= 1");
  Matrix mu;
  Matrix log_var;
  encode_values(model, heldout, mu, log_var);
  const Index L = model.latent_dim();
  const double s = model.arch.obs_std;
  const double D = static_cast<double>(model.data_dim());
  const double recon_const = -0.5 * D * kLog2Pi - D * std::log(s);
  Eigen::VectorXd nll(heldout.rows());
  double var_sum = 0.0;
  for (Index i = 0; i < heldout.rows(); ++i) {
    Rng rng = substream(seed, "nll", static_cast<std::uint64_t>(i));
    Eigen::VectorXd log_w(n);
    for (Index start = 0; start < n; start += 4096) {
      const Index m = std::min<Index>(4096, n - start);
      const Matrix eps = standard_normal(rng, m, L);
      const Matrix mu_i = mu.row(i).replicate(m, 1);
      const Matrix lv_i = log_var.row(i).replicate(m, 1);
      const Matrix z = mu_i + ((0.5 * lv_i.array()).exp() * eps.array()).matrix();
      const Matrix x_mean = decode_values(model, z);
      const Eigen::VectorXd recon =
          (recon_const - 0.5 / (s * s) * (x_mean.rowwise() - heldout.row(i)).rowwise().squaredNorm().array()).matrix();
      log_w.segment(start, m) = recon + prior_log_density(model, z) - diag_gaussian_log_density(z, mu_i, lv_i);
    }
    nll(i) = -log_mean_exp(log_w);
    if (n > 1) {
      const Eigen::ArrayXd w = (log_w.array() - log_w.maxCoeff()).exp();
      const double mw = w.mean();
      const double sd = std::sqrt((w - mw).square().sum() / static_cast<double>(n - 1));
      const double se = sd / (std::sqrt(static_cast<double>(n)) * mw);
      var_sum += se * se;
    }
  }
  const double rows = static_cast<double>(heldout.rows());
  return MetricValue{nll.mean(), std::sqrt(var_sum) / rows, n, seed};
}

Eigen::VectorXd base_log_density_at_h(const VaeModel& model, const Matrix& z) {
  if (model.prior_mode == PriorMode::decoupled) {
    return standard_normal_log_density(model.prior->forward_values(model.params, z));
  }
  return standard_normal_log_density(z);
}

LeakageDraws leakage_draws(const VaeModel& model, const AggregatePosterior& agg, Index n, std::uint64_t seed,
                           LeakageFlag flag) {
  if (n < 1) throw ArgumentError("leakage: n must be >= 1");
  Rng rng = substream(seed, "leakage");
  LeakageDraws d;
  d.seed = seed;
  d.z = sample_aggregate_posterior(agg, n, rng);
  d.log_q = aggregate_posterior_log_density(agg, d.z);
  if (flag == LeakageFlag::base_at_h) {
    d.log_flag = base_log_density_at_h(model, d.z);
  } else {
    d.log_flag = prior_log_density(model, d.z);
  }
  d.log_ref = d.log_flag;
  return d;
}

std::vector<Index> leakage_flagged(const LeakageDraws& draws, double tau) {
  std::vector<Index> out;
  for (Index i = 0; i < draws.log_flag.size(); ++i) {
    if (draws.log_flag(i) < tau) out.push_back(i);
  }
  return out;
}

MetricValue leakage_score(const LeakageDraws& draws, double tau) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(draws.log_q.size());
  for (Index i : leakage_flagged(draws, tau)) s(i) = draws.log_q(i) - draws.log_ref(i);
  return mean_and_error(s, draws.seed);
}

MetricValue leakage_score(const VaeModel& model, const Matrix& dataset, double tau, Index n, std::uint64_t seed,
                          LeakageFlag flag) {
  return leakage_score(leakage_draws(model, aggregate_posterior(model, dataset), n, seed, flag), tau);
}

RankedSamples rank_lowest(const Matrix& z, const Eigen::VectorXd& score, Index k, SampleKind kind) {
  if (k > z.rows()) throw ArgumentError("requested more samples than the pool holds");
  if (k < 0) throw ArgumentError("k must be non-negative");
  std::vector<Index> order(static_cast<std::size_t>(z.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return score(a) < score(b); });
  RankedSamples out;
  out.kind = kind;
  out.z.resize(k, z.cols());
  out.score.resize(k);
  for (Index i = 0; i < k; ++i) {
    out.z.row(i) = z.row(order[static_cast<std::size_t>(i)]);
    out.score(i) = score(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

RankedSamples low_posterior_samples(const VaeModel& model, const Matrix& dataset, Index pool, Index k,
                                    std::uint64_t seed) {
  if (k > pool) throw ArgumentError("low_posterior_samples: k > pool");
  const AggregatePosterior agg = aggregate_posterior(model, dataset);
  Rng rng = substream(seed, "low-posterior");
  const Matrix z = sample_prior(model, pool, rng);
  return rank_lowest(z, aggregate_posterior_log_density(agg, z), k, SampleKind::low_posterior);
}

RankedSamples high_posterior_samples(const VaeModel& model, const Matrix& dataset, Index pool, Index k,
                                     std::uint64_t seed) {
  if (k > pool) throw ArgumentError("high_posterior_samples: k > pool");
  const AggregatePosterior agg = aggregate_posterior(model, dataset);
  Rng rng = substream(seed, "high-posterior");
  const Matrix z = sample_aggregate_posterior(agg, pool, rng);
  return rank_lowest(z, base_log_density_at_h(model, z), k, SampleKind::high_posterior);
}

MetricValue sample_quality_mmd(const VaeModel& model, const Matrix& heldout, Index n, std::uint64_t seed) {
  if (heldout.rows() == 0) throw ArgumentError("sample_quality_mmd: empty held-out set");
  Rng rng = substream(seed, "sample-quality");
  const Matrix x = decode_values(model, sample_prior(model, n, rng));
  return MetricValue{mmd(x, heldout), 0.0, n, seed};
}

double mean_nearest_distance(const Matrix& points, const Matrix& reference) {
  if (reference.rows() == 0) throw ArgumentError("mean_nearest_distance: empty reference");
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    total += std::sqrt((reference.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff());
  }
  return points.rows() > 0 ? total / static_cast<double>(points.rows()) : 0.0;
}

}  // namespace dpvae
