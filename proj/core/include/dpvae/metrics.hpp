#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "dpvae/vae.hpp"

namespace dpvae {

/// Uniform mixture of the encoder posteriors of a reference set:
/// q(z) = (1/N) sum_j N(z; mu_j, diag(exp(log_var_j))).
struct AggregatePosterior {
  Matrix mu;       ///< N x L
  Matrix log_var;  ///< N x L

  Index size() const noexcept { return mu.rows(); }
  Index dim() const noexcept { return mu.cols(); }
};

AggregatePosterior aggregate_posterior(const VaeModel& model, const Matrix& data);

/// log q(z) for every row of z via log-sum-exp over components minus log N.
Eigen::VectorXd aggregate_posterior_log_density(const AggregatePosterior& agg, const Matrix& z);

/// Picks a component uniformly, then draws from it.
Matrix sample_aggregate_posterior(const AggregatePosterior& agg, Index n, Rng& rng);

/// Per-dimension standard deviation of the mixture.
Eigen::VectorXd aggregate_posterior_std(const AggregatePosterior& agg);

/// A Monte-Carlo estimate with its standard error and provenance.
struct MetricValue {
  double value = 0.0;
  double std_error = 0.0;
  Index n = 0;
  std::uint64_t seed = 0;
};

using Sampler = std::function<Matrix(Index n, Rng& rng)>;
using LogDensity = std::function<Eigen::VectorXd(const Matrix& z)>;

/// KL(p || q) + KL(q || p) from n draws of each distribution.
MetricValue symmetric_kl_mc(const Sampler& sample_p, const LogDensity& log_p, const Sampler& sample_q,
                            const LogDensity& log_q, Index n, std::uint64_t seed);

/// Symmetric KL between the model prior and the aggregate posterior of
/// `dataset`.
MetricValue skl(const VaeModel& model, const Matrix& dataset, Index n = 5000, std::uint64_t seed = 0);

/// Importance-sampled negative log-likelihood, averaged over rows of
/// `heldout`, with n posterior proposals per datum. The standard error is the
/// delta-method Monte-Carlo error of the mean.
MetricValue nll_importance(const VaeModel& model, const Matrix& heldout, Index n = 21000, std::uint64_t seed = 0);

/// Which density decides whether a sample sits in a leakage region.
enum class LeakageFlag {
  base_at_h,            ///< log N(h(z); 0, I), h = identity or g
  change_of_variables,  ///< log p(z) including the flow's log-determinant
};

/// Per-sample quantities shared by every threshold.
struct LeakageDraws {
  Matrix z;
  Eigen::VectorXd log_q;     ///< aggregate posterior log-density
  Eigen::VectorXd log_flag;  ///< density compared against tau
  Eigen::VectorXd log_ref;   ///< denominator of the log-ratio
  std::uint64_t seed = 0;
};

LeakageDraws leakage_draws(const VaeModel& model, const AggregatePosterior& agg, Index n, std::uint64_t seed,
                           LeakageFlag flag = LeakageFlag::base_at_h);
/// Indices whose flag density falls strictly below tau.
std::vector<Index> leakage_flagged(const LeakageDraws& draws, double tau);
/// Mean over all draws of log(q/p_ref) on the flagged set, 0 elsewhere.
MetricValue leakage_score(const LeakageDraws& draws, double tau);
MetricValue leakage_score(const VaeModel& model, const Matrix& dataset, double tau, Index n, std::uint64_t seed,
                          LeakageFlag flag = LeakageFlag::base_at_h);

enum class SampleKind { low_posterior, high_posterior };

/// Points sorted ascending by score.
struct RankedSamples {
  SampleKind kind = SampleKind::low_posterior;
  Matrix z;
  Eigen::VectorXd score;
};

/// The k lowest-scoring rows, ascending; ties keep pool order.
RankedSamples rank_lowest(const Matrix& z, const Eigen::VectorXd& score, Index k, SampleKind kind);

/// Prior draws ranked by aggregate-posterior support.
RankedSamples low_posterior_samples(const VaeModel& model, const Matrix& dataset, Index pool, Index k,
                                    std::uint64_t seed);
/// Aggregate-posterior draws ranked by base density at h(z).
RankedSamples high_posterior_samples(const VaeModel& model, const Matrix& dataset, Index pool, Index k,
                                     std::uint64_t seed);

/// log N(h(z); 0, I), h = g in decoupled mode and identity otherwise.
Eigen::VectorXd base_log_density_at_h(const VaeModel& model, const Matrix& z);

/// MMD between n decoded prior samples and the held-out set.
MetricValue sample_quality_mmd(const VaeModel& model, const Matrix& heldout, Index n, std::uint64_t seed);

/// Mean Euclidean distance from each row of `points` to its nearest row of
/// `reference`.
double mean_nearest_distance(const Matrix& points, const Matrix& reference);

}  // namespace dpvae
