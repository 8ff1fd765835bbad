#pragma once

// Metric reports, sample generation and latent traversals over checkpoints.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpvae/metrics.hpp"
#include "dpvae/train.hpp"

namespace dpvae {

struct MetricSpec {
  Index skl_n = 5000;
  Index nll_n = 21000;
  Index leak_n = 5000;
  Index mmd_n = 1000;
  std::vector<double> taus{-10.0, -8.0, -6.0, -4.0, -2.0};
  std::uint64_t seed = 0;
  LeakageFlag flag = LeakageFlag::base_at_h;
  bool run_nll = true;
};

struct MetricRecord {
  std::string name;
  MetricValue metric;
};

using MetricReport = std::vector<MetricRecord>;

/// skl and leakage use `reference` as the aggregate-posterior mixture; nll and
/// sample-quality MMD use `heldout`. Throws LoadError when either data matrix
/// does not match the model's data dimension.
MetricReport evaluate(const Checkpoint& ckpt, const Matrix& reference, const Matrix& heldout, const MetricSpec& spec);

enum class GenerateMode { random, low_posterior, high_posterior };
GenerateMode parse_generate_mode(std::string_view text);

struct GeneratedSamples {
  Matrix x;                 ///< decoded samples
  Matrix z;                 ///< latent codes
  Eigen::VectorXd log_q;    ///< aggregate-posterior log-density at z
  Eigen::VectorXd log_p;    ///< prior log-density at z
};

/// random: n prior draws. LP/HP: rank a pool of `pool` draws and keep the n
/// lowest. `reference` supplies the aggregate posterior.
GeneratedSamples generate(const Checkpoint& ckpt, const Matrix& reference, Index n, GenerateMode mode,
                          std::uint64_t seed, Index pool = 0);

struct LatentPath {
  Matrix z;               ///< steps x L
  Matrix x;               ///< decoded, steps x D
  Eigen::VectorXd log_p;  ///< prior log-density along the path
};

/// Decoupled models interpolate linearly between g(z_a) and g(z_b) and map
/// each step back through g^-1; standard models interpolate in z. The first
/// and last rows are z_a and z_b exactly.
LatentPath latent_traverse(const Checkpoint& ckpt, const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b,
                           Index steps);
/// Linear path in z regardless of prior mode.
LatentPath straight_traverse(const Checkpoint& ckpt, const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b,
                             Index steps);

/// Latent dimensions ordered by aggregate-posterior standard deviation,
/// largest first.
std::vector<Index> dims_by_std(const AggregatePosterior& agg);

/// Encodes x to its posterior mean and sweeps the `dim`-th ranked coordinate
/// over +-sigmas aggregate standard deviations in `steps` even steps.
LatentPath factor_traverse(const Checkpoint& ckpt, const Matrix& reference, const Eigen::VectorXd& x, Index dim,
                           double sigmas, Index steps);

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path);
void write_samples_csv(const GeneratedSamples& samples, const std::filesystem::path& path);
/// Columns: step, z1..zL, x1..xD, log_p.
void write_latents_csv(const LatentPath& path, const std::filesystem::path& out);
void write_runlog_csv(const RunLog& log, const std::filesystem::path& path);

}  // namespace dpvae
