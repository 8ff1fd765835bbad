#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "dpvae/autodiff.hpp"
#include "dpvae/nn.hpp"
#include "dpvae/vae.hpp"

namespace dpvae {

enum class ObjectiveKind { vanilla, beta_h, beta_b, factor, beta_tc, info };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(std::string_view text);

/// Regularizer choice and hyperparameters. Only the fields relevant to `kind`
/// are read.
struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::vanilla;
  double beta = 1.0;
  double gamma = 0.0;
  double alpha = 0.0;
  double lambda = 1.0;
  double c_max = 0.0;
  long c_stop = 1;
  PriorMode prior_mode = PriorMode::standard;

  /// Published hyperparameters for each regularizer:
  ///   beta-H  beta = 4
  ///   beta-B  gamma = 15, C_max = 25, C_stop = 100000
  ///   beta-TC alpha = 1, beta = 4, gamma = 15
  ///   factor  gamma = 1000
  ///   info    alpha = 0, lambda = 1000
  static ObjectiveConfig defaults(ObjectiveKind kind, PriorMode mode = PriorMode::standard);
};

/// Batch-mean loss components. `recon` is the mean reconstruction
/// log-likelihood (so it enters `total` with a minus sign); `kl` the mean
/// posterior-to-prior KL; `extra` the objective-specific term (capacity gap,
/// total correlation, MMD). `total` is minimized.
struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double extra = 0.0;
};

struct LossTerms {
  Var total;
  Var recon;
  Var kl;
  Var extra;
  Var z;  ///< reparameterized posterior draws, B x L

  LossBreakdown values() const;
};

/// Frozen randomness for one objective evaluation.
struct ObjectiveNoise {
  Matrix eps;                                 ///< B x L reparameterization noise
  std::vector<std::vector<Index>> perms;      ///< one row permutation per latent dim (factor)
  Matrix prior_z0;                            ///< M x L base draws (info)
  std::optional<double> mmd_bandwidth;        ///< frozen kernel bandwidth; pooled median when unset
};

ObjectiveNoise draw_objective_noise(const ObjectiveConfig& cfg, Index batch, Index latent_dim, Rng& rng);

/// FactorVAE density-ratio discriminator: L -> width x layers (leaky-ReLU 0.2)
/// -> 2 logits. Logit 1 is the "joint" class, logit 0 the "permuted" class.
struct Discriminator {
  ParamStore params;
  Mlp net;
};

Discriminator make_discriminator(Index latent_dim, Index width, int hidden_layers, Rng& rng,
                                 Init init = Init::uniform_fan_sum);

/// Independent uniform row permutation for each of `dims` columns.
std::vector<std::vector<Index>> draw_permutations(Index batch, Index dims, Rng& rng);
/// Applies per-column row permutations to a value matrix.
Matrix permute_dims(const Matrix& z, const std::vector<std::vector<Index>>& perms);

/// Mean two-class softmax cross-entropy; joint rows labelled 1, permuted rows 0.
/// Throws ArgumentError when either batch has fewer than 2 rows.
Var discriminator_loss(Tape& tape, const Discriminator& disc, const Matrix& z_joint, const Matrix& z_perm);

/// Pooled median of pairwise squared distances (distinct pairs); 1 if zero.
double mmd_bandwidth(const Matrix& a, const Matrix& b);

/// Biased (V-statistic) squared MMD with k(u, v) = exp(-||u - v||^2 / h).
/// The bandwidth is a constant of the graph.
Var mmd(Tape& tape, Var a, Var b, std::optional<double> bandwidth = std::nullopt);
double mmd(const Matrix& a, const Matrix& b, std::optional<double> bandwidth = std::nullopt);

/// Linear capacity schedule C_max * min(1, step / C_stop).
double capacity_at(const ObjectiveConfig& cfg, long step);

LossTerms elbo_vanilla(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                       const ObjectiveNoise& noise);
LossTerms elbo_beta_h(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise);
LossTerms elbo_beta_b(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise, long step);
LossTerms elbo_factor(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise, const Discriminator* disc);
/// Minibatch-weighted-sampling decomposition: alpha * MI + beta * TC + gamma * dim-wise KL.
/// `kl` holds the unweighted sum MI + TC + dim-wise KL, `extra` holds TC.
LossTerms elbo_beta_tc(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                       const ObjectiveNoise& noise, Index dataset_size);
LossTerms elbo_info(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                    const ObjectiveNoise& noise);

struct ObjectiveContext {
  long step = 0;
  Index dataset_size = 0;
  const Discriminator* discriminator = nullptr;
};

/// Dispatches on cfg.kind.
LossTerms evaluate_objective(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                             const ObjectiveNoise& noise, const ObjectiveContext& ctx);

}  // namespace dpvae
