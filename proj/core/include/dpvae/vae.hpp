#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpvae/autodiff.hpp"
#include "dpvae/flow.hpp"
#include "dpvae/nn.hpp"

namespace dpvae {

enum class PriorMode { standard, decoupled };

std::string_view to_string(PriorMode mode);
PriorMode parse_prior_mode(std::string_view text);

struct VaeArchitecture {
  Index data_dim = 2;
  Index latent_dim = 2;
  /// Encoder hidden widths from input towards the latent space; the decoder
  /// mirrors them.
  std::vector<Index> hidden{100, 50};
  Activation activation = Activation::relu;
  /// Standard deviation of the isotropic Gaussian observation model.
  double obs_std = 1.0;
  FlowSpec flow;
};

/// q(z|x) = N(mu, diag(exp(log_var))) for one example.
struct GaussianPosterior {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
};

/// Batched posterior parameters on a tape, each B x L.
struct PosteriorVars {
  Var mu;
  Var log_var;
};

struct MonteCarloSpec {
  int n_samples = 1;
  std::uint64_t seed = 0;
};

struct VaeModel {
  VaeArchitecture arch;
  PriorMode prior_mode = PriorMode::standard;
  ParamStore params;  ///< encoder, decoder and (decoupled mode) flow parameters
  Mlp encoder;        ///< D -> ... -> 2L; first L outputs are mu, last L log-variance
  Mlp decoder;        ///< L -> ... -> D
  std::optional<DecoupledPrior> prior;

  Index latent_dim() const noexcept { return arch.latent_dim; }
  Index data_dim() const noexcept { return arch.data_dim; }
};

/// Builds a model with parameters registered in the order encoder, decoder,
/// prior. `init` applies to encoder and decoder, `flow_init` to the prior.
VaeModel make_vae(const VaeArchitecture& arch, PriorMode mode, Rng& rng, Init init = Init::uniform_fan_sum,
                  Init flow_init = Init::uniform_fan_sum);

PosteriorVars encode(Tape& tape, const VaeModel& model, Var x);
/// z = mu + exp(log_var / 2) * eps.
Var reparameterize(Tape& tape, const PosteriorVars& post, const Matrix& eps);
Var decode(Tape& tape, const VaeModel& model, Var z);

/// log N(x; x_mean, obs_std^2 I), one row per example (B x 1).
Var recon_log_likelihood(Var x_mean, Var x, double obs_std = 1.0);

/// Closed-form KL(q || N(0, I)) per example (B x 1).
Var kl_standard(const PosteriorVars& post);

/// Monte-Carlo KL(q || p) under a decoupled prior, per example (B x 1):
///   -L/2 - (1/2) sum log_var + (1/2) E||g(z)||^2 - E[log_det(z)]
/// with z = mu + sigma * eps for each draw in `eps` (each B x L).
Var kl_decoupled(Tape& tape, const ParamStore& params, const DecoupledPrior& prior, const PosteriorVars& post,
                 std::span<const Matrix> eps);
/// Same estimator drawing `mc.n_samples` noise matrices from `mc.seed`.
Var kl_decoupled(Tape& tape, const ParamStore& params, const DecoupledPrior& prior, const PosteriorVars& post,
                 const MonteCarloSpec& mc);

/// The same KL via -H(q) - E[log p(z)] with the closed-form Gaussian entropy
/// and the prior's change-of-variables density. Values only.
Eigen::VectorXd kl_decoupled_entropy_form(const ParamStore& params, const DecoupledPrior& prior,
                                          const Matrix& mu, const Matrix& log_var, std::span<const Matrix> eps);

/// log p(z) under the model's prior (standard normal or decoupled), B x 1.
Var prior_log_density(Tape& tape, const VaeModel& model, Var z);
Eigen::VectorXd prior_log_density(const VaeModel& model, const Matrix& z);

/// Draws n latent samples from the prior: z0 ~ N(0, I), mapped through the
/// inverse flow in decoupled mode.
Matrix sample_prior(const VaeModel& model, Index n, Rng& rng);

/// Posterior parameters for every row of x (values only).
void encode_values(const VaeModel& model, const Matrix& x, Matrix& mu, Matrix& log_var);
Matrix decode_values(const VaeModel& model, const Matrix& z);

/// Log-density of a diagonal Gaussian, one row per example.
Eigen::VectorXd diag_gaussian_log_density(const Matrix& z, const Matrix& mu, const Matrix& log_var);

}  // namespace dpvae
