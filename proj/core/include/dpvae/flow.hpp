#pragma once

#include <string>
#include <vector>

#include "dpvae/autodiff.hpp"
#include "dpvae/nn.hpp"

namespace dpvae {

struct FlowSpec {
  int blocks = 4;
  Index width = 64;
  int hidden_layers = 2;
  double s_max = 2.0;
};

/// One affine coupling bijection. Coordinates with mask 1 pass through and
/// condition the scale/translation of the coordinates with mask 0.
struct CouplingBlock {
  Eigen::RowVectorXd mask;
  Mlp scale_net;
  Mlp translate_net;
};

struct FlowOutput {
  Var z0;       ///< B x L
  Var log_det;  ///< B x 1, log |d g(z) / d z|
};

/// Ordered stack of coupling blocks g_1 ... g_K mapping the representation
/// space to the generation space: g(z) = g_1(g_2(... g_K(z))).
class DecoupledPrior {
 public:
  DecoupledPrior() = default;
  DecoupledPrior(std::vector<CouplingBlock> blocks, Index latent_dim, double s_max);

  /// Block k maps z_k to z_{k-1}; `blocks()[0]` is g_1.
  const std::vector<CouplingBlock>& blocks() const noexcept { return blocks_; }
  Index latent_dim() const noexcept { return latent_dim_; }
  double s_max() const noexcept { return s_max_; }

  FlowOutput forward(Tape& tape, const ParamStore& params, Var z) const;
  Var inverse(Tape& tape, const ParamStore& params, Var z0) const;
  /// log N(g(z); 0, I) + log_det(z), one row per input row.
  Var log_density(Tape& tape, const ParamStore& params, Var z) const;

  // Value-level conveniences on a throwaway tape.
  Matrix forward_values(const ParamStore& params, const Matrix& z, Eigen::VectorXd* log_det = nullptr) const;
  Matrix inverse_values(const ParamStore& params, const Matrix& z0) const;
  Eigen::VectorXd log_density_values(const ParamStore& params, const Matrix& z) const;

 private:
  std::vector<CouplingBlock> blocks_;
  Index latent_dim_ = 0;
  double s_max_ = 2.0;
};

/// Bounded scale output s_max * tanh(scale_net(masked input)), B x L.
Var coupling_scale(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var masked);

/// z_{k-1} = b*z + (1-b)*(z*exp(s(b*z)) + t(b*z)). If `log_det` is non-null
/// it receives the B x 1 sum of s over the unmasked coordinates.
Var coupling_forward(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var z,
                     Var* log_det = nullptr);

/// z_k = b*y + (1-b)*((y - t(b*y)) * exp(-s(b*y))).
Var coupling_inverse(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var y);

/// Checkerboard mask: entries alternate starting from `first`.
Eigen::RowVectorXd checkerboard_mask(Index latent_dim, bool first);

/// Alternating complementary masks, b_1 = (1,0,1,...), b_2 = (0,1,0,...), ...
/// Scale/translation nets are L -> width^hidden_layers -> L with leaky-ReLU
/// hidden units. Parameters are registered under "<prefix>.block<k>.{s,t}".
DecoupledPrior make_decoupled_prior(ParamStore& params, const std::string& prefix, Index latent_dim,
                                    const FlowSpec& spec, Init init, Rng& rng);

/// -(L/2) log 2pi - ||z||^2 / 2 per row.
Var standard_normal_log_density(Var z);
Eigen::VectorXd standard_normal_log_density(const Matrix& z);

}  // namespace dpvae
