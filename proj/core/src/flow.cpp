#include "dpvae/flow.hpp"

#include <cmath>
#include <numbers>

#include "dpvae/errors.hpp"

namespace dpvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

Var row_constant(Tape& tape, const Eigen::RowVectorXd& row) { return tape.constant(Matrix(row)); }

void check_width(Var z, Index latent_dim, const char* op) {
  if (z.cols() != latent_dim) {
    throw ShapeError(std::string(op) + ": expected width " + std::to_string(latent_dim) + ", got " +
                     std::to_string(z.cols()));
  }
}

}  // namespace

Eigen::RowVectorXd checkerboard_mask(Index latent_dim, bool first) {
  Eigen::RowVectorXd m(latent_dim);
  for (Index l = 0; l < latent_dim; ++l) m(l) = ((l % 2 == 0) == first) ? 1.0 : 0.0;
  return m;
}

DecoupledPrior::DecoupledPrior(std::vector<CouplingBlock> blocks, Index latent_dim, double s_max)
    : blocks_(std::move(blocks)), latent_dim_(latent_dim), s_max_(s_max) {
  for (const auto& b : blocks_) {
    if (b.mask.size() != latent_dim_) throw ShapeError("coupling mask length differs from latent dimension");
    const double ones = b.mask.sum();
    if (ones < 1.0 || ones > static_cast<double>(latent_dim_) - 1.0) {
      throw ArgumentError("coupling mask needs at least one 0 and one 1 entry");
    }
  }
}

Var coupling_scale(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var masked) {
  return s_max * tanh(block.scale_net.forward(tape, params, masked));
}

Var coupling_forward(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var z,
                     Var* log_det) {
  check_width(z, block.mask.size(), "coupling_forward");
  Var b = row_constant(tape, block.mask);
  Var nb = row_constant(tape, Eigen::RowVectorXd::Ones(block.mask.size()) - block.mask);
  Var masked = z * b;
  Var s = coupling_scale(tape, params, block, s_max, masked);
  Var t = block.translate_net.forward(tape, params, masked);
  if (log_det != nullptr) *log_det = row_sum(s * nb);
  return masked + nb * (z * exp(s) + t);
}

Var coupling_inverse(Tape& tape, const ParamStore& params, const CouplingBlock& block, double s_max, Var y) {
  check_width(y, block.mask.size(), "coupling_inverse");
  Var b = row_constant(tape, block.mask);
  Var nb = row_constant(tape, Eigen::RowVectorXd::Ones(block.mask.size()) - block.mask);
  Var masked = y * b;
  Var s = coupling_scale(tape, params, block, s_max, masked);
  Var t = block.translate_net.forward(tape, params, masked);
  return masked + nb * ((y - t) * exp(-s));
}

FlowOutput DecoupledPrior::forward(Tape& tape, const ParamStore& params, Var z) const {
  check_width(z, latent_dim_, "flow_forward");
  Var h = z;
  Var total = tape.constant(Matrix::Zero(z.rows(), 1));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    Var ld;
    h = coupling_forward(tape, params, *it, s_max_, h, &ld);
    total = total + ld;
  }
  return FlowOutput{h, total};
}

Var DecoupledPrior::inverse(Tape& tape, const ParamStore& params, Var z0) const {
  check_width(z0, latent_dim_, "flow_inverse");
  Var h = z0;
  for (const auto& block : blocks_) h = coupling_inverse(tape, params, block, s_max_, h);
  return h;
}

Var DecoupledPrior::log_density(Tape& tape, const ParamStore& params, Var z) const {
  FlowOutput out = forward(tape, params, z);
  return standard_normal_log_density(out.z0) + out.log_det;
}

Matrix DecoupledPrior::forward_values(const ParamStore& params, const Matrix& z, Eigen::VectorXd* log_det) const {
  Tape tape;
  FlowOutput out = forward(tape, params, tape.constant(z));
  if (log_det != nullptr) *log_det = out.log_det.value().col(0);
  return out.z0.value();
}

Matrix DecoupledPrior::inverse_values(const ParamStore& params, const Matrix& z0) const {
  Tape tape;
  return inverse(tape, params, tape.constant(z0)).value();
}

Eigen::VectorXd DecoupledPrior::log_density_values(const ParamStore& params, const Matrix& z) const {
  Tape tape;
  return log_density(tape, params, tape.constant(z)).value().col(0);
}

DecoupledPrior make_decoupled_prior(ParamStore& params, const std::string& prefix, Index latent_dim,
                                    const FlowSpec& spec, Init init, Rng& rng) {
  if (latent_dim < 2) throw ArgumentError("decoupled prior needs latent dimension >= 2");
  if (spec.blocks < 1 || spec.width < 1 || spec.hidden_layers < 0) throw ArgumentError("invalid flow spec");
  std::vector<Index> dims{latent_dim};
  for (int i = 0; i < spec.hidden_layers; ++i) dims.push_back(spec.width);
  dims.push_back(latent_dim);
  std::vector<CouplingBlock> blocks;
  for (int k = 0; k < spec.blocks; ++k) {
    const std::string stem = prefix + ".block" + std::to_string(k);
    CouplingBlock block;
    block.mask = checkerboard_mask(latent_dim, k % 2 == 0);
    block.scale_net = make_mlp(params, stem + ".s", dims, Activation::leaky_relu, Activation::linear, init, rng);
    block.translate_net = make_mlp(params, stem + ".t", dims, Activation::leaky_relu, Activation::linear, init, rng);
    blocks.push_back(std::move(block));
  }
  return DecoupledPrior(std::move(blocks), latent_dim, spec.s_max);
}

Var standard_normal_log_density(Var z) {
  const double c = -0.5 * static_cast<double>(z.cols()) * kLog2Pi;
  return shift(-0.5 * row_sum(square(z)), c);
}

Eigen::VectorXd standard_normal_log_density(const Matrix& z) {
  const double c = -0.5 * static_cast<double>(z.cols()) * kLog2Pi;
  return (c - 0.5 * z.rowwise().squaredNorm().array()).matrix();
}

}  // namespace dpvae
