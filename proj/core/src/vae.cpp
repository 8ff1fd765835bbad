#include "dpvae/vae.hpp"

#include <cmath>

#include "dpvae/errors.hpp"

namespace dpvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

std::string_view to_string(PriorMode mode) { return mode == PriorMode::standard ? "standard" : "decoupled"; }

PriorMode parse_prior_mode(std::string_view text) {
  if (text == "standard") return PriorMode::standard;
  if (text == "decoupled") return PriorMode::decoupled;
  throw ArgumentError("unknown prior mode: " + std::string(text));
}

VaeModel make_vae(const VaeArchitecture& arch, PriorMode mode, Rng& rng, Init init, Init flow_init) {
  if (arch.data_dim < 1 || arch.latent_dim < 1) throw ArgumentError("make_vae: dimensions must be positive");
  if (!(arch.obs_std > 0.0)) throw ArgumentError("make_vae: obs_std must be positive");
  VaeModel m;
  m.arch = arch;
  m.prior_mode = mode;
  std::vector<Index> enc{arch.data_dim};
  enc.insert(enc.end(), arch.hidden.begin(), arch.hidden.end());
  enc.push_back(2 * arch.latent_dim);
  std::vector<Index> dec{arch.latent_dim};
  dec.insert(dec.end(), arch.hidden.rbegin(), arch.hidden.rend());
  dec.push_back(arch.data_dim);
  m.encoder = make_mlp(m.params, "encoder", enc, arch.activation, Activation::linear, init, rng);
  m.decoder = make_mlp(m.params, "decoder", dec, arch.activation, Activation::linear, init, rng);
  if (mode == PriorMode::decoupled) {
    m.prior = make_decoupled_prior(m.params, "prior", arch.latent_dim, arch.flow, flow_init, rng);
  }
  return m;
}

PosteriorVars encode(Tape& tape, const VaeModel& model, Var x) {
  if (x.cols() != model.data_dim()) throw ShapeError("encode: input width does not match data dimension");
  Var h = model.encoder.forward(tape, model.params, x);
  const Index L = model.latent_dim();
  return PosteriorVars{slice_cols(h, 0, L), slice_cols(h, L, L)};
}

Var reparameterize(Tape& tape, const PosteriorVars& post, const Matrix& eps) {
  if (eps.rows() != post.mu.rows() || eps.cols() != post.mu.cols()) throw ShapeError("reparameterize: eps shape");
  return post.mu + exp(0.5 * post.log_var) * tape.constant(eps);
}

Var decode(Tape& tape, const VaeModel& model, Var z) {
  if (z.cols() != model.latent_dim()) throw ShapeError("decode: latent width does not match");
  return model.decoder.forward(tape, model.params, z);
}

Var recon_log_likelihood(Var x_mean, Var x, double obs_std) {
  if (x_mean.rows() != x.rows() || x_mean.cols() != x.cols()) throw ShapeError("recon_log_likelihood: shapes");
  const double d = static_cast<double>(x.cols());
  const double c = -0.5 * d * kLog2Pi - d * std::log(obs_std);
  const double inv_var = 1.0 / (obs_std * obs_std);
  return shift((-0.5 * inv_var) * row_sum(square(x - x_mean)), c);
}

Var kl_standard(const PosteriorVars& post) {
  Var terms = square(post.mu) + exp(post.log_var) - post.log_var;
  return 0.5 * shift(row_sum(terms), -static_cast<double>(post.mu.cols()));
}

Var kl_decoupled(Tape& tape, const ParamStore& params, const DecoupledPrior& prior, const PosteriorVars& post,
                 std::span<const Matrix> eps) {
  if (eps.empty()) throw ArgumentError("kl_decoupled: need at least one Monte-Carlo draw");
  const double L = static_cast<double>(post.mu.cols());
  Var acc;
  for (const auto& e : eps) {
    Var z = reparameterize(tape, post, e);
    FlowOutput g = prior.forward(tape, params, z);
    Var term = 0.5 * row_sum(square(g.z0)) - g.log_det;
    acc = acc.valid() ? acc + term : term;
  }
  Var expectation = scale(acc, 1.0 / static_cast<double>(eps.size()));
  return shift(-0.5 * row_sum(post.log_var), -0.5 * L) + expectation;
}

Var kl_decoupled(Tape& tape, const ParamStore& params, const DecoupledPrior& prior, const PosteriorVars& post,
                 const MonteCarloSpec& mc) {
  if (mc.n_samples < 1) throw ArgumentError("MonteCarloSpec.n_samples must be >= 1");
  Rng rng = substream(mc.seed, "kl-decoupled");
  std::vector<Matrix> eps;
  eps.reserve(static_cast<std::size_t>(mc.n_samples));
  for (int s = 0; s < mc.n_samples; ++s) eps.push_back(standard_normal(rng, post.mu.rows(), post.mu.cols()));
  return kl_decoupled(tape, params, prior, post, eps);
}

Eigen::VectorXd kl_decoupled_entropy_form(const ParamStore& params, const DecoupledPrior& prior,
                                          const Matrix& mu, const Matrix& log_var, std::span<const Matrix> eps) {
  if (eps.empty()) throw ArgumentError("kl_decoupled_entropy_form: need at least one draw");
  const double L = static_cast<double>(mu.cols());
  // H(q) = L/2 + (L/2) log 2pi + (1/2) log|Sigma|
  const Eigen::VectorXd entropy = (0.5 * L + 0.5 * L * kLog2Pi + 0.5 * log_var.rowwise().sum().array()).matrix();
  Eigen::VectorXd expected_log_p = Eigen::VectorXd::Zero(mu.rows());
  for (const auto& e : eps) {
    const Matrix z = mu + ((0.5 * log_var.array()).exp() * e.array()).matrix();
    expected_log_p += prior.log_density_values(params, z);
  }
  expected_log_p /= static_cast<double>(eps.size());
  return -entropy - expected_log_p;
}

Var prior_log_density(Tape& tape, const VaeModel& model, Var z) {
  if (model.prior_mode == PriorMode::decoupled) return model.prior->log_density(tape, model.params, z);
  return standard_normal_log_density(z);
}

Eigen::VectorXd prior_log_density(const VaeModel& model, const Matrix& z) {
  if (model.prior_mode == PriorMode::decoupled) return model.prior->log_density_values(model.params, z);
  return standard_normal_log_density(z);
}

Matrix sample_prior(const VaeModel& model, Index n, Rng& rng) {
  Matrix z0 = standard_normal(rng, n, model.latent_dim());
  if (model.prior_mode == PriorMode::decoupled) return model.prior->inverse_values(model.params, z0);
  return z0;
}

void encode_values(const VaeModel& model, const Matrix& x, Matrix& mu, Matrix& log_var) {
  Tape tape;
  PosteriorVars post = encode(tape, model, tape.constant(x));
  mu = post.mu.value();
  log_var = post.log_var.value();
}

Matrix decode_values(const VaeModel& model, const Matrix& z) {
  Tape tape;
  return decode(tape, model, tape.constant(z)).value();
}

Eigen::VectorXd diag_gaussian_log_density(const Matrix& z, const Matrix& mu, const Matrix& log_var) {
  const double L = static_cast<double>(z.cols());
  const Eigen::ArrayXXd d = z - mu;
  const Eigen::ArrayXXd quad = d.square() * (-log_var.array()).exp();
  return (-0.5 * L * kLog2Pi - 0.5 * (log_var.array().rowwise().sum() + quad.rowwise().sum())).matrix();
}

}  // namespace dpvae
