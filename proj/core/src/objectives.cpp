#include "dpvae/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpvae/errors.hpp"

namespace dpvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Common {
  PosteriorVars post;
  Var z;
  Var recon;  // 1x1 batch mean log-likelihood
};

void check_batch(const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x, const ObjectiveNoise& noise) {
  if (x.rows() == 0) throw ArgumentError("objective: empty batch");
  if (cfg.prior_mode != model.prior_mode) throw ArgumentError("objective: prior mode differs from the model's");
  if (noise.eps.rows() != x.rows() || noise.eps.cols() != model.latent_dim()) {
    throw ShapeError("objective: reparameterization noise must be B x L");
  }
}

Common common_forward(Tape& tape, const VaeModel& model, const Matrix& x, const ObjectiveNoise& noise) {
  Var xv = tape.constant(x);
  PosteriorVars post = encode(tape, model, xv);
  Var z = reparameterize(tape, post, noise.eps);
  Var x_mean = decode(tape, model, z);
  Var recon = mean(recon_log_likelihood(x_mean, xv, model.arch.obs_std));
  return Common{post, z, recon};
}

/// Batch-mean KL(q(z|x) || p(z)) for the model's prior mode.
Var kl_term(Tape& tape, const VaeModel& model, const PosteriorVars& post, const ObjectiveNoise& noise) {
  if (model.prior_mode == PriorMode::standard) return mean(kl_standard(post));
  const Matrix* eps = &noise.eps;
  return mean(kl_decoupled(tape, model.params, *model.prior, post, std::span<const Matrix>(eps, 1)));
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::vanilla:
      return "vanilla";
    case ObjectiveKind::beta_h:
      return "beta-H";
    case ObjectiveKind::beta_b:
      return "beta-B";
    case ObjectiveKind::factor:
      return "factor";
    case ObjectiveKind::beta_tc:
      return "beta-tc";
    case ObjectiveKind::info:
      return "info";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(std::string_view text) {
  for (auto k : {ObjectiveKind::vanilla, ObjectiveKind::beta_h, ObjectiveKind::beta_b, ObjectiveKind::factor,
                 ObjectiveKind::beta_tc, ObjectiveKind::info}) {
    if (text == to_string(k)) return k;
  }
  throw ArgumentError("unknown objective kind: " + std::string(text));
}

ObjectiveConfig ObjectiveConfig::defaults(ObjectiveKind kind, PriorMode mode) {
  ObjectiveConfig c;
  c.kind = kind;
  c.prior_mode = mode;
  switch (kind) {
    case ObjectiveKind::vanilla:
      break;
    case ObjectiveKind::beta_h:
      c.beta = 4.0;
      break;
    case ObjectiveKind::beta_b:
      c.gamma = 15.0;
      c.c_max = 25.0;
      c.c_stop = 100000;
      break;
    case ObjectiveKind::factor:
      c.gamma = 1000.0;
      break;
    case ObjectiveKind::beta_tc:
      c.alpha = 1.0;
      c.beta = 4.0;
      c.gamma = 15.0;
      break;
    case ObjectiveKind::info:
      c.alpha = 0.0;
      c.lambda = 1000.0;
      break;
  }
  return c;
}

LossBreakdown LossTerms::values() const {
  return LossBreakdown{total.scalar(), recon.scalar(), kl.scalar(), extra.scalar()};
}

ObjectiveNoise draw_objective_noise(const ObjectiveConfig& cfg, Index batch, Index latent_dim, Rng& rng) {
  ObjectiveNoise n;
  n.eps = standard_normal(rng, batch, latent_dim);
  if (cfg.kind == ObjectiveKind::factor) n.perms = draw_permutations(batch, latent_dim, rng);
  if (cfg.kind == ObjectiveKind::info) n.prior_z0 = standard_normal(rng, batch, latent_dim);
  return n;
}

Discriminator make_discriminator(Index latent_dim, Index width, int hidden_layers, Rng& rng, Init init) {
  if (hidden_layers < 1 || width < 1) throw ArgumentError("discriminator needs at least one hidden layer");
  Discriminator d;
  std::vector<Index> dims{latent_dim};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(width);
  dims.push_back(2);
  d.net = make_mlp(d.params, "disc", dims, Activation::leaky_relu, Activation::linear, init, rng);
  return d;
}

std::vector<std::vector<Index>> draw_permutations(Index batch, Index dims, Rng& rng) {
  std::vector<std::vector<Index>> perms(static_cast<std::size_t>(dims));
  for (auto& p : perms) {
    p.resize(static_cast<std::size_t>(batch));
    std::iota(p.begin(), p.end(), Index{0});
    // Fisher-Yates with our own index draws keeps the result library-independent.
    for (Index i = batch - 1; i > 0; --i) {
      const Index j = uniform_index(rng, i + 1);
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
  }
  return perms;
}

Matrix permute_dims(const Matrix& z, const std::vector<std::vector<Index>>& perms) {
  Tape tape;
  return permute_columns(tape.constant(z), perms).value();
}

Var discriminator_loss(Tape& tape, const Discriminator& disc, const Matrix& z_joint, const Matrix& z_perm) {
  if (z_joint.rows() < 2 || z_perm.rows() < 2) throw ArgumentError("discriminator_loss: batch must have >= 2 rows");
  Var lj = disc.net.forward(tape, disc.params, tape.constant(z_joint));
  Var lp = disc.net.forward(tape, disc.params, tape.constant(z_perm));
  Var ce_joint = logsumexp_rows(lj) - slice_cols(lj, 1, 1);
  Var ce_perm = logsumexp_rows(lp) - slice_cols(lp, 0, 1);
  const double n = static_cast<double>(z_joint.rows() + z_perm.rows());
  return scale(sum(ce_joint) + sum(ce_perm), 1.0 / n);
}

double mmd_bandwidth(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("mmd: dimension mismatch");
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const Index n = pooled.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) d.push_back((pooled.row(i) - pooled.row(j)).squaredNorm());
  }
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), mid));
  }
  return med > 0.0 ? med : 1.0;
}

Var mmd(Tape& /*tape*/, Var a, Var b, std::optional<double> bandwidth) {
  if (a.rows() == 0 || b.rows() == 0) throw ArgumentError("mmd: empty sample");
  if (a.cols() != b.cols()) throw ShapeError("mmd: dimension mismatch");
  const double h = bandwidth ? *bandwidth : mmd_bandwidth(a.value(), b.value());
  auto kernel_mean = [&](Var u, Var v) { return mean(exp(scale(pairwise_sq_dist(u, v), -1.0 / h))); };
  return kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b);
}

double mmd(const Matrix& a, const Matrix& b, std::optional<double> bandwidth) {
  Tape tape;
  return mmd(tape, tape.constant(a), tape.constant(b), bandwidth).scalar();
}

double capacity_at(const ObjectiveConfig& cfg, long step) {
  if (cfg.c_stop <= 0) throw ArgumentError("C_stop must be positive");
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.c_stop));
  return cfg.c_max * frac;
}

LossTerms elbo_vanilla(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                       const ObjectiveNoise& noise) {
  check_batch(model, cfg, x, noise);
  Common c = common_forward(tape, model, x, noise);
  Var kl = kl_term(tape, model, c.post, noise);
  Var total = -c.recon + kl;
  return LossTerms{total, c.recon, kl, tape.constant(0.0), c.z};
}

LossTerms elbo_beta_h(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise) {
  check_batch(model, cfg, x, noise);
  Common c = common_forward(tape, model, x, noise);
  Var kl = kl_term(tape, model, c.post, noise);
  Var total = -c.recon + cfg.beta * kl;
  return LossTerms{total, c.recon, kl, tape.constant(0.0), c.z};
}

LossTerms elbo_beta_b(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise, long step) {
  check_batch(model, cfg, x, noise);
  Common c = common_forward(tape, model, x, noise);
  Var kl = kl_term(tape, model, c.post, noise);
  Var gap = abs(kl - capacity_at(cfg, step));
  Var total = -c.recon + cfg.gamma * gap;
  return LossTerms{total, c.recon, kl, gap, c.z};
}

LossTerms elbo_factor(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                      const ObjectiveNoise& noise, const Discriminator* disc) {
  if (disc == nullptr) throw ArgumentError("factor objective needs a discriminator");
  check_batch(model, cfg, x, noise);
  Common c = common_forward(tape, model, x, noise);
  Var kl = kl_term(tape, model, c.post, noise);
  Var logits = disc->net.forward(tape, disc->params, c.z);
  Var tc = mean(slice_cols(logits, 1, 1) - slice_cols(logits, 0, 1));
  Var total = (-c.recon + kl) + cfg.gamma * tc;
  return LossTerms{total, c.recon, kl, tc, c.z};
}

LossTerms elbo_beta_tc(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                       const ObjectiveNoise& noise, Index dataset_size) {
  check_batch(model, cfg, x, noise);
  const Index B = x.rows();
  if (B < 2) throw ArgumentError("beta-tc objective needs a batch of at least 2");
  if (dataset_size < B) throw ArgumentError("beta-tc objective: dataset size smaller than batch");
  Common c = common_forward(tape, model, x, noise);
  const Index L = model.latent_dim();
  const double log_nm = std::log(static_cast<double>(dataset_size) * static_cast<double>(B));

  // log q(z_i | x_j) per latent dimension, each B x B.
  Var joint;
  Var log_prod;
  for (Index d = 0; d < L; ++d) {
    Var zd = slice_cols(c.z, d, 1);
    Var mu_d = transpose(slice_cols(c.post.mu, d, 1));
    Var lv_d = transpose(slice_cols(c.post.log_var, d, 1));
    Var quad = square(zd - mu_d) * exp(-lv_d);
    Var logq_d = shift(-0.5 * (quad + lv_d), -0.5 * kLog2Pi);
    joint = joint.valid() ? joint + logq_d : logq_d;
    Var marginal_d = logsumexp_rows(logq_d);
    log_prod = log_prod.valid() ? log_prod + marginal_d : marginal_d;
  }
  Var log_qz = shift(logsumexp_rows(joint), -log_nm);
  Var log_qz_prod = shift(log_prod, -log_nm * static_cast<double>(L));

  Var eps = tape.constant(noise.eps);
  Var log_qzx = shift(-0.5 * row_sum(c.post.log_var + square(eps)), -0.5 * static_cast<double>(L) * kLog2Pi);
  Var log_pz = prior_log_density(tape, model, c.z);

  Var mi = mean(log_qzx - log_qz);
  Var tc = mean(log_qz - log_qz_prod);
  Var dwkl = mean(log_qz_prod - log_pz);
  Var kl = (mi + tc) + dwkl;
  Var total = ((-c.recon + cfg.alpha * mi) + cfg.beta * tc) + cfg.gamma * dwkl;
  return LossTerms{total, c.recon, kl, tc, c.z};
}

LossTerms elbo_info(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                    const ObjectiveNoise& noise) {
  check_batch(model, cfg, x, noise);
  if (noise.prior_z0.rows() == 0 || noise.prior_z0.cols() != model.latent_dim()) {
    throw ShapeError("info objective needs M x L prior base draws");
  }
  Common c = common_forward(tape, model, x, noise);
  Var kl = kl_term(tape, model, c.post, noise);
  Var prior_z = tape.constant(noise.prior_z0);
  if (model.prior_mode == PriorMode::decoupled) prior_z = model.prior->inverse(tape, model.params, prior_z);
  const double h = noise.mmd_bandwidth ? *noise.mmd_bandwidth : mmd_bandwidth(c.z.value(), prior_z.value());
  Var divergence = mmd(tape, c.z, prior_z, h);
  Var total = (-c.recon + (1.0 - cfg.alpha) * kl) + (cfg.alpha + cfg.lambda - 1.0) * divergence;
  return LossTerms{total, c.recon, kl, divergence, c.z};
}

LossTerms evaluate_objective(Tape& tape, const VaeModel& model, const ObjectiveConfig& cfg, const Matrix& x,
                             const ObjectiveNoise& noise, const ObjectiveContext& ctx) {
  switch (cfg.kind) {
    case ObjectiveKind::vanilla:
      return elbo_vanilla(tape, model, cfg, x, noise);
    case ObjectiveKind::beta_h:
      return elbo_beta_h(tape, model, cfg, x, noise);
    case ObjectiveKind::beta_b:
      return elbo_beta_b(tape, model, cfg, x, noise, ctx.step);
    case ObjectiveKind::factor:
      return elbo_factor(tape, model, cfg, x, noise, ctx.discriminator);
    case ObjectiveKind::beta_tc:
      return elbo_beta_tc(tape, model, cfg, x, noise, ctx.dataset_size);
    case ObjectiveKind::info:
      return elbo_info(tape, model, cfg, x, noise);
  }
  throw ArgumentError("unknown objective kind");
}

}  // namespace dpvae
