#include "dpvae/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpvae/errors.hpp"
#include "dpvae/format.hpp"
#include "dpvae/optimizer.hpp"

namespace dpvae {

Checkpoint initialize(const TrainConfig& cfg) {
  validate(cfg);
  Rng rng = substream(cfg.seed, "init");
  Checkpoint c{cfg, 0, make_vae(cfg.arch, cfg.objective.prior_mode, rng), std::nullopt};
  if (cfg.objective.kind == ObjectiveKind::factor) {
    Rng drng = substream(cfg.seed, "init-discriminator");
    c.discriminator = make_discriminator(cfg.arch.latent_dim, cfg.disc_width, cfg.disc_layers, drng);
  }
  return c;
}

DataSplit checkpoint_data(const Checkpoint& ckpt) { return make_split(ckpt.config.dataset, ckpt.config.seed); }

namespace {

/// Epoch-wise shuffled minibatches.
class BatchSampler {
 public:
  BatchSampler(Index n, std::uint64_t seed) : order_(static_cast<std::size_t>(n)), rng_(substream(seed, "batching")) {
    std::iota(order_.begin(), order_.end(), Index{0});
    reshuffle();
  }

  std::vector<Index> next(Index b) {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(b));
    while (static_cast<Index>(out.size()) < b) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size() - 1; i > 0; --i) {
      std::swap(order_[i], order_[static_cast<std::size_t>(uniform_index(rng_, static_cast<Index>(i) + 1))]);
    }
    pos_ = 0;
  }

  std::vector<Index> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.recon) && std::isfinite(l.kl) && std::isfinite(l.extra);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  TrainResult result{initialize(cfg), {}};
  Checkpoint& ck = result.checkpoint;
  const Matrix data = checkpoint_data(ck).train.points;

  Adam opt(ck.model.params, AdamOptions{cfg.learning_rate});
  std::optional<Adam> disc_opt;
  if (ck.discriminator) disc_opt.emplace(ck.discriminator->params, AdamOptions{cfg.disc_learning_rate});

  BatchSampler sampler(data.rows(), cfg.seed);
  Rng noise_rng = substream(cfg.seed, "reparam");
  result.log.rows.reserve(static_cast<std::size_t>(cfg.iterations));

  for (long it = 0; it < cfg.iterations; ++it) {
    const std::vector<Index> idx = sampler.next(cfg.batch_size);
    Matrix x(cfg.batch_size, data.cols());
    for (Index i = 0; i < cfg.batch_size; ++i) x.row(i) = data.row(idx[static_cast<std::size_t>(i)]);
    const ObjectiveNoise noise = draw_objective_noise(cfg.objective, cfg.batch_size, cfg.arch.latent_dim, noise_rng);
    const ObjectiveContext ctx{it, data.rows(), ck.discriminator ? &*ck.discriminator : nullptr};

    Tape tape;
    LossTerms loss = evaluate_objective(tape, ck.model, cfg.objective, x, noise, ctx);
    const LossBreakdown values = loss.values();
    if (!finite(values)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << ": total=" << values.total << " recon=" << values.recon
          << " kl=" << values.kl << " extra=" << values.extra;
      throw NumericAbort(msg.str(), it);
    }
    tape.backward(loss.total);
    ck.model.params.zero_grad();
    tape.accumulate_gradients(ck.model.params);
    const Matrix z = loss.z.value();
    opt.step(ck.model.params);

    if (ck.discriminator) {
      Tape dtape;
      Var dloss = discriminator_loss(dtape, *ck.discriminator, z, permute_dims(z, noise.perms));
      dtape.backward(dloss);
      ck.discriminator->params.zero_grad();
      dtape.accumulate_gradients(ck.discriminator->params);
      disc_opt->step(ck.discriminator->params);
    }

    result.log.rows.push_back(values);
    ck.iteration = it + 1;
    if (progress) progress(it, values);
  }
  return result;
}

namespace {

constexpr std::string_view kMagic = "dpvae-checkpoint v1";

void write_store(std::ostream& out, std::string_view tag, const ParamStore& store) {
  for (const auto& e : store.entries()) {
    out << "param " << tag << ' ' << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
    for (Index i = 0; i < e.value.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(e.value.data()[i]);
    }
    out << '\n';
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "iteration " << ckpt.iteration << '\n';
  out << "config " << to_json(ckpt.config) << '\n';
  write_store(out, "model", ckpt.model.params);
  if (ckpt.discriminator) write_store(out, "disc", ckpt.discriminator->params);
  out << "end\n";
  return out.str();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write checkpoint: " + path.string());
  out << serialize_checkpoint(ckpt);
}

Checkpoint parse_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw LoadError("not a dpvae checkpoint");

  long iteration = 0;
  if (!std::getline(in, line) || line.rfind("iteration ", 0) != 0) throw LoadError("missing iteration line");
  try {
    iteration = std::stol(line.substr(10));
  } catch (const std::exception&) {
    throw LoadError("malformed iteration line");
  }
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) throw LoadError("missing config line");
  TrainConfig cfg;
  try {
    cfg = parse_train_config(line.substr(7));
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }

  Checkpoint ck = initialize(cfg);
  ck.iteration = iteration;
  std::size_t model_seen = 0;
  std::size_t disc_seen = 0;
  while (std::getline(in, line)) {
    if (line == "end") {
      const std::size_t disc_expected = ck.discriminator ? ck.discriminator->params.size() : 0;
      if (model_seen != ck.model.params.size() || disc_seen != disc_expected) {
        throw LoadError("checkpoint is missing parameter arrays");
      }
      return ck;
    }
    std::istringstream head(line);
    std::string kw, tag, name;
    Index rows = 0;
    Index cols = 0;
    if (!(head >> kw >> tag >> name >> rows >> cols) || kw != "param") throw LoadError("malformed param header: " + line);
    ParamStore* store = nullptr;
    std::size_t* seen = nullptr;
    if (tag == "model") {
      store = &ck.model.params;
      seen = &model_seen;
    } else if (tag == "disc" && ck.discriminator) {
      store = &ck.discriminator->params;
      seen = &disc_seen;
    } else {
      throw LoadError("unexpected parameter group: " + tag);
    }
    if (*seen >= store->size() || store->entry(*seen).name != name) {
      throw LoadError("parameter order/name mismatch at " + name);
    }
    Matrix& v = store->entry(*seen).value;
    if (v.rows() != rows || v.cols() != cols) throw LoadError("shape mismatch for " + name);
    if (!std::getline(in, line)) throw LoadError("truncated values for " + name);
    std::istringstream vals(line);
    std::string tok;
    Index k = 0;
    while (vals >> tok) {
      if (k >= v.size()) throw LoadError("too many values for " + name);
      v.data()[k++] = parse_double(tok);
    }
    if (k != v.size()) throw LoadError("too few values for " + name);
    ++*seen;
  }
  throw LoadError("checkpoint truncated (no end marker)");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace dpvae
