#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "dpvae/config.hpp"
#include "dpvae/objectives.hpp"

namespace dpvae {

/// A trained (or freshly initialized) model with the configuration that
/// produced it.
struct Checkpoint {
  TrainConfig config;
  long iteration = 0;
  VaeModel model;
  std::optional<Discriminator> discriminator;  ///< factor objective only
};

struct RunLog {
  std::vector<LossBreakdown> rows;  ///< one per iteration
};

struct TrainResult {
  Checkpoint checkpoint;
  RunLog log;
};

/// Builds the model (and discriminator) for `cfg` from the "init" substream of
/// cfg.seed.
Checkpoint initialize(const TrainConfig& cfg);

/// Called after every iteration with (iteration, losses).
using ProgressFn = std::function<void(long, const LossBreakdown&)>;

/// Minimizes the configured objective with Adam. Decoupled mode trains the
/// flow jointly with encoder and decoder; the factor objective takes one
/// discriminator step after each model step. Deterministic in cfg.seed.
/// Throws NumericAbort on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = nullptr);

/// Text checkpoint: header, config JSON, then every parameter array in store
/// order with 17 significant digits.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws LoadError on malformed input or parameter names/shapes that do not
/// match the embedded configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(std::string_view text);

/// Train/held-out data regenerated from the checkpoint's dataset settings and seed.
DataSplit checkpoint_data(const Checkpoint& ckpt);

}  // namespace dpvae
