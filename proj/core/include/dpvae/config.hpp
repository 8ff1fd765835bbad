#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dpvae/datagen.hpp"
#include "dpvae/objectives.hpp"
#include "dpvae/vae.hpp"

namespace dpvae {

struct TrainConfig {
  ObjectiveConfig objective;
  double learning_rate = 1e-4;
  Index batch_size = 100;
  long iterations = 20000;
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  VaeArchitecture arch;
  Index disc_width = 1000;
  int disc_layers = 5;
  double disc_learning_rate = 1e-4;
  std::string output_dir = "run";
};

/// Default configuration for the two-moons experiment with the given
/// regularizer and prior mode.
TrainConfig two_moons_config(ObjectiveKind kind, PriorMode mode, std::uint64_t seed = 0);

/// Parses a flat JSON object. "objective" selects the regularizer and its
/// published hyperparameters; any other recognised key overrides a field.
/// Unknown keys, wrong types and invalid values throw ConfigError.
TrainConfig parse_train_config(std::string_view json_text);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Single-line JSON carrying every field; parse_train_config inverts it.
std::string to_json(const TrainConfig& cfg);

/// Throws ConfigError describing the first invalid field.
void validate(const TrainConfig& cfg);

}  // namespace dpvae
