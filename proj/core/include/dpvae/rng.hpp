#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace dpvae {

using Rng = std::mt19937_64;

/// Derives an independent generator for a named purpose from a root seed.
/// Streams with different (purpose, index) never share state, so adding draws
/// to one purpose leaves every other purpose's draws untouched.
Rng substream(std::uint64_t root_seed, std::string_view purpose, std::uint64_t index = 0);

/// rows x cols matrix of independent N(0, 1) draws, filled row by row.
Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Uniform index in [0, n).
Eigen::Index uniform_index(Rng& rng, Eigen::Index n);

}  // namespace dpvae
