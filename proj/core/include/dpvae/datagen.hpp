#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "dpvae/params.hpp"

namespace dpvae {

/// N x 2 point set tagged with the generator and seed that produced it.
struct Dataset2D {
  std::string name;
  std::uint64_t seed = 0;
  Matrix points;

  Index size() const noexcept { return points.rows(); }
};

/// Interleaved half circles: floor(n/2) points on the upper unit arc
/// (cos t, sin t) and the rest on the lower arc (1 - cos t, 0.5 - sin t),
/// t ~ U[0, pi], plus isotropic N(0, noise^2) jitter. Throws ArgumentError for
/// n < 2 or negative noise.
Dataset2D two_moons(Index n, double noise, std::uint64_t seed);

/// k x k grid of isotropic blobs centred on the origin, `spacing` apart;
/// point i belongs to blob i mod k^2.
Dataset2D gaussian_grid(Index n, Index k, double spacing, double noise, std::uint64_t seed);

/// Centre of blob `b` in a k x k grid.
Eigen::Vector2d grid_center(Index b, Index k, double spacing);

struct DatasetSpec {
  std::string name = "two_moons";  ///< "two_moons" or "gaussian_grid"
  Index n_train = 2048;
  Index n_heldout = 512;
  double noise = 0.05;
  Index grid_k = 3;
  double grid_spacing = 2.0;
};

struct DataSplit {
  Dataset2D train;
  Dataset2D heldout;
};

/// Train and held-out sets drawn from disjoint seed substreams.
DataSplit make_split(const DatasetSpec& spec, std::uint64_t seed);

/// Two-column CSV with header `x1,x2`, 17 significant digits.
void write_csv(const Dataset2D& data, const std::filesystem::path& path);
/// Reads a CSV whose header starts with `x1,x2`; extra columns are ignored.
Matrix read_points_csv(const std::filesystem::path& path);

}  // namespace dpvae
