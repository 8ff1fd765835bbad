#include "dpvae/datagen.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "dpvae/errors.hpp"
#include "dpvae/format.hpp"
#include "dpvae/rng.hpp"

namespace dpvae {

Dataset2D two_moons(Index n, double noise, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("two_moons: n must be >= 2");
  if (!(noise >= 0.0)) throw ArgumentError("two_moons: noise must be >= 0");
  Rng rng = substream(seed, "two-moons");
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, 1.0);
  Dataset2D d{"two_moons", seed, Matrix(n, 2)};
  const Index upper = n / 2;
  for (Index i = 0; i < n; ++i) {
    const double t = angle(rng);
    if (i < upper) {
      d.points(i, 0) = std::cos(t);
      d.points(i, 1) = std::sin(t);
    } else {
      d.points(i, 0) = 1.0 - std::cos(t);
      d.points(i, 1) = 0.5 - std::sin(t);
    }
    if (noise > 0.0) {
      d.points(i, 0) += noise * jitter(rng);
      d.points(i, 1) += noise * jitter(rng);
    }
  }
  return d;
}

Eigen::Vector2d grid_center(Index b, Index k, double spacing) {
  const double half = 0.5 * static_cast<double>(k - 1);
  const Index row = b / k;
  const Index col = b % k;
  return {(static_cast<double>(col) - half) * spacing, (static_cast<double>(row) - half) * spacing};
}

Dataset2D gaussian_grid(Index n, Index k, double spacing, double noise, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("gaussian_grid: k must be >= 1");
  if (n < 1) throw ArgumentError("gaussian_grid: n must be >= 1");
  Rng rng = substream(seed, "gaussian-grid");
  std::normal_distribution<double> jitter(0.0, 1.0);
  Dataset2D d{"gaussian_grid", seed, Matrix(n, 2)};
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d c = grid_center(i % (k * k), k, spacing);
    d.points(i, 0) = c(0) + noise * jitter(rng);
    d.points(i, 1) = c(1) + noise * jitter(rng);
  }
  return d;
}

namespace {

Dataset2D generate(const DatasetSpec& spec, Index n, std::uint64_t seed) {
  if (spec.name == "two_moons") return two_moons(n, spec.noise, seed);
  if (spec.name == "gaussian_grid") return gaussian_grid(n, spec.grid_k, spec.grid_spacing, spec.noise, seed);
  throw ArgumentError("unknown dataset: " + spec.name);
}

}  // namespace

DataSplit make_split(const DatasetSpec& spec, std::uint64_t seed) {
  const std::uint64_t train_seed = substream(seed, "data-train")();
  const std::uint64_t heldout_seed = substream(seed, "data-heldout")();
  return DataSplit{generate(spec, spec.n_train, train_seed), generate(spec, spec.n_heldout, heldout_seed)};
}

void write_csv(const Dataset2D& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path.string());
  out << "x1,x2\n";
  for (Index i = 0; i < data.size(); ++i) out << format_double(data.points(i, 0)) << ',' << format_double(data.points(i, 1)) << '\n';
}

Matrix read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("x1,x2", 0) != 0) throw LoadError("expected header x1,x2 in " + path.string());
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a;
    std::string b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw LoadError("malformed row: " + line);
    xs.push_back(parse_double(a));
    xs.push_back(parse_double(b));
  }
  Matrix m(static_cast<Index>(xs.size() / 2), 2);
  for (Index i = 0; i < m.rows(); ++i) {
    m(i, 0) = xs[static_cast<std::size_t>(2 * i)];
    m(i, 1) = xs[static_cast<std::size_t>(2 * i + 1)];
  }
  return m;
}

}  // namespace dpvae
