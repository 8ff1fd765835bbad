#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dpvae {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Flat, named, insertion-ordered collection of trainable arrays, each with a
/// gradient accumulator of the same shape.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
  };

  /// Names must be unique.
  ParamId add(std::string name, Matrix init);

  const Matrix& value(ParamId id) const { return entries_.at(id.index).value; }
  Matrix& value(ParamId id) { return entries_.at(id.index).value; }
  const Matrix& grad(ParamId id) const { return entries_.at(id.index).grad; }
  Matrix& grad(ParamId id) { return entries_.at(id.index).grad; }

  std::optional<ParamId> find(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Entry& entry(std::size_t i) { return entries_.at(i); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void zero_grad();

  // Flat view over all scalars in insertion order (column-major per entry).
  std::size_t total_size() const noexcept;
  double flat_value(std::size_t i) const;
  void set_flat_value(std::size_t i, double v);
  double flat_grad(std::size_t i) const;

 private:
  std::pair<std::size_t, Index> locate(std::size_t flat) const;

  std::vector<Entry> entries_;
};

}  // namespace dpvae
