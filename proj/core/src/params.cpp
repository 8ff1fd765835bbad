#include "dpvae/params.hpp"

#include "dpvae/errors.hpp"

namespace dpvae {

ParamId ParamStore::add(std::string name, Matrix init) {
  if (find(name)) throw ArgumentError("duplicate parameter name: " + name);
  Matrix grad = Matrix::Zero(init.rows(), init.cols());
  entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
  return ParamId{entries_.size() - 1};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

std::size_t ParamStore::total_size() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::pair<std::size_t, Index> ParamStore::locate(std::size_t flat) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto n = static_cast<std::size_t>(entries_[i].value.size());
    if (flat < n) return {i, static_cast<Index>(flat)};
    flat -= n;
  }
  throw ArgumentError("flat parameter index out of range");
}

double ParamStore::flat_value(std::size_t i) const {
  auto [e, k] = locate(i);
  return entries_[e].value.data()[k];
}

void ParamStore::set_flat_value(std::size_t i, double v) {
  auto [e, k] = locate(i);
  entries_[e].value.data()[k] = v;
}

double ParamStore::flat_grad(std::size_t i) const {
  auto [e, k] = locate(i);
  return entries_[e].grad.data()[k];
}

}  // namespace dpvae
