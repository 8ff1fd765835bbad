#include "dpvae/optimizer.hpp"

#include <cmath>

#include "dpvae/errors.hpp"

namespace dpvae {

Adam::Adam(const ParamStore& params, AdamOptions options) : options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ArgumentError("Adam: learning rate must be positive");
  for (const auto& e : params.entries()) {
    m_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  }
}

void Adam::step(ParamStore& params) {
  if (params.size() != m_.size()) throw ArgumentError("Adam: parameter store changed shape");
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    m_[i] = b1 * m_[i] + (1.0 - b1) * e.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * e.grad.cwiseProduct(e.grad);
    e.value.array() -= options_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
}

}  // namespace dpvae
