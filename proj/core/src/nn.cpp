#include "dpvae/nn.hpp"

#include <cmath>

#include "dpvae/errors.hpp"

namespace dpvae {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ArgumentError("Mlp needs at least one layer");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in != layers_[i - 1].out) throw ShapeError("Mlp: adjacent layer dimensions do not chain");
  }
}

Var apply_activation(Var x, Activation act) {
  switch (act) {
    case Activation::linear:
      return x;
    case Activation::relu:
      return relu(x);
    case Activation::leaky_relu:
      return leaky_relu(x, kLeakySlope);
    case Activation::tanh:
      return tanh(x);
  }
  return x;
}

Var Mlp::forward(Tape& tape, const ParamStore& params, Var input) const {
  if (input.cols() != in_dim()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(input.cols()) + ", expected " +
                     std::to_string(in_dim()));
  }
  Var h = input;
  for (const auto& layer : layers_) {
    Var w = tape.param(params, layer.weight);
    Var b = tape.param(params, layer.bias);
    h = apply_activation(matmul_nt(h, w) + b, layer.activation);
  }
  return h;
}

Matrix Mlp::evaluate(const ParamStore& params, const Matrix& input) const {
  Tape tape;
  return forward(tape, params, tape.constant(input)).value();
}

Matrix init_weights(Index out, Index in, Init init, Rng& rng) {
  if (out <= 0 || in <= 0) throw ArgumentError("init_weights: dimensions must be positive");
  switch (init) {
    case Init::zeros:
      return Matrix::Zero(out, in);
    case Init::identity:
      if (out != in) throw ShapeError("identity init needs a square layer");
      return Matrix::Identity(out, in);
    case Init::uniform_fan_sum:
      break;
  }
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix w(out, in);
  for (Index r = 0; r < out; ++r) {
    for (Index c = 0; c < in; ++c) w(r, c) = dist(rng);
  }
  return w;
}

Mlp make_mlp(ParamStore& params, const std::string& prefix, const std::vector<Index>& dims, Activation hidden,
             Activation output, Init init, Rng& rng) {
  if (dims.size() < 2) throw ArgumentError("make_mlp: need at least input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string stem = prefix + ".l" + std::to_string(i);
    DenseLayer layer;
    layer.in = dims[i];
    layer.out = dims[i + 1];
    layer.activation = (i + 2 == dims.size()) ? output : hidden;
    layer.weight = params.add(stem + ".w", init_weights(layer.out, layer.in, init, rng));
    layer.bias = params.add(stem + ".b", Matrix::Zero(1, layer.out));
    layers.push_back(layer);
  }
  return Mlp(std::move(layers));
}

}  // namespace dpvae
