#pragma once

#include <string>
#include <vector>

#include "dpvae/autodiff.hpp"
#include "dpvae/params.hpp"
#include "dpvae/rng.hpp"

namespace dpvae {

enum class Activation { linear, relu, leaky_relu, tanh };

/// Negative slope used by every leaky-ReLU in the library.
inline constexpr double kLeakySlope = 0.2;

enum class Init {
  uniform_fan_sum,  ///< U[-a, a], a = sqrt(6 / (in + out)); zero bias
  zeros,
  identity,  ///< square layers only: W = I, b = 0
};

/// y = act(x W^T + b) with W stored out x in and b stored 1 x out.
struct DenseLayer {
  ParamId weight;
  ParamId bias;
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::linear;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Rows of `input` are independent examples. Throws ShapeError when the
  /// width does not match the first layer.
  Var forward(Tape& tape, const ParamStore& params, Var input) const;

  /// Forward pass on a throwaway tape.
  Matrix evaluate(const ParamStore& params, const Matrix& input) const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  Index in_dim() const { return layers_.front().in; }
  Index out_dim() const { return layers_.back().out; }

 private:
  std::vector<DenseLayer> layers_;
};

Var apply_activation(Var x, Activation act);

/// Registers the parameters of a chain dims[0] -> dims[1] -> ... -> dims.back()
/// under `prefix` ("<prefix>.l<i>.w" / ".b"). Hidden layers use `hidden`, the
/// final layer `output`. Draws come from `rng` in layer order.
Mlp make_mlp(ParamStore& params, const std::string& prefix, const std::vector<Index>& dims, Activation hidden,
             Activation output, Init init, Rng& rng);

/// Fills a weight matrix per `init`; deterministic in the generator state.
Matrix init_weights(Index out, Index in, Init init, Rng& rng);

}  // namespace dpvae
