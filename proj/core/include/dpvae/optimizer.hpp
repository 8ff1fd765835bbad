#pragma once

#include <vector>

#include "dpvae/params.hpp"

namespace dpvae {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment descent over every entry of a ParamStore.
class Adam {
 public:
  Adam(const ParamStore& params, AdamOptions options);

  /// Applies one update from the store's gradient accumulators.
  void step(ParamStore& params);

  long steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace dpvae
