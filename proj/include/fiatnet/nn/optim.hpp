#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fiatnet/nn/tensor.hpp"

namespace fiatnet::nn {

/// Named trainable leaves in a fixed order (the order defines serialization).
using ParamList = std::vector<std::pair<std::string, Var>>;

enum class OptimizerKind { kSgd, kMomentum, kAdam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Polynomial decay lr0 * (1 - t / total)^power, zero at and after `total`.
double poly_lr(double lr0, long t, long total, double power = 0.9);

/// Applies one update from the accumulated leaf gradients, then clears them.
class Optimizer {
 public:
  Optimizer(ParamList params, OptimizerConfig config);

  void step(double lr);
  void zero_grad();
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

/// Sum of squares of every parameter value (used for regularizer reporting).
double squared_norm(const ParamList& params);

}  // namespace fiatnet::nn
