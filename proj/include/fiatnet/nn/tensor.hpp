#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fiatnet/common.hpp"

namespace fiatnet::nn {

/// Dense row-major tensor of doubles. Feature maps are [C][H][W].
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0) : shape(std::move(dims)) {
    data.assign(count(shape), fill);
  }

  static std::size_t count(std::span<const int> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;
};

std::string shape_string(std::span<const int> shape);

/// One vertex of the dynamic computation graph.
struct Node {
  Tensor value;
  Tensor grad;  ///< allocated on first accumulation
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  Tensor& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape, 0.0);
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

/// Leaf that never receives gradients.
Var constant(Tensor value);
/// Leaf whose gradient is accumulated by backward().
Var leaf(Tensor value);

/// Reverse-mode sweep from a scalar root; gradients accumulate into every
/// reachable node that requires them (leaf gradients persist across calls).
void backward(const Var& root, double seed = 1.0);

}  // namespace fiatnet::nn
