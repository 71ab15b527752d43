#include "fiatnet/nn/optim.hpp"

#include <cmath>

namespace fiatnet::nn {

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kConfig, "unknown optimizer '" + std::string(name) + "' (expected sgd, momentum or adam)");
}

double poly_lr(double lr0, long t, long total, double power) {
  if (total <= 0 || t >= total) return 0.0;
  return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), power);
}

Optimizer::Optimizer(ParamList params, OptimizerConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& [name, p] : params_) {
    if (config_.kind != OptimizerKind::kSgd) m_.emplace_back(p->value.size(), 0.0);
    if (config_.kind == OptimizerKind::kAdam) v_.emplace_back(p->value.size(), 0.0);
  }
}

void Optimizer::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Node& p = *params_[k].second;
    if (p.grad.size() != p.value.size()) continue;
    std::vector<double>& w = p.value.data;
    const std::vector<double>& g = p.grad.data;
    switch (config_.kind) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        break;
      case OptimizerKind::kMomentum: {
        std::vector<double>& m = m_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.momentum * m[i] + g[i];
          w[i] -= lr * m[i];
        }
        break;
      }
      case OptimizerKind::kAdam: {
        std::vector<double>& m = m_[k];
        std::vector<double>& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
          w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
        }
        break;
      }
    }
  }
  zero_grad();
}

void Optimizer::zero_grad() {
  for (auto& [name, p] : params_) p->grad = Tensor();
}

double squared_norm(const ParamList& params) {
  double s = 0.0;
  for (const auto& [name, p] : params) {
    for (double v : p->value.data) s += v * v;
  }
  return s;
}

}  // namespace fiatnet::nn
