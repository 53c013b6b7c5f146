#include "semtok/optim.hpp"

#include <cmath>

#include "semtok/error.hpp"

namespace semtok {

double global_norm(std::span<const ParamBlock> blocks) {
  double sq = 0.0;
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.size; ++i) sq += b.data[i] * b.data[i];
  return std::sqrt(sq);
}

double clip_global_norm(std::span<const ParamBlock> grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& b : grads)
      for (std::size_t i = 0; i < b.size; ++i) b.data[i] *= scale;
  }
  return norm;
}

SgdMomentum::SgdMomentum(double learning_rate, double momentum)
    : learning_rate_(learning_rate), momentum_(momentum) {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorCode::kInvalidArgument,
          "learning rate must be finite and >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument, "momentum must be in [0, 1)");
}

void SgdMomentum::step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads) {
  require(params.size() == grads.size(), ErrorCode::kInvalidArgument, "param/grad block count mismatch");
  if (velocity_.empty()) {
    velocity_.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) velocity_[b].assign(params[b].size, 0.0);
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size == grads[b].size && velocity_[b].size() == grads[b].size,
            ErrorCode::kDimensionMismatch, "param/grad block size mismatch");
    for (std::size_t i = 0; i < params[b].size; ++i) {
      velocity_[b][i] = momentum_ * velocity_[b][i] + grads[b].data[i];
      params[b].data[i] -= learning_rate_ * velocity_[b][i];
    }
  }
}

}  // namespace semtok
