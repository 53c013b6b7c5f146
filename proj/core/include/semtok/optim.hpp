#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semtok {

/// Flat view of one parameter (or gradient) block.
struct ParamBlock {
  double* data;
  std::size_t size;
};

/// Global L2 norm over all blocks.
double global_norm(std::span<const ParamBlock> blocks);

/// Rescales the blocks so their global norm is at most `max_norm` and returns
/// the norm before clipping. `max_norm <= 0` disables clipping.
double clip_global_norm(std::span<const ParamBlock> grads, double max_norm);

/// Heavy-ball SGD: v <- momentum * v + g; p <- p - lr * v.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum);
  void step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads);

 private:
  double learning_rate_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace semtok
