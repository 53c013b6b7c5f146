#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semtok/ctc.hpp"
#include "semtok/fsq.hpp"
#include "semtok/optim.hpp"
#include "semtok/types.hpp"

namespace semtok {

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables clipping
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// One row of the training loss trace.
struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path);

/// Activations recorded by the forward pass, consumed by the backward pass.
struct FsqTape {
  Matrix input;       // T x dim_in
  Matrix pre_quant;   // T x d_low, h * w_down + b_down
  Matrix codes;       // T x d_low, integer codes stored as reals
  Matrix normalized;  // T x d_low, codes mapped into [-1, 1]
  Matrix up;          // T x dim_up
  Matrix logits;      // T x (num_labels + 1)
};

FsqTape fsq_forward(const FrameMatrix& features, const FsqModel& model);

struct SteGradients {
  Matrix pre_quant;  // d loss / d (h * w_down + b_down)
  Matrix w_down;
  RowVector b_down;
};

/// Straight-through backward through the quantizer: rounding is treated as
/// the identity, the tanh bounding derivative ((L-1)/2)(1 - tanh^2 z) is kept.
/// `grad_codes` is the gradient with respect to the (integer) codes.
SteGradients ste_backward(const FsqTape& tape, const Matrix& grad_codes, const FsqModel& model);

/// Gradient container with the same block shapes as the model.
using FsqGradients = FsqModel;

struct FsqLossGrad {
  double loss = 0.0;
  FsqGradients grads;
};

/// CTC loss of one utterance through the full tokenizer network and its
/// gradient with respect to every parameter (STE below the quantizer).
FsqLossGrad fsq_loss_and_grad(const FrameMatrix& features, const LabelSequence& target,
                              const FsqModel& model);

std::vector<ParamBlock> param_blocks(FsqModel& model);

struct FsqInit {
  FsqLevels levels;
  int dim_in = 0;
  int dim_up = 0;
  int num_labels = 0;
};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights and zero biases.
FsqModel fsq_init(const FsqInit& shape, std::uint64_t seed);

struct FsqTrainResult {
  FsqModel model;
  std::vector<LossRecord> trace;
  std::vector<double> epoch_mean_loss;  // mean of batch losses within each epoch
};

/// Trains the down-projection, up-projection and ASR head end-to-end with CTC.
/// Throws kInfeasibleAlignment / kNumericFailure naming the offending utterance.
FsqTrainResult fsq_train(std::span<const Utterance> corpus, const FsqInit& shape, const TrainConfig& config);

/// Token error rate (percent) of greedy CTC decoding through the tokenizer's own ASR head.
double fsq_token_error_rate(std::span<const Utterance> corpus, const FsqModel& model);

}  // namespace semtok
