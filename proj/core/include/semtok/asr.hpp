#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "semtok/train.hpp"
#include "semtok/types.hpp"

namespace semtok {

/// Input of the downstream recognizer: discrete tokens or continuous frames.
using AsrInput = std::variant<TokenSequence, FrameMatrix>;

struct AsrSample {
  AsrInput input;
  LabelSequence labels;
};

struct AsrConfig {
  int embed_dim = 16;
  int context = 4;   // frames of context on each side
  int hidden = 64;
  TrainConfig train{0.05, 0.9, 5.0, 25, 8, 0, 1};
};

/// Small CTC recognizer used to score token streams: per-frame embedding
/// (table lookup for tokens, affine map for continuous features), a window
/// of +-context embeddings, one tanh hidden layer and a softmax output.
struct AsrModel {
  bool discrete = true;
  std::int64_t input_size = 0;  // vocab size or feature dim
  int context = 0;
  int num_labels = 0;

  Matrix embed;       // input_size x embed_dim
  RowVector b_embed;  // embed_dim, used for continuous input only
  Matrix w_hidden;    // (2*context+1)*embed_dim x hidden
  RowVector b_hidden;
  Matrix w_out;       // hidden x (num_labels + 1)
  RowVector b_out;
};

AsrModel asr_init(bool discrete, std::int64_t input_size, int num_labels, const AsrConfig& config);

Matrix asr_logits(const AsrModel& model, const AsrInput& input);

struct AsrLossGrad {
  double loss = 0.0;
  AsrModel grads;  // same shapes as the model
};
AsrLossGrad asr_loss_and_grad(const AsrModel& model, const AsrSample& sample);

std::vector<ParamBlock> param_blocks(AsrModel& model);

struct AsrTrainResult {
  AsrModel model;
  std::vector<LossRecord> trace;
  std::size_t skipped = 0;  // samples whose transcript cannot be aligned to their length
};

/// SGD-momentum training with CTC, mean loss over the utterances of a batch.
/// Samples too short for their transcript are skipped and counted.
AsrTrainResult asr_train(std::span<const AsrSample> samples, int num_labels, const AsrConfig& config);

LabelSequence asr_decode(const AsrModel& model, const AsrInput& input);

}  // namespace semtok
