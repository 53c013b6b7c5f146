#pragma once

#include <span>

#include "semtok/types.hpp"

namespace semtok {

/// Per-frame unnormalized class scores, T x C; column 0 is the CTC blank.
using LogitMatrix = Matrix;

struct CtcResult {
  double loss = 0.0;  // -log P(target | softmax(logits))
  Matrix grad;        // d loss / d logits, T x C
};

/// Minimum number of frames any alignment of `target` needs: one per label
/// plus one blank between each pair of equal adjacent labels.
std::size_t ctc_min_frames(const LabelSequence& target);

/// Forward-backward CTC in log space. Throws ErrorCode::kInfeasibleAlignment
/// when the target cannot be aligned to T frames and kNumericFailure if the
/// result is not finite.
CtcResult ctc_loss(const LogitMatrix& logits, const LabelSequence& target);

/// Loss only (forward recursion), used where the gradient is not needed.
double ctc_neg_log_likelihood(const LogitMatrix& logits, const LabelSequence& target);

/// Mean loss over utterances; gradients are scaled by 1/batch accordingly.
struct CtcBatchResult {
  double loss = 0.0;
  std::vector<Matrix> grads;
};
CtcBatchResult ctc_batch_loss(std::span<const LogitMatrix> logits, std::span<const LabelSequence> targets);

/// Per-frame argmax (lowest class on ties), collapse repeats, drop blanks.
/// `num_labels` is the label inventory of the result (defaults to C - 1).
LabelSequence ctc_greedy_decode(const LogitMatrix& logits, int num_labels = 0);

/// Row-wise log-softmax.
Matrix log_softmax(const Matrix& logits);

}  // namespace semtok
