#include "semtok/ctc.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "semtok/error.hpp"

namespace semtok {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Blank-interleaved target: blank, y0, blank, y1, ..., blank.
std::vector<int> extend(const LabelSequence& target) {
  std::vector<int> ext(2 * target.size() + 1, 0);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

void check_inputs(const LogitMatrix& logits, const LabelSequence& target) {
  require(logits.cols() >= 2, ErrorCode::kInvalidArgument, "CTC needs at least 2 classes");
  require(logits.allFinite(), ErrorCode::kNonFinite, "logits contain NaN/Inf");
  for (int l : target.labels())
    require(l >= 1 && l < logits.cols(), ErrorCode::kOutOfRange,
            "label " + std::to_string(l) + " has no logit column");
  const std::size_t need = ctc_min_frames(target);
  require(static_cast<std::size_t>(logits.rows()) >= need, ErrorCode::kInfeasibleAlignment,
          "target needs " + std::to_string(need) + " frames, got " + std::to_string(logits.rows()));
}

bool can_skip(const std::vector<int>& ext, std::size_t s) {
  return s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2];
}

Matrix forward(const Matrix& logp, const std::vector<int>& ext) {
  const Eigen::Index T = logp.rows();
  const auto S = static_cast<Eigen::Index>(ext.size());
  Matrix alpha = Matrix::Constant(T, S, kNegInf);
  alpha(0, 0) = logp(0, ext[0]);
  if (S > 1) alpha(0, 1) = logp(0, ext[1]);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(ext, static_cast<std::size_t>(s))) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + logp(t, ext[s]);
    }
  }
  return alpha;
}

double total_log_prob(const Matrix& alpha) {
  const Eigen::Index T = alpha.rows();
  const Eigen::Index S = alpha.cols();
  double lp = alpha(T - 1, S - 1);
  if (S > 1) lp = log_add(lp, alpha(T - 1, S - 2));
  return lp;
}

}  // namespace

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

std::size_t ctc_min_frames(const LabelSequence& target) {
  std::size_t need = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;
  return need;
}

double ctc_neg_log_likelihood(const LogitMatrix& logits, const LabelSequence& target) {
  check_inputs(logits, target);
  if (logits.rows() == 0) return 0.0;
  const double loss = -total_log_prob(forward(log_softmax(logits), extend(target)));
  require(std::isfinite(loss), ErrorCode::kNumericFailure, "CTC loss is not finite");
  return loss;
}

CtcResult ctc_loss(const LogitMatrix& logits, const LabelSequence& target) {
  check_inputs(logits, target);
  const Eigen::Index T = logits.rows();
  const Eigen::Index C = logits.cols();
  CtcResult result{0.0, Matrix::Zero(T, C)};
  if (T == 0) return result;

  const Matrix logp = log_softmax(logits);
  const std::vector<int> ext = extend(target);
  const auto S = static_cast<Eigen::Index>(ext.size());
  const Matrix alpha = forward(logp, ext);
  const double log_p = total_log_prob(alpha);
  require(std::isfinite(log_p), ErrorCode::kNumericFailure, "CTC path probability underflowed");

  // beta(t, s): log probability of emitting frames t..T-1 starting in state s at t.
  Matrix beta = Matrix::Constant(T, S, kNegInf);
  beta(T - 1, S - 1) = logp(T - 1, ext[S - 1]);
  if (S > 1) beta(T - 1, S - 2) = logp(T - 1, ext[S - 2]);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < S && can_skip(ext, static_cast<std::size_t>(s + 2))) b = log_add(b, beta(t + 1, s + 2));
      beta(t, s) = b == kNegInf ? kNegInf : b + logp(t, ext[s]);
    }
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    std::vector<double> occupancy(static_cast<std::size_t>(C), kNegInf);
    for (Eigen::Index s = 0; s < S; ++s) {
      const double v = alpha(t, s) + beta(t, s) - logp(t, ext[s]);
      occupancy[ext[s]] = log_add(occupancy[ext[s]], v);
    }
    for (Eigen::Index k = 0; k < C; ++k) {
      const double post = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_p);
      result.grad(t, k) = std::exp(logp(t, k)) - post;
    }
  }
  result.loss = -log_p;
  require(result.grad.allFinite(), ErrorCode::kNumericFailure, "CTC gradient is not finite");
  return result;
}

CtcBatchResult ctc_batch_loss(std::span<const LogitMatrix> logits, std::span<const LabelSequence> targets) {
  require(logits.size() == targets.size(), ErrorCode::kInvalidArgument, "logits/targets count mismatch");
  require(!logits.empty(), ErrorCode::kInvalidArgument, "empty batch");
  CtcBatchResult out;
  const double scale = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    CtcResult r = ctc_loss(logits[i], targets[i]);
    out.loss += r.loss * scale;
    out.grads.push_back(r.grad * scale);
  }
  return out;
}

LabelSequence ctc_greedy_decode(const LogitMatrix& logits, int num_labels) {
  require(logits.cols() >= 2, ErrorCode::kInvalidArgument, "CTC needs at least 2 classes");
  if (num_labels <= 0) num_labels = static_cast<int>(logits.cols()) - 1;
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(t, k) > logits(t, best)) best = k;
    const int label = static_cast<int>(best);
    if (label != 0 && label != prev) out.push_back(label);
    prev = label;
  }
  return LabelSequence(std::move(out), num_labels);
}

}  // namespace semtok
