#include "semtok/asr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semtok/ctc.hpp"
#include "semtok/error.hpp"
#include "semtok/parallel.hpp"

namespace semtok {
namespace {

std::size_t input_length(const AsrInput& input) {
  return std::visit([](const auto& x) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, TokenSequence>) return x.size();
    else return x.num_frames();
  }, input);
}

// Per-frame embeddings, T x embed_dim.
Matrix embed(const AsrModel& m, const AsrInput& input) {
  if (const auto* tokens = std::get_if<TokenSequence>(&input)) {
    require(m.discrete && tokens->vocab_size() == m.input_size, ErrorCode::kVocabMismatch,
            "token vocab " + std::to_string(tokens->vocab_size()) + " does not match the recognizer");
    Matrix e(static_cast<Eigen::Index>(tokens->size()), m.embed.cols());
    for (std::size_t t = 0; t < tokens->size(); ++t) e.row(static_cast<Eigen::Index>(t)) = m.embed.row((*tokens)[t]);
    return e;
  }
  const auto& frames = std::get<FrameMatrix>(input);
  require(!m.discrete && static_cast<std::int64_t>(frames.dim()) == m.input_size, ErrorCode::kDimensionMismatch,
          "feature dim does not match the recognizer");
  Matrix e = frames.values() * m.embed;
  e.rowwise() += m.b_embed;
  return e;
}

// Row t holds embeddings of frames t-context .. t+context (zeros past the edges).
Matrix window(const Matrix& e, int context) {
  const Eigen::Index T = e.rows();
  const Eigen::Index D = e.cols();
  const int width = 2 * context + 1;
  Matrix w = Matrix::Zero(T, D * width);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int o = -context; o <= context; ++o) {
      const Eigen::Index s = t + o;
      if (s >= 0 && s < T) w.block(t, (o + context) * D, 1, D) = e.row(s);
    }
  return w;
}

AsrModel zeros_like(const AsrModel& m) {
  AsrModel g = m;
  g.embed.setZero();
  g.b_embed.setZero();
  g.w_hidden.setZero();
  g.b_hidden.setZero();
  g.w_out.setZero();
  g.b_out.setZero();
  return g;
}

}  // namespace

AsrModel asr_init(bool discrete, std::int64_t input_size, int num_labels, const AsrConfig& config) {
  require(input_size >= 1 && num_labels >= 1 && config.embed_dim >= 1 && config.hidden >= 1 && config.context >= 0,
          ErrorCode::kInvalidArgument, "invalid recognizer shape");
  AsrModel m;
  m.discrete = discrete;
  m.input_size = input_size;
  m.context = config.context;
  m.num_labels = num_labels;
  const int width = 2 * config.context + 1;
  std::mt19937_64 rng(config.train.seed ^ 0xa5a5a5a5ull);
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = u(rng);
    return w;
  };
  if (discrete) {
    std::normal_distribution<double> n(0.0, 0.1);
    m.embed.resize(input_size, config.embed_dim);
    for (Eigen::Index i = 0; i < m.embed.rows(); ++i)
      for (Eigen::Index j = 0; j < m.embed.cols(); ++j) m.embed(i, j) = n(rng);
  } else {
    m.embed = glorot(input_size, config.embed_dim);
  }
  m.b_embed = RowVector::Zero(config.embed_dim);
  m.w_hidden = glorot(static_cast<Eigen::Index>(width) * config.embed_dim, config.hidden);
  m.b_hidden = RowVector::Zero(config.hidden);
  m.w_out = glorot(config.hidden, num_labels + 1);
  m.b_out = RowVector::Zero(num_labels + 1);
  return m;
}

Matrix asr_logits(const AsrModel& m, const AsrInput& input) {
  const Matrix x = window(embed(m, input), m.context);
  Matrix h = x * m.w_hidden;
  h.rowwise() += m.b_hidden;
  h = h.array().tanh();
  Matrix logits = h * m.w_out;
  logits.rowwise() += m.b_out;
  return logits;
}

AsrLossGrad asr_loss_and_grad(const AsrModel& m, const AsrSample& sample) {
  const Matrix e = embed(m, sample.input);
  const Matrix x = window(e, m.context);
  Matrix h = x * m.w_hidden;
  h.rowwise() += m.b_hidden;
  h = h.array().tanh();
  Matrix logits = h * m.w_out;
  logits.rowwise() += m.b_out;
  const CtcResult ctc = ctc_loss(logits, sample.labels);

  AsrLossGrad out{ctc.loss, zeros_like(m)};
  AsrModel& g = out.grads;
  g.w_out = h.transpose() * ctc.grad;
  g.b_out = ctc.grad.colwise().sum();
  const Matrix gh = ((ctc.grad * m.w_out.transpose()).array() * (1.0 - h.array().square())).matrix();
  g.w_hidden = x.transpose() * gh;
  g.b_hidden = gh.colwise().sum();
  const Matrix gx = gh * m.w_hidden.transpose();

  const Eigen::Index T = e.rows();
  const Eigen::Index D = e.cols();
  Matrix ge = Matrix::Zero(T, D);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int o = -m.context; o <= m.context; ++o) {
      const Eigen::Index s = t + o;
      if (s >= 0 && s < T) ge.row(s) += gx.block(t, (o + m.context) * D, 1, D);
    }
  if (const auto* tokens = std::get_if<TokenSequence>(&sample.input)) {
    for (Eigen::Index t = 0; t < T; ++t) g.embed.row((*tokens)[static_cast<std::size_t>(t)]) += ge.row(t);
  } else {
    g.embed = std::get<FrameMatrix>(sample.input).values().transpose() * ge;
    g.b_embed = ge.colwise().sum();
  }
  return out;
}

std::vector<ParamBlock> param_blocks(AsrModel& m) {
  auto block = [](auto& x) { return ParamBlock{x.data(), static_cast<std::size_t>(x.size())}; };
  return {block(m.embed), block(m.b_embed), block(m.w_hidden), block(m.b_hidden), block(m.w_out), block(m.b_out)};
}

AsrTrainResult asr_train(std::span<const AsrSample> samples, int num_labels, const AsrConfig& config) {
  config.train.validate();
  require(!samples.empty(), ErrorCode::kInsufficientData, "no training samples");
  const bool discrete = std::holds_alternative<TokenSequence>(samples.front().input);
  const std::int64_t input_size = discrete ? std::get<TokenSequence>(samples.front().input).vocab_size()
                                           : static_cast<std::int64_t>(std::get<FrameMatrix>(samples.front().input).dim());
  AsrTrainResult result{asr_init(discrete, input_size, num_labels, config), {}, 0};
  AsrModel& model = result.model;

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (input_length(samples[i].input) >= ctc_min_frames(samples[i].labels)) usable.push_back(i);
    else ++result.skipped;
  }
  require(!usable.empty(), ErrorCode::kInfeasibleAlignment, "no sample is long enough for its transcript");

  const TrainConfig& tc = config.train;
  SgdMomentum optimizer(tc.learning_rate, tc.momentum);
  std::mt19937_64 shuffle_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    int batch = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size), ++batch) {
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(tc.batch_size));
      std::vector<AsrLossGrad> parts(count);
      parallel_for(count, tc.threads, [&](std::size_t i) { parts[i] = asr_loss_and_grad(model, samples[order[start + i]]); });
      AsrModel total = zeros_like(model);
      auto total_blocks = param_blocks(total);
      double loss = 0.0;
      for (auto& p : parts) {
        loss += p.loss;
        auto pb = param_blocks(p.grads);
        for (std::size_t b = 0; b < pb.size(); ++b)
          for (std::size_t i = 0; i < pb[b].size; ++i) total_blocks[b].data[i] += pb[b].data[i];
      }
      const double scale = 1.0 / static_cast<double>(count);
      for (auto& b : total_blocks)
        for (std::size_t i = 0; i < b.size; ++i) b.data[i] *= scale;
      require(std::isfinite(loss), ErrorCode::kNumericFailure, "non-finite recognizer loss");
      const double norm = clip_global_norm(total_blocks, tc.grad_clip);
      optimizer.step(param_blocks(model), total_blocks);
      result.trace.push_back({epoch, batch, loss * scale, norm});
    }
  }
  return result;
}

LabelSequence asr_decode(const AsrModel& model, const AsrInput& input) {
  if (input_length(input) == 0) return LabelSequence({}, model.num_labels);
  return ctc_greedy_decode(asr_logits(model, input), model.num_labels);
}

}  // namespace semtok
