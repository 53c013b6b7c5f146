#include "semtok/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "semtok/error.hpp"
#include "semtok/metrics.hpp"
#include "semtok/parallel.hpp"

namespace semtok {

void TrainConfig::validate() const {
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorCode::kInvalidArgument,
          "learning_rate must be finite and >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument, "momentum must be in [0, 1)");
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
}

void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create '" + path.string() + "'");
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "epoch,batch,loss,grad_norm\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.grad_norm << '\n';
}

FsqTape fsq_forward(const FrameMatrix& features, const FsqModel& model) {
  FsqTape tape;
  tape.input = features.values();
  tape.pre_quant = fsq_project_down(features, model);
  const auto T = tape.pre_quant.rows();
  const auto d_low = static_cast<Eigen::Index>(model.levels.d_low());
  tape.codes.resize(T, d_low);
  tape.normalized.resize(T, d_low);
  for (Eigen::Index n = 0; n < T; ++n)
    for (Eigen::Index i = 0; i < d_low; ++i) {
      const int c = fsq_round_channel(tape.pre_quant(n, i), model.levels[i]);
      tape.codes(n, i) = c;
      tape.normalized(n, i) = fsq_normalize_code(c, model.levels[i]);
    }
  tape.up = tape.normalized * model.w_up;
  tape.up.rowwise() += model.b_up;
  tape.logits = tape.up * model.w_cls;
  tape.logits.rowwise() += model.b_cls;
  return tape;
}

SteGradients ste_backward(const FsqTape& tape, const Matrix& grad_codes, const FsqModel& model) {
  const auto d_low = static_cast<Eigen::Index>(model.levels.d_low());
  require(grad_codes.rows() == tape.pre_quant.rows() && grad_codes.cols() == d_low &&
              tape.pre_quant.cols() == d_low && tape.input.rows() == tape.pre_quant.rows() &&
              tape.input.cols() == model.dim_in,
          ErrorCode::kDimensionMismatch, "tape does not match the model or upstream gradient");
  SteGradients g;
  g.pre_quant.resize(grad_codes.rows(), d_low);
  for (Eigen::Index n = 0; n < grad_codes.rows(); ++n)
    for (Eigen::Index i = 0; i < d_low; ++i) {
      const double th = std::tanh(tape.pre_quant(n, i));
      const double half_range = 0.5 * static_cast<double>(model.levels[i] - 1);
      g.pre_quant(n, i) = grad_codes(n, i) * half_range * (1.0 - th * th);
    }
  g.w_down = tape.input.transpose() * g.pre_quant;
  g.b_down = g.pre_quant.colwise().sum();
  return g;
}

FsqLossGrad fsq_loss_and_grad(const FrameMatrix& features, const LabelSequence& target, const FsqModel& model) {
  const FsqTape tape = fsq_forward(features, model);
  const CtcResult ctc = ctc_loss(tape.logits, target);
  FsqLossGrad out{ctc.loss, FsqModel::zeros(model.levels, model.dim_in, model.dim_up, model.num_labels)};
  FsqGradients& g = out.grads;
  g.w_cls = tape.up.transpose() * ctc.grad;
  g.b_cls = ctc.grad.colwise().sum();
  const Matrix grad_up = ctc.grad * model.w_cls.transpose();
  g.w_up = tape.normalized.transpose() * grad_up;
  g.b_up = grad_up.colwise().sum();
  Matrix grad_codes = grad_up * model.w_up.transpose();  // w.r.t. normalized codes
  for (Eigen::Index i = 0; i < grad_codes.cols(); ++i)
    grad_codes.col(i) *= 2.0 / static_cast<double>(model.levels[i] - 1);
  SteGradients ste = ste_backward(tape, grad_codes, model);
  g.w_down = std::move(ste.w_down);
  g.b_down = std::move(ste.b_down);
  return out;
}

std::vector<ParamBlock> param_blocks(FsqModel& m) {
  auto block = [](auto& x) { return ParamBlock{x.data(), static_cast<std::size_t>(x.size())}; };
  return {block(m.w_down), block(m.b_down), block(m.w_up), block(m.b_up), block(m.w_cls), block(m.b_cls)};
}

FsqModel fsq_init(const FsqInit& shape, std::uint64_t seed) {
  FsqModel m = FsqModel::zeros(shape.levels, shape.dim_in, shape.dim_up, shape.num_labels);
  std::mt19937_64 rng(seed);
  auto fill = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
  };
  fill(m.w_down);
  fill(m.w_up);
  fill(m.w_cls);
  return m;
}

FsqTrainResult fsq_train(std::span<const Utterance> corpus, const FsqInit& shape, const TrainConfig& config) {
  config.validate();
  require(!corpus.empty(), ErrorCode::kInsufficientData, "empty training corpus");
  for (const auto& u : corpus) {
    require(static_cast<int>(u.features.dim()) == shape.dim_in, ErrorCode::kDimensionMismatch,
            "utterance '" + u.id + "' has feature dim " + std::to_string(u.features.dim()));
    require(u.features.num_frames() >= ctc_min_frames(u.labels), ErrorCode::kInfeasibleAlignment,
            "utterance '" + u.id + "' is too short for its transcript");
    for (int l : u.labels.labels())
      require(l <= shape.num_labels, ErrorCode::kOutOfRange, "utterance '" + u.id + "' has label beyond num_labels");
  }

  FsqTrainResult result{fsq_init(shape, config.seed), {}, {}};
  FsqModel& model = result.model;
  SgdMomentum optimizer(config.learning_rate, config.momentum);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(corpus.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
      std::vector<FsqLossGrad> parts(count);
      parallel_for(count, config.threads, [&](std::size_t i) {
        const Utterance& u = corpus[order[start + i]];
        parts[i] = fsq_loss_and_grad(u.features, u.labels, model);
        require(std::isfinite(parts[i].loss) && parts[i].grads.w_down.allFinite(), ErrorCode::kNumericFailure,
                "non-finite loss on utterance '" + u.id + "'");
      });
      FsqGradients total = FsqModel::zeros(model.levels, model.dim_in, model.dim_up, model.num_labels);
      double loss = 0.0;
      for (auto& p : parts) {
        loss += p.loss;
        total.w_down += p.grads.w_down;
        total.b_down += p.grads.b_down;
        total.w_up += p.grads.w_up;
        total.b_up += p.grads.b_up;
        total.w_cls += p.grads.w_cls;
        total.b_cls += p.grads.b_cls;
      }
      const double scale = 1.0 / static_cast<double>(count);
      loss *= scale;
      auto grads = param_blocks(total);
      for (auto& b : grads)
        for (std::size_t i = 0; i < b.size; ++i) b.data[i] *= scale;
      const double norm = clip_global_norm(grads, config.grad_clip);
      optimizer.step(param_blocks(model), grads);
      result.trace.push_back({epoch, batches, loss, norm});
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_mean_loss.push_back(epoch_loss / batches);
  }
  model.validate();
  return result;
}

double fsq_token_error_rate(std::span<const Utterance> corpus, const FsqModel& model) {
  std::vector<std::vector<std::string>> hyp, ref;
  for (const auto& u : corpus) {
    const LabelSequence decoded = ctc_greedy_decode(fsq_asr_logits(u.features, model), model.num_labels);
    hyp.push_back(symbols_from_labels(decoded));
    ref.push_back(symbols_from_labels(u.labels));
  }
  return word_error_rate(hyp, ref).wer_percent;
}

}  // namespace semtok
