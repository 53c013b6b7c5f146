#include <benchmark/benchmark.h>

#include <random>

#include "semtok/ctc.hpp"
#include "semtok/fsq.hpp"
#include "semtok/kmeans.hpp"
#include "semtok/postproc.hpp"
#include "semtok/train.hpp"

using namespace semtok;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TokenSequence random_tokens(std::size_t n, Token vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Token> tok(0, vocab - 1);
  std::vector<Token> t(n);
  for (auto& v : t) v = tok(rng);
  return TokenSequence(std::move(t), vocab);
}

}  // namespace

static void BM_KmeansAssign(benchmark::State& state) {
  const Codebook cb(random_matrix(state.range(0), 16, 1));
  const FrameMatrix frames(random_matrix(1000, 16, 2), 50.0);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_assign(frames, cb));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_KmeansAssign)->Arg(240)->Arg(2000);

static void BM_FsqEncode(benchmark::State& state) {
  FsqModel m = fsq_init({default_fsq_levels(), 16, 16, 12}, 3);
  const FrameMatrix frames(random_matrix(1000, 16, 4), 50.0);
  for (auto _ : state) benchmark::DoNotOptimize(fsq_encode(frames, m));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_FsqEncode);

static void BM_CtcLoss(benchmark::State& state) {
  const auto t = state.range(0);
  const Matrix logits = random_matrix(t, 13, 5);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < t / 5; ++i) y.push_back(1 + static_cast<int>(i % 12));
  const LabelSequence target(y, 12);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(logits, target));
}
BENCHMARK(BM_CtcLoss)->Arg(100)->Arg(1000);

static void BM_BpeApply(benchmark::State& state) {
  std::vector<TokenSequence> corpus;
  for (int u = 0; u < 50; ++u) corpus.push_back(random_tokens(500, 16, static_cast<std::uint64_t>(u)));
  const BpeModel model = bpe_train(corpus, 16 + state.range(0));
  const TokenSequence seq = random_tokens(5000, 16, 99);
  for (auto _ : state) benchmark::DoNotOptimize(bpe_apply(seq, model));
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_BpeApply)->Arg(50)->Arg(200);

BENCHMARK_MAIN();
