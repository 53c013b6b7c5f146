// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: semtok_acceptance [--spec compare.json] [--readme README.md] [--work-dir dir]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "semtok/ctc.hpp"
#include "semtok/error.hpp"
#include "semtok/experiment.hpp"
#include "semtok/fsq.hpp"
#include "semtok/kmeans.hpp"
#include "semtok/metrics.hpp"
#include "semtok/postproc.hpp"
#include "semtok/train.hpp"
#include "support/oracles.hpp"

using namespace semtok;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void run(const std::string& id, const std::string& title, double budget_sec, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_sec) {
      o.pass = false;
      o.detail += " (over the " + std::to_string(static_cast<int>(budget_sec)) + " s budget)";
    }
    line(id, title, o, secs);
  }

  void line(const std::string& id, const std::string& title, const Outcome& o, double secs) {
    all_pass_ = all_pass_ && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << title << "  [" << std::fixed
              << std::setprecision(2) << secs << " s]";
    if (!o.detail.empty()) std::cout << "  " << o.detail;
    std::cout << std::endl;
  }

  bool all_pass() const { return all_pass_; }

 private:
  bool all_pass_ = true;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Outcome bitrate_golden() {
  const double a = round1(token_bitrate(3000, 60.0, 2000).bits_per_second);
  const double b = round1(token_bitrate(3000, 60.0, 240).bits_per_second);
  const double c = continuous_bitrate(1024, 32, 50.0);
  const double d = continuous_bitrate(80, 32, 100.0);
  return {a == 548.3 && b == 395.3 && c == 1638400.0 && d == 256000.0,
          fmt(a, 5) + " " + fmt(b, 5) + " " + fmt(c, 8) + " " + fmt(d, 8)};
}

Outcome codebook_sizes() {
  bool ok = true;
  std::string detail;
  for (const auto& levels : {default_fsq_levels(), low_bitrate_fsq_levels()}) {
    const auto size = levels.codebook_size();
    detail += std::to_string(size) + " ";
    for (Token t = 0; t < static_cast<Token>(size); ++t) ok = ok && fsq_index(fsq_unindex(t, levels), levels) == t;
    // Every code maps to a distinct in-range token.
    std::vector<bool> hit(size, false);
    Code code(levels.d_low(), 0);
    for (std::uint64_t n = 0; n < size; ++n) {
      const Token t = fsq_index(code, levels);
      ok = ok && t >= 0 && static_cast<std::uint64_t>(t) < size && !hit[static_cast<std::size_t>(t)];
      hit[static_cast<std::size_t>(t)] = true;
      for (std::size_t i = 0; i < code.size() && ++code[i] == levels[i]; ++i) code[i] = 0;
    }
  }
  ok = ok && default_fsq_levels().codebook_size() == 2000 && low_bitrate_fsq_levels().codebook_size() == 240;
  return {ok, detail + "bijective"};
}

Outcome ctc_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> t_d(1, 6), c_d(2, 4);
  double loss_err = 0.0, grad_err = 0.0;
  const int cases = 250;
  for (int k = 0; k < cases; ++k) {
    const int t = t_d(rng), c = c_d(rng);
    const Matrix logits = random_matrix(rng, t, c, 2.0);
    std::vector<int> y;
    std::uniform_int_distribution<int> len_d(0, t), lab(1, c - 1);
    do {
      y.assign(static_cast<std::size_t>(len_d(rng)), 0);
      for (auto& v : y) v = lab(rng);
    } while (ctc_min_frames(LabelSequence(y, c - 1)) > static_cast<std::size_t>(t));
    const LabelSequence target(y, c - 1);
    const CtcResult r = ctc_loss(logits, target);
    loss_err = std::max(loss_err, oracle::relative_error(r.loss, oracle::ctc_nll_by_enumeration(logits, y)));
    std::vector<double> x(logits.data(), logits.data() + logits.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fd = oracle::central_difference(
          [&](const std::vector<double>& v) { return ctc_neg_log_likelihood(Eigen::Map<const Matrix>(v.data(), t, c), target); },
          x, i, 1e-5);
      grad_err = std::max(grad_err, oracle::relative_error(r.grad.data()[i], fd, 1e-4));
    }
  }
  return {loss_err <= 1e-10 && grad_err <= 1e-4, std::to_string(cases) + " cases, max loss rel err " + fmt(loss_err, 3) +
                                                      ", max grad rel err " + fmt(grad_err, 3)};
}

FsqModel random_fsq(std::mt19937_64& rng) {
  FsqModel m = FsqModel::zeros(FsqLevels({5, 4, 3}), 4, 6, 3);
  m.w_down = random_matrix(rng, 4, 3);
  m.b_down = random_matrix(rng, 1, 3, 0.3);
  m.w_up = random_matrix(rng, 3, 6);
  m.b_up = random_matrix(rng, 1, 6, 0.3);
  m.w_cls = random_matrix(rng, 6, 4);
  m.b_cls = random_matrix(rng, 1, 4, 0.3);
  return m;
}

// Loss of the network whose forward value is the rounded one while the
// down-projection acts through tanh, i.e. rounding is the identity for derivatives.
double surrogate_loss(const Matrix& x, const LabelSequence& y, const FsqModel& m, const FsqTape& base) {
  Matrix z = x * m.w_down;
  z.rowwise() += m.b_down;
  Matrix normalized = base.normalized;
  for (Eigen::Index n = 0; n < z.rows(); ++n)
    for (Eigen::Index i = 0; i < z.cols(); ++i) normalized(n, i) += std::tanh(z(n, i)) - std::tanh(base.pre_quant(n, i));
  Matrix up = normalized * m.w_up;
  up.rowwise() += m.b_up;
  Matrix logits = up * m.w_cls;
  logits.rowwise() += m.b_cls;
  return ctc_neg_log_likelihood(logits, y);
}

Outcome ste_correctness() {
  std::mt19937_64 rng(7);
  double ste_err = 0.0, post_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const FsqModel m = random_fsq(rng);
    const Matrix x = random_matrix(rng, 6, 4);
    const FrameMatrix f(x, 50.0);
    const LabelSequence y({1 + k % 3, 1 + (k + 1) % 3}, 3);
    FsqLossGrad lg = fsq_loss_and_grad(f, y, m);
    const FsqTape base = fsq_forward(f, m);
    FsqModel probe = m;
    auto params = param_blocks(probe);
    auto grads = param_blocks(lg.grads);
    for (std::size_t b = 0; b < params.size(); ++b)
      for (std::size_t i = 0; i < params[b].size; ++i) {
        const double orig = params[b].data[i];
        // Down-projection: surrogate; after the quantizer: the true network.
        const auto loss = [&] { return b < 2 ? surrogate_loss(x, y, probe, base) : fsq_loss_and_grad(f, y, probe).loss; };
        params[b].data[i] = orig + 1e-5;
        const double up = loss();
        params[b].data[i] = orig - 1e-5;
        const double down = loss();
        params[b].data[i] = orig;
        const double err = oracle::relative_error(grads[b].data[i], (up - down) / 2e-5, 1e-4);
        (b < 2 ? ste_err : post_err) = std::max(b < 2 ? ste_err : post_err, err);
      }
  }
  return {ste_err <= 1e-4 && post_err <= 1e-4,
          "surrogate rel err " + fmt(ste_err, 3) + ", post-quantizer rel err " + fmt(post_err, 3)};
}

Outcome kmeans_properties() {
  std::mt19937_64 rng(99);
  bool monotone = true;
  int traces = 0;
  const auto check_trace = [&](const KmeansFit& fit) {
    ++traces;
    for (std::size_t i = 1; i < fit.inertia_trace.size(); ++i)
      monotone = monotone && fit.inertia_trace[i] <= fit.inertia_trace[i - 1];
  };
  for (int k = 0; k < 30; ++k) {
    const std::vector<FrameMatrix> corpus{FrameMatrix(random_matrix(rng, 200, 3), 50.0)};
    KmeansConfig c;
    c.k = 2 + k % 15;
    c.seed = static_cast<std::uint64_t>(k);
    check_trace(kmeans_fit(corpus, c));
  }
  double worst = 0.0;
  int misses = 0;
  std::uniform_int_distribution<int> n_d(4, 10), k_d(2, 3);
  const int instances = 25;
  for (int inst = 0; inst < instances; ++inst) {
    const int n = n_d(rng), k = k_d(rng);
    const Matrix pts = random_matrix(rng, n, 2);
    const std::vector<FrameMatrix> corpus{FrameMatrix(pts, 50.0)};
    double best = std::numeric_limits<double>::infinity();
    for (int seed = 0; seed < 10; ++seed) {
      KmeansConfig c;
      c.k = k;
      c.seed = static_cast<std::uint64_t>(seed);
      const KmeansFit fit = kmeans_fit(corpus, c);
      check_trace(fit);
      best = std::min(best, kmeans_inertia(corpus, fit.codebook));
    }
    const double gap = std::abs(best - oracle::best_partition_inertia(pts, k));
    misses += gap > 1e-9;
    worst = std::max(worst, gap);
  }
  return {monotone && worst <= 1e-9, std::to_string(traces) + " traces monotone=" + (monotone ? "yes" : "no") + ", " +
                                         std::to_string(instances) + " brute-force instances, " + std::to_string(misses) +
                                         " above the optimum, max gap " + fmt(worst, 3)};
}

Outcome postproc_properties() {
  std::mt19937_64 rng(5);
  const auto random_seq = [&](Token vocab) {
    std::uniform_int_distribution<int> len(0, 60);
    std::uniform_int_distribution<Token> tok(0, vocab - 1);
    std::vector<Token> t(static_cast<std::size_t>(len(rng)));
    for (auto& v : t) v = tok(rng);
    return TokenSequence(std::move(t), vocab);
  };
  std::vector<TokenSequence> train;
  for (int u = 0; u < 50; ++u) train.push_back(random_seq(8));
  const BpeModel bpe = bpe_train(train, 40);
  int dd_bad = 0, bpe_bad = 0, len_bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const TokenSequence s = random_seq(8);
    const TokenSequence d = dedup(s);
    if (!(dedup(d) == d)) ++dd_bad;
    for (std::size_t i = 1; i < d.size(); ++i)
      if (d[i] == d[i - 1]) ++dd_bad;
    const TokenSequence e = bpe_apply(s, bpe);
    if (!(bpe_decode(e, bpe) == s)) ++bpe_bad;
    if (d.size() > s.size() || e.size() > s.size()) ++len_bad;
  }
  return {dd_bad == 0 && bpe_bad == 0 && len_bad == 0,
          "1000 sequences: dedup violations " + std::to_string(dd_bad) + ", bpe round-trip failures " +
              std::to_string(bpe_bad) + ", length violations " + std::to_string(len_bad)};
}

Outcome distribution_stats_check() {
  bool ok = true;
  for (std::int64_t k : {2, 5, 10, 240, 2000}) {
    const DistributionReport r = distribution_from_counts(std::vector<std::int64_t>(static_cast<std::size_t>(k), 11));
    ok = ok && std::abs(r.entropy_bits - std::log2(static_cast<double>(k))) <= 1e-12 &&
         r.threshold_index == static_cast<std::int64_t>(std::ceil(0.8 * static_cast<double>(k)));
  }
  std::vector<std::int64_t> point(2000, 0);
  point[42] = 1000;
  const DistributionReport p = distribution_from_counts(point);
  ok = ok && p.entropy_bits == 0.0 && p.threshold_index == 1;
  const DistributionReport u = distribution_from_counts(std::vector<std::int64_t>(2000, 1));
  return {ok, "uniform 2000: entropy " + fmt(u.entropy_bits, 6) + ", threshold_index " + std::to_string(u.threshold_index) +
                  "; point mass entropy " + fmt(p.entropy_bits)};
}

Outcome readme_disclosure(const std::filesystem::path& readme) {
  std::ifstream in(readme);
  if (!in) return {false, "cannot read " + readme.string()};
  const std::string text{std::istreambuf_iterator<char>(in), {}};
  const bool ok = text.find("not reproduced") != std::string::npos && text.find("MyST") != std::string::npos &&
                  text.find("OGI") != std::string::npos && text.find("WavLM") != std::string::npos;
  return {ok, ok ? "README states absolute real-corpus WERs are not reproduced" : "disclosure missing from README"};
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path spec_path = SEMTOK_SOURCE_DIR "/configs/compare_default.json";
  std::filesystem::path readme = SEMTOK_SOURCE_DIR "/README.md";
  std::filesystem::path work = std::filesystem::temp_directory_path() / "semtok_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--spec") spec_path = argv[i + 1];
    else if (flag == "--readme") readme = argv[i + 1];
    else if (flag == "--work-dir") work = argv[i + 1];
    else {
      std::cerr << "unknown option " << flag << "\n";
      return 2;
    }
  }

  Report report;
  report.run("1", "bitrate golden values", 1, bitrate_golden);
  report.run("2", "codebook sizes and index bijection", 1, codebook_sizes);
  report.run("3", "CTC loss and gradient vs oracles", 30, ctc_oracle);
  report.run("4", "straight-through estimator gradients", 30, ste_correctness);
  report.run("5", "k-means monotone traces and brute-force optimum", 10, kmeans_properties);
  report.run("6", "dedup and BPE properties", 10, postproc_properties);
  report.run("7", "distribution statistics", 1, distribution_stats_check);

  // Criterion 8: one comparison run, several trend checks.
  const auto start = std::chrono::steady_clock::now();
  CompareReport cmp;
  std::string error;
  try {
    std::filesystem::remove_all(work);
    cmp = run_compare(load_compare_spec(spec_path), work);
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!error.empty()) {
    report.line("8", "end-to-end trends", {false, "comparison failed: " + error}, secs);
  } else {
    std::cout << cmp.markdown;
    const bool in_budget = secs <= 300.0;
    const auto& km = cmp.row("kmeans");
    const auto& fsq = cmp.row("fsq");
    report.line("8a", "FSQ test WER <= k-means test WER",
                {fsq.wer_test <= km.wer_test && in_budget, fmt(fsq.wer_test) + " vs " + fmt(km.wer_test)}, secs);
    for (const char* name : {"kmeans", "fsq"}) {
      const auto& in = cmp.row(name);
      const auto& out = cmp.row(std::string(name) + "-ood");
      report.line(std::string("8b-") + name, std::string(name) + " out-of-domain tokenizer degrades",
                  {out.wer_test > in.wer_test && in_budget, fmt(out.wer_test) + " vs in-domain " + fmt(in.wer_test)},
                  secs);
    }
    for (const char* name : {"kmeans", "fsq"}) {
      const auto& base = cmp.row(name);
      bool ok = in_budget;
      std::string detail;
      for (const char* pp : {"+dd", "+sw"}) {
        const auto& r = cmp.row(std::string(name) + pp);
        const double dwer = r.wer_test - base.wer_test;
        const bool row_ok = r.bitrate < base.bitrate && std::abs(dwer) < 5.0;
        ok = ok && row_ok;
        detail += std::string(pp + 1) + ": bitrate " + fmt(base.bitrate, 5) + " -> " + fmt(r.bitrate, 5) +
                  ", WER change " + (dwer >= 0 ? "+" : "") + fmt(dwer, 3) + (row_ok ? "; " : " (outside 5 points); ");
      }
      report.line(std::string("8c-") + name, std::string(name) + " DD and SW lower bitrate within 5 WER points",
                  {ok, detail}, secs);
    }
  }

  report.run("9", "disclosure of non-reproduced real-corpus results", 1, [&] { return readme_disclosure(readme); });
  std::cout << (report.all_pass() ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << std::endl;
  return report.all_pass() ? 0 : 1;
}
