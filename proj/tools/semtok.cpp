// semtok: command-line front end for the discrete speech-token toolkit.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "json_config.hpp"
#include "semtok/asr.hpp"
#include "semtok/ctc.hpp"
#include "semtok/error.hpp"
#include "semtok/experiment.hpp"
#include "semtok/fsq.hpp"
#include "semtok/io.hpp"
#include "semtok/kmeans.hpp"
#include "semtok/metrics.hpp"
#include "semtok/parallel.hpp"
#include "semtok/postproc.hpp"
#include "semtok/synth.hpp"
#include "semtok/train.hpp"

namespace fs = std::filesystem;
using namespace semtok;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

Token max_token(const std::vector<TokenRecord>& records) {
  Token m = -1;
  for (const auto& r : records)
    for (Token t : r.tokens) m = std::max(m, t);
  return m;
}

std::vector<TokenSequence> to_sequences(const std::vector<TokenRecord>& records, Token vocab) {
  std::vector<TokenSequence> out;
  out.reserve(records.size());
  for (const auto& r : records) out.emplace_back(r.tokens, vocab);
  return out;
}

// Infers the vocab from the data when the caller did not give one.
Token resolve_vocab(Token requested, const std::vector<TokenRecord>& records) {
  if (requested > 0) return requested;
  return std::max<Token>(max_token(records) + 1, 2);
}

std::vector<FrameMatrix> load_features(const fs::path& manifest_path) {
  const Manifest manifest = read_manifest(manifest_path);
  std::vector<FrameMatrix> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries()) out.push_back(read_frame_matrix(resolve_feature_path(manifest_path, e)));
  return out;
}

struct Options {
  int threads = default_threads();

  // synth
  SynthConfig synth;
  std::string style = "spontaneous";
  std::vector<double> split{0.7, 0.15, 0.15};
  std::string out_dir;

  // shared
  std::string manifest, out, in, model, tokens, lexicon, spec, trace_io, markdown, hyp, ref, csv, svg;
  std::uint64_t seed = 0;
  bool json = false;

  // kmeans-train
  KmeansConfig kmeans;
  std::string inertia_csv;

  // fsq-train
  std::vector<int> levels{8, 6, 5};
  int dim_up = 16;
  TrainConfig train;
  std::string loss_csv;

  // encode
  std::string tokenizer = "kmeans";

  // bpe / bitrate / dist
  Token vocab = 0;
  Token target_vocab = 0;
  bool decode = false;
  double duration = 0.0;
  double threshold = 0.8;
};

int run_synth(const Options& o) {
  SynthConfig c = o.synth;
  c.style = parse_speech_style(o.style);
  c.seed = o.seed;
  c.validate();
  require(o.split.size() == 3, ErrorCode::kInvalidArgument, "--split needs three fractions");
  const SynthCorpus corpus = synth_generate(c);
  const fs::path dir(o.out_dir);
  write_synth_corpus(corpus, dir);
  const SplitManifests parts = synth_split(corpus.manifest, {o.split[0], o.split[1], o.split[2]}, o.seed);
  write_manifest(parts.train, dir / "train.tsv");
  write_manifest(parts.dev, dir / "dev.tsv");
  write_manifest(parts.test, dir / "test.tsv");
  std::size_t frames = 0;
  for (const auto& u : corpus.utterances) frames += u.features.num_frames();
  std::cout << "synth: " << corpus.utterances.size() << " utterances, " << frames << " frames, split "
            << parts.train.size() << "/" << parts.dev.size() << "/" << parts.test.size() << " -> " << dir.string()
            << "\n";
  return 0;
}

int run_kmeans_train(const Options& o) {
  const auto corpus = load_features(o.manifest);
  KmeansConfig c = o.kmeans;
  c.seed = o.seed;
  c.threads = o.threads;
  const KmeansFit fit = kmeans_fit(corpus, c);
  write_codebook(fit.codebook, o.out);
  if (!o.inertia_csv.empty()) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s.precision(17);
    s << "iteration,inertia\n";
    for (std::size_t i = 0; i < fit.inertia_trace.size(); ++i) s << i << ',' << fit.inertia_trace[i] << '\n';
    std::ofstream(o.inertia_csv) << s.str();
  }
  std::cout << "kmeans-train: k=" << fit.codebook.k() << " dim=" << fit.codebook.dim() << " iterations="
            << fit.iterations << " inertia=" << fit.inertia_trace.back() << "\n";
  return 0;
}

int run_fsq_train(const Options& o) {
  const fs::path manifest_path(o.manifest);
  std::optional<SynthMetadata> meta;
  if (!o.lexicon.empty()) meta = read_synth_metadata(o.lexicon);
  std::vector<Utterance> corpus = load_utterances(manifest_path, meta ? meta->config.vocab_words : 0);
  require(!corpus.empty(), ErrorCode::kInsufficientData, "manifest is empty");
  int num_labels = corpus.front().labels.num_labels();
  if (meta) {
    num_labels = meta->config.num_phonemes;
    for (auto& u : corpus) u.labels = spell_words(u.labels, meta->world.lexicon, num_labels);
  }
  TrainConfig c = o.train;
  c.seed = o.seed;
  c.threads = o.threads;
  const FsqInit shape{FsqLevels(o.levels), static_cast<int>(corpus.front().features.dim()), o.dim_up, num_labels};
  const FsqTrainResult r = fsq_train(corpus, shape, c);
  write_fsq_model(r.model, o.out);
  if (!o.loss_csv.empty()) write_loss_trace(r.trace, o.loss_csv);
  std::cout << "fsq-train: codebook=" << r.model.levels.codebook_size() << " epoch0_loss="
            << fixed(r.epoch_mean_loss.front(), 4) << " final_loss=" << fixed(r.epoch_mean_loss.back(), 4) << "\n";
  return 0;
}

int run_encode(const Options& o) {
  const fs::path manifest_path(o.manifest);
  const Manifest manifest = read_manifest(manifest_path);
  const TokenizerKind kind = parse_tokenizer_kind(o.tokenizer);
  std::optional<Codebook> codebook;
  std::optional<FsqModel> fsq;
  if (kind == TokenizerKind::kKmeans) codebook = read_codebook(o.model);
  else fsq = read_fsq_model(o.model);
  std::vector<TokenRecord> records;
  for (const auto& e : manifest.entries()) {
    const FrameMatrix m = read_frame_matrix(resolve_feature_path(manifest_path, e));
    const TokenSequence t = codebook ? kmeans_assign(m, *codebook) : fsq_encode(m, *fsq);
    records.push_back({e.utterance_id, t.tokens()});
  }
  write_token_file(records, o.out);
  std::cout << "encode: " << records.size() << " utterances -> " << o.out << "\n";
  return 0;
}

int run_dedup(const Options& o) {
  auto records = read_token_file(o.in);
  std::size_t before = 0, after = 0;
  for (auto& r : records) {
    before += r.tokens.size();
    r.tokens = dedup(TokenSequence(r.tokens, max_token(records) + 1)).tokens();
    after += r.tokens.size();
  }
  write_token_file(records, o.out);
  std::cout << "dedup: " << before << " -> " << after << " tokens\n";
  return 0;
}

int run_bpe_train(const Options& o) {
  const auto records = read_token_file(o.tokens);
  const Token base = resolve_vocab(o.vocab, records);
  const BpeModel model = bpe_train(to_sequences(records, base), o.target_vocab);
  write_bpe_model(model, o.out);
  std::cout << "bpe-train: base_vocab=" << model.base_vocab() << " merges=" << model.merges().size()
            << " vocab_size=" << model.vocab_size() << "\n";
  return 0;
}

int run_bpe_apply(const Options& o) {
  const BpeModel model = read_bpe_model(o.model);
  auto records = read_token_file(o.tokens);
  std::size_t before = 0, after = 0;
  for (auto& r : records) {
    before += r.tokens.size();
    r.tokens = o.decode ? bpe_decode(TokenSequence(r.tokens, model.vocab_size()), model).tokens()
                        : bpe_apply(TokenSequence(r.tokens, model.base_vocab()), model).tokens();
    after += r.tokens.size();
  }
  write_token_file(records, o.out);
  std::cout << (o.decode ? "bpe-decode: " : "bpe-apply: ") << before << " -> " << after << " tokens\n";
  return 0;
}

int run_bitrate(const Options& o) {
  const auto records = read_token_file(o.tokens);
  const Token vocab = resolve_vocab(o.vocab, records);
  const BitrateReport r = token_bitrate(to_sequences(records, vocab), o.duration, vocab);
  if (o.json) std::cout << to_json(r) << "\n";
  else
    std::cout << "bits_per_second " << fixed(r.bits_per_second, 1) << " tokens_per_second "
              << fixed(r.tokens_per_second, 3) << " bits_per_token " << fixed(r.bits_per_token, 5)
              << " total_tokens " << r.total_tokens << "\n";
  return 0;
}

int run_dist(const Options& o) {
  const auto records = read_token_file(o.tokens);
  const Token vocab = resolve_vocab(o.vocab, records);
  const DistributionReport r = distribution_stats(to_sequences(records, vocab), vocab, o.threshold);
  if (!o.csv.empty()) write_distribution_csv(r, o.csv);
  if (!o.svg.empty()) write_distribution_svg(r, o.svg);
  if (o.json) std::cout << to_json(r) << "\n";
  else
    std::cout << "entropy_bits " << fixed(r.entropy_bits, 4) << " utilization " << fixed(r.utilization, 4)
              << " threshold_index " << r.threshold_index << " used " << r.sorted_frequencies.size() << "/"
              << r.vocab_size << (r.empty_corpus ? " (empty corpus)" : "") << "\n";
  return 0;
}

int run_ctc_decode(const Options& o) {
  const FsqModel model = read_fsq_model(o.model);
  const fs::path manifest_path(o.manifest);
  const Manifest manifest = read_manifest(manifest_path);
  std::vector<TranscriptRecord> out;
  for (const auto& e : manifest.entries()) {
    const FrameMatrix m = read_frame_matrix(resolve_feature_path(manifest_path, e));
    const LabelSequence labels =
        m.num_frames() == 0 ? LabelSequence({}, model.num_labels)
                            : ctc_greedy_decode(fsq_asr_logits(m, model), model.num_labels);
    out.push_back({e.utterance_id, symbols_from_labels(labels)});
  }
  write_transcript_file(out, o.out);
  std::cout << "ctc-decode: " << out.size() << " utterances -> " << o.out << "\n";
  return 0;
}

int run_eval_wer(const Options& o) {
  std::map<std::string, std::vector<std::string>> refs;
  if (!o.manifest.empty()) {
    const Manifest manifest = read_manifest(o.manifest);
    for (const auto& e : manifest.entries()) refs[e.utterance_id] = e.transcript;
  } else {
    for (auto& r : read_transcript_file(o.ref)) refs[r.utterance_id] = std::move(r.symbols);
  }
  std::vector<WordSequence> hyp, ref;
  for (auto& r : read_transcript_file(o.hyp)) {
    auto it = refs.find(r.utterance_id);
    require(it != refs.end(), ErrorCode::kInvalidArgument, "no reference for utterance '" + r.utterance_id + "'");
    hyp.push_back(std::move(r.symbols));
    ref.push_back(it->second);
  }
  require(hyp.size() == refs.size(), ErrorCode::kInvalidArgument,
          "hypothesis covers " + std::to_string(hyp.size()) + " of " + std::to_string(refs.size()) + " references");
  const WerResult w = word_error_rate(hyp, ref);
  if (o.json) std::cout << to_json(w) << "\n";
  else
    std::cout << "wer " << fixed(w.wer_percent, 2) << " sub " << w.substitutions << " del " << w.deletions
              << " ins " << w.insertions << " ref_words " << w.reference_words << "\n";
  return 0;
}

int run_compare(const Options& o, bool seed_given) {
  CompareSpec spec = load_compare_spec(o.spec);
  if (seed_given) {
    spec.seed = o.seed;
    spec.kmeans.seed = spec.fsq_train.seed = spec.asr.train.seed = o.seed;
  }
  spec.threads = o.threads;
  IoLog log;
  const CompareReport report = run_compare(spec, o.out_dir.empty() ? fs::path("compare_work") : fs::path(o.out_dir),
                                           o.trace_io.empty() ? nullptr : &log);
  if (!o.trace_io.empty()) log.write(o.trace_io);
  if (!o.markdown.empty()) std::ofstream(o.markdown) << report.markdown;
  std::cout << report.markdown;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semtok: unsupervised (K-means) and supervised (FSQ + CTC) speech-token toolkit"};
  app.set_version_flag("--version", kVersion);
  app.config_formatter(std::make_shared<semtok::cli::JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::map<std::string, CLI::App*> sub;
  auto add = [&](const std::string& name, const std::string& help) {
    sub[name] = app.add_subcommand(name, help);
    return sub[name];
  };
  auto seed_opt = [&](CLI::App* s) { return s->add_option("--seed", o.seed, "RNG seed"); };

  {
    auto* s = add("synth", "Generate a seeded synthetic corpus with train/dev/test manifests");
    s->add_option("--out-dir", o.out_dir, "Output directory")->required();
    s->add_option("--dim", o.synth.dim, "Feature dimension");
    s->add_option("--phonemes", o.synth.num_phonemes, "Number of phoneme classes");
    s->add_option("--words", o.synth.vocab_words, "Vocabulary size");
    s->add_option("--style", o.style, "scripted | spontaneous");
    s->add_option("--age-shift", o.synth.age_shift, "Offset magnitude along the corpus shift direction");
    s->add_option("--noise", o.synth.noise_sigma, "Gaussian noise sigma");
    s->add_option("--content-dim", o.synth.content_dim, "Rank of the phoneme-mean subspace (0 = dim)");
    s->add_option("--mean-scale", o.synth.mean_scale, "Spread of the phoneme means");
    s->add_option("--noise-correlation", o.synth.noise_correlation, "AR(1) correlation of frame noise");
    s->add_option("--speaker-dim", o.synth.speaker_dim, "Rank of the per-utterance speaker offset");
    s->add_option("--speaker-sigma", o.synth.speaker_sigma, "Spread of the speaker offset");
    s->add_option("--frames-min", o.synth.frames_min, "Minimum frames per phoneme");
    s->add_option("--frames-max", o.synth.frames_max, "Maximum frames per phoneme");
    s->add_option("--utterances", o.synth.utterances, "Number of utterances");
    s->add_option("--frame-rate", o.synth.frame_rate_hz, "Frames per second");
    s->add_option("--world-seed", o.synth.world_seed, "Seed of phoneme means, lexicon and templates");
    s->add_option("--id-prefix", o.synth.id_prefix, "Utterance id prefix");
    s->add_option("--split", o.split, "train,dev,test fractions")->delimiter(',')->expected(3);
    seed_opt(s);
  }
  {
    auto* s = add("kmeans-train", "Train a K-means codebook on a manifest's features");
    s->add_option("--manifest", o.manifest)->required();
    s->add_option("--k", o.kmeans.k, "Number of centroids");
    s->add_option("--max-iters", o.kmeans.max_iters);
    s->add_option("--tol", o.kmeans.tol, "Relative inertia improvement threshold");
    s->add_option("--out", o.out, "Codebook file")->required();
    s->add_option("--inertia-csv", o.inertia_csv, "Write the inertia trace");
    seed_opt(s);
  }
  {
    auto* s = add("fsq-train", "Train an FSQ tokenizer with CTC");
    s->add_option("--manifest", o.manifest)->required();
    s->add_option("--levels", o.levels, "Levels per channel, e.g. 5,5,5,4,4")->delimiter(',');
    s->add_option("--dim-up", o.dim_up, "Up-projection dimension");
    s->add_option("--lexicon", o.lexicon, "corpus.json; trains on phoneme spellings of the transcripts");
    s->add_option("--lr", o.train.learning_rate);
    s->add_option("--momentum", o.train.momentum);
    s->add_option("--clip", o.train.grad_clip);
    s->add_option("--epochs", o.train.epochs);
    s->add_option("--batch-size", o.train.batch_size);
    s->add_option("--out", o.out, "Model file")->required();
    s->add_option("--loss-csv", o.loss_csv, "Write epoch,batch,loss,grad_norm");
    seed_opt(s);
  }
  {
    auto* s = add("encode", "Tokenize a manifest's features");
    s->add_option("--tokenizer", o.tokenizer, "kmeans | fsq")->check(CLI::IsMember({"kmeans", "fsq"}));
    s->add_option("--model", o.model, "Codebook or FSQ model file")->required();
    s->add_option("--manifest", o.manifest)->required();
    s->add_option("--out", o.out, "Token file")->required();
  }
  {
    auto* s = add("dedup", "Collapse consecutive repeated tokens");
    s->add_option("--in", o.in)->required();
    s->add_option("--out", o.out)->required();
  }
  {
    auto* s = add("bpe-train", "Learn BPE merges over token streams");
    s->add_option("--tokens", o.tokens)->required();
    s->add_option("--vocab", o.vocab, "Base vocab (default: max token + 1)");
    s->add_option("--target-vocab", o.target_vocab, "Vocabulary after merging")->required();
    s->add_option("--out", o.out)->required();
  }
  {
    auto* s = add("bpe-apply", "Apply (or with --decode, undo) BPE merges");
    s->add_option("--tokens", o.tokens)->required();
    s->add_option("--model", o.model)->required();
    s->add_option("--out", o.out)->required();
    s->add_flag("--decode", o.decode);
  }
  {
    auto* s = add("bitrate", "Token bitrate: tokens/sec * log2(vocab)");
    s->add_option("--tokens", o.tokens)->required();
    s->add_option("--duration", o.duration, "Total duration in seconds")->required();
    s->add_option("--vocab", o.vocab, "Vocabulary size (default: max token + 1)");
    s->add_flag("--json", o.json);
  }
  {
    auto* s = add("dist", "Token frequency distribution statistics");
    s->add_option("--tokens", o.tokens)->required();
    s->add_option("--vocab", o.vocab);
    s->add_option("--threshold", o.threshold, "Cumulative share threshold");
    s->add_option("--csv", o.csv);
    s->add_option("--svg", o.svg);
    s->add_flag("--json", o.json);
  }
  {
    auto* s = add("ctc-decode", "Greedy CTC decoding through an FSQ model's ASR head");
    s->add_option("--model", o.model)->required();
    s->add_option("--manifest", o.manifest)->required();
    s->add_option("--out", o.out, "Transcript file")->required();
  }
  {
    auto* s = add("eval-wer", "Word error rate of a transcript file");
    s->add_option("--hyp", o.hyp)->required();
    auto* ref = s->add_option("--ref", o.ref, "Reference transcript file");
    auto* man = s->add_option("--manifest", o.manifest, "Take references from a manifest");
    ref->excludes(man);
    s->add_flag("--json", o.json);
  }
  CLI::Option* compare_seed = nullptr;
  {
    auto* s = add("compare", "Run the tokenizer comparison experiments from a JSON spec");
    s->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
    s->add_option("--out-dir", o.out_dir, "Working directory");
    s->add_option("--trace-io", o.trace_io, "Write the feature-file access log");
    s->add_option("--markdown", o.markdown, "Also write the tables to this file");
    compare_seed = seed_opt(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sub["eval-wer"]->parsed() && o.ref.empty() && o.manifest.empty()) {
      std::cerr << "eval-wer: one of --ref or --manifest is required\n";
      return 2;
    }
    if (sub["synth"]->parsed()) return run_synth(o);
    if (sub["kmeans-train"]->parsed()) return run_kmeans_train(o);
    if (sub["fsq-train"]->parsed()) return run_fsq_train(o);
    if (sub["encode"]->parsed()) return run_encode(o);
    if (sub["dedup"]->parsed()) return run_dedup(o);
    if (sub["bpe-train"]->parsed()) return run_bpe_train(o);
    if (sub["bpe-apply"]->parsed()) return run_bpe_apply(o);
    if (sub["bitrate"]->parsed()) return run_bitrate(o);
    if (sub["dist"]->parsed()) return run_dist(o);
    if (sub["ctc-decode"]->parsed()) return run_ctc_decode(o);
    if (sub["eval-wer"]->parsed()) return run_eval_wer(o);
    if (sub["compare"]->parsed()) return run_compare(o, compare_seed->count() > 0);
  } catch (const semtok::Error& e) {
    std::cerr << "semtok: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "semtok: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
