#include "semtok/experiment.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "semtok/error.hpp"
#include "semtok/io.hpp"
#include "semtok/postproc.hpp"

namespace semtok {

std::string to_string(TokenizerKind kind) { return kind == TokenizerKind::kKmeans ? "kmeans" : "fsq"; }

TokenizerKind parse_tokenizer_kind(const std::string& text) {
  if (text == "kmeans") return TokenizerKind::kKmeans;
  if (text == "fsq") return TokenizerKind::kFsq;
  fail(ErrorCode::kInvalidArgument, "tokenizer must be 'kmeans' or 'fsq', got '" + text + "'");
}

void IoLog::write(const std::filesystem::path& path) const {
  std::string text = "phase\tsplit\tpath\n";
  for (const auto& e : entries) text += e.phase + '\t' + e.split + '\t' + e.path + '\n';
  detail::write_all_text(text, path);
}

const RowResult& CompareReport::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.spec.name == name) return r;
  fail(ErrorCode::kInvalidArgument, "no comparison row named '" + name + "'");
}

std::vector<Utterance> load_utterances(const std::filesystem::path& manifest_path, int num_labels, IoLog* log,
                                       const std::string& phase, const std::string& split) {
  const Manifest manifest = read_manifest(manifest_path);
  int labels = num_labels;
  if (labels <= 0) {
    labels = 1;
    for (const auto& e : manifest.entries())
      for (const auto& s : e.transcript) labels = std::max(labels, std::stoi(s));
  }
  std::vector<Utterance> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries()) {
    const auto path = resolve_feature_path(manifest_path, e);
    if (log) log->entries.push_back({phase, split, path.lexically_normal().string()});
    out.push_back({e.utterance_id, read_frame_matrix(path), labels_from_symbols(e.transcript, labels)});
  }
  return out;
}

namespace {

using nlohmann::json;

TrainConfig train_from_json(const json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  c.dim = j.value("dim", c.dim);
  c.num_phonemes = j.value("num_phonemes", c.num_phonemes);
  c.vocab_words = j.value("vocab_words", c.vocab_words);
  c.style = parse_speech_style(j.value("style", to_string(c.style)));
  c.age_shift = j.value("age_shift", c.age_shift);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.content_dim = j.value("content_dim", c.content_dim);
  c.mean_scale = j.value("mean_scale", c.mean_scale);
  c.noise_correlation = j.value("noise_correlation", c.noise_correlation);
  c.speaker_dim = j.value("speaker_dim", c.speaker_dim);
  c.speaker_sigma = j.value("speaker_sigma", c.speaker_sigma);
  if (j.contains("frames_per_phoneme")) {
    c.frames_min = j["frames_per_phoneme"].at(0);
    c.frames_max = j["frames_per_phoneme"].at(1);
  }
  if (j.contains("word_phonemes")) {
    c.word_min_phonemes = j["word_phonemes"].at(0);
    c.word_max_phonemes = j["word_phonemes"].at(1);
  }
  c.utterances = j.value("utterances", c.utterances);
  c.frame_rate_hz = j.value("frame_rate_hz", c.frame_rate_hz);
  c.seed = j.value("seed", c.seed);
  c.world_seed = j.value("world_seed", c.world_seed);
  c.id_prefix = j.value("id_prefix", c.id_prefix);
  c.validate();
  return c;
}

DomainSource domain_from_json(const json& j, const std::filesystem::path& base, bool need_eval) {
  DomainSource d;
  auto path = [&](const char* key) {
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  if (j.contains("synth")) {
    d.synth = synth_from_json(j["synth"]);
    return d;
  }
  d.train = path("train");
  if (need_eval) {
    d.dev = path("dev");
    d.test = path("test");
  }
  if (j.contains("lexicon")) d.lexicon = path("lexicon");
  return d;
}

}  // namespace

CompareSpec parse_compare_spec(const std::string& json_text, const std::filesystem::path& base_dir) {
  try {
    const json j = json::parse(json_text);
    CompareSpec s;
    s.seed = j.value("seed", s.seed);
    if (j.contains("split")) s.split = j["split"].get<std::array<double, 3>>();
    s.in_domain = domain_from_json(j.at("in_domain"), base_dir, true);
    if (j.contains("out_of_domain")) s.out_of_domain = domain_from_json(j["out_of_domain"], base_dir, false);
    if (j.contains("kmeans")) {
      const auto& k = j["kmeans"];
      s.kmeans.k = k.value("k", s.kmeans.k);
      s.kmeans.max_iters = k.value("max_iters", s.kmeans.max_iters);
      s.kmeans.tol = k.value("tol", s.kmeans.tol);
    }
    s.kmeans.seed = s.seed;
    if (j.contains("fsq")) {
      const auto& f = j["fsq"];
      if (f.contains("levels")) s.fsq_levels = FsqLevels(f["levels"].get<std::vector<int>>());
      s.fsq_dim_up = f.value("dim_up", s.fsq_dim_up);
      if (f.contains("train")) s.fsq_train = train_from_json(f["train"], s.fsq_train);
    }
    s.fsq_train.seed = s.seed;
    if (j.contains("asr")) {
      const auto& a = j["asr"];
      s.asr.embed_dim = a.value("embed_dim", s.asr.embed_dim);
      s.asr.context = a.value("context", s.asr.context);
      s.asr.hidden = a.value("hidden", s.asr.hidden);
      if (a.contains("train")) s.asr.train = train_from_json(a["train"], s.asr.train);
    }
    s.asr.train.seed = s.seed;
    s.continuous_baseline = j.value("continuous_baseline", s.continuous_baseline);
    for (const auto& e : j.at("experiments")) {
      ExperimentSpec x;
      x.name = e.at("name").get<std::string>();
      x.tokenizer = parse_tokenizer_kind(e.at("tokenizer").get<std::string>());
      const std::string domain = e.value("tokenizer_domain", std::string("in"));
      require(domain == "in" || domain == "out", ErrorCode::kInvalidArgument,
              "tokenizer_domain must be 'in' or 'out'");
      x.out_of_domain_tokenizer = domain == "out";
      x.dd = e.value("dd", false);
      x.sw = e.value("sw", false);
      x.sw_vocab = e.value("sw_vocab", std::int64_t{0});
      const std::int64_t codebook = x.tokenizer == TokenizerKind::kKmeans
                                        ? s.kmeans.k
                                        : static_cast<std::int64_t>(s.fsq_levels.codebook_size());
      require(!x.sw || x.sw_vocab > codebook, ErrorCode::kInvalidArgument,
              "experiment '" + x.name + "': sw_vocab must exceed the codebook size");
      s.experiments.push_back(std::move(x));
    }
    if (std::any_of(s.experiments.begin(), s.experiments.end(),
                    [](const ExperimentSpec& x) { return x.out_of_domain_tokenizer; }))
      require(j.contains("out_of_domain"), ErrorCode::kInvalidArgument,
              "out-of-domain experiments need an 'out_of_domain' section");
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("experiment spec: ") + e.what());
  }
}

CompareSpec load_compare_spec(const std::filesystem::path& path) {
  return parse_compare_spec(detail::read_all_text(path), path.parent_path());
}

namespace {

struct Tokenizer {
  TokenizerKind kind;
  Codebook codebook;
  FsqModel fsq;

  TokenSequence encode(const FrameMatrix& m) const {
    return kind == TokenizerKind::kKmeans ? kmeans_assign(m, codebook) : fsq_encode(m, fsq);
  }
  std::int64_t vocab() const {
    return kind == TokenizerKind::kKmeans ? static_cast<std::int64_t>(codebook.k())
                                          : static_cast<std::int64_t>(fsq.levels.codebook_size());
  }
};

struct Pipeline {
  const Tokenizer* tokenizer = nullptr;  // null for the continuous baseline
  bool dd = false;
  std::int64_t sw_vocab = 0;  // > 0 enables BPE sub-word modeling
  std::optional<BpeModel> bpe;
  AsrModel asr;
  std::size_t skipped = 0;

  AsrInput input(const FrameMatrix& m) const {
    if (!tokenizer) return m;
    TokenSequence t = tokenizer->encode(m);
    if (dd) t = dedup(t);
    if (bpe) t = bpe_apply(t, *bpe);
    return t;
  }
};

// Materializes a synthetic domain under `dir` and points the source at it.
void materialize(DomainSource& d, const std::filesystem::path& dir, const std::array<double, 3>& split,
                 std::uint64_t seed) {
  if (!d.synth) return;
  const SynthCorpus corpus = synth_generate(*d.synth);
  write_synth_corpus(corpus, dir);
  const SplitManifests parts = synth_split(corpus.manifest, split, seed);
  write_manifest(parts.train, dir / "train.tsv");
  write_manifest(parts.dev, dir / "dev.tsv");
  write_manifest(parts.test, dir / "test.tsv");
  d.train = dir / "train.tsv";
  d.dev = dir / "dev.tsv";
  d.test = dir / "test.tsv";
  d.lexicon = dir / "corpus.json";
}

std::string fmt(double v, int digits) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

CompareReport run_compare(const CompareSpec& spec_in, const std::filesystem::path& work_dir, IoLog* log) {
  CompareSpec spec = spec_in;
  std::filesystem::create_directories(work_dir);
  materialize(spec.in_domain, work_dir / "in_domain", spec.split, spec.seed);
  const bool need_out = std::any_of(spec.experiments.begin(), spec.experiments.end(),
                                    [](const ExperimentSpec& x) { return x.out_of_domain_tokenizer; });
  if (need_out) materialize(spec.out_of_domain, work_dir / "out_of_domain", spec.split, spec.seed);

  std::optional<SynthMetadata> in_meta;
  if (spec.in_domain.lexicon) in_meta = read_synth_metadata(*spec.in_domain.lexicon);
  const int num_words = in_meta ? in_meta->config.vocab_words : 0;

  // ---- training phase: only train-split features are read here.
  const std::vector<Utterance> in_train = load_utterances(spec.in_domain.train, num_words, log, "train", "train");
  std::vector<Utterance> out_train;
  if (need_out) out_train = load_utterances(spec.out_of_domain.train, num_words, log, "train", "train");
  int num_labels = num_words;
  if (num_labels <= 0)
    for (const std::vector<Utterance>* set : std::initializer_list<const std::vector<Utterance>*>{&in_train, &out_train})
      for (const auto& u : *set) num_labels = std::max(num_labels, u.labels.num_labels());

  std::map<std::pair<TokenizerKind, bool>, std::unique_ptr<Tokenizer>> tokenizers;
  auto tokenizer_for = [&](TokenizerKind kind, bool out_of_domain) -> const Tokenizer& {
    auto& slot = tokenizers[{kind, out_of_domain}];
    if (slot) return *slot;
    const auto& data = out_of_domain ? out_train : in_train;
    const DomainSource& source = out_of_domain ? spec.out_of_domain : spec.in_domain;
    slot = std::make_unique<Tokenizer>();
    slot->kind = kind;
    if (kind == TokenizerKind::kKmeans) {
      std::vector<FrameMatrix> frames;
      for (const auto& u : data) frames.push_back(u.features);
      KmeansConfig cfg = spec.kmeans;
      cfg.threads = spec.threads;
      slot->codebook = kmeans_train(frames, cfg);
    } else {
      // With a lexicon, the tokenizer learns from phoneme spellings of the
      // transcripts; otherwise from the word ids themselves.
      std::vector<Utterance> targets = data;
      int target_labels = num_labels;
      if (source.lexicon) {
        const SynthMetadata meta = read_synth_metadata(*source.lexicon);
        target_labels = meta.config.num_phonemes;
        for (auto& u : targets) u.labels = spell_words(u.labels, meta.world.lexicon, target_labels);
      }
      TrainConfig cfg = spec.fsq_train;
      cfg.threads = spec.threads;
      const FsqInit shape{spec.fsq_levels, static_cast<int>(data.front().features.dim()), spec.fsq_dim_up,
                          target_labels};
      slot->fsq = fsq_train(targets, shape, cfg).model;
    }
    return *slot;
  };

  AsrConfig asr_cfg = spec.asr;
  asr_cfg.train.threads = spec.threads;
  auto train_pipeline = [&](Pipeline p) {
    std::vector<AsrSample> samples;
    samples.reserve(in_train.size());
    if (p.tokenizer && p.sw_vocab > 0) {
      // BPE merges are learned from the training split's token streams.
      std::vector<TokenSequence> streams;
      for (const auto& u : in_train) {
        TokenSequence t = p.tokenizer->encode(u.features);
        streams.push_back(p.dd ? dedup(t) : t);
      }
      p.bpe = bpe_train(streams, p.sw_vocab);
    }
    for (const auto& u : in_train) samples.push_back({p.input(u.features), u.labels});
    AsrTrainResult r = asr_train(samples, num_labels, asr_cfg);
    p.asr = std::move(r.model);
    p.skipped = r.skipped;
    return p;
  };

  std::vector<RowResult> rows;
  std::vector<Pipeline> pipelines;
  if (spec.continuous_baseline) {
    RowResult row;
    row.spec.name = "Continuous features";
    row.continuous = true;
    pipelines.push_back(train_pipeline(Pipeline{}));
    row.skipped_train = pipelines.back().skipped;
    rows.push_back(row);
  }
  for (const auto& x : spec.experiments) {
    Pipeline p;
    p.tokenizer = &tokenizer_for(x.tokenizer, x.out_of_domain_tokenizer);
    p.dd = x.dd;
    if (x.sw) p.sw_vocab = x.sw_vocab;
    pipelines.push_back(train_pipeline(std::move(p)));
    RowResult row;
    row.spec = x;
    row.skipped_train = pipelines.back().skipped;
    rows.push_back(row);
  }

  // ---- evaluation phase.
  const std::vector<Utterance> dev = load_utterances(spec.in_domain.dev, 0, log, "eval", "dev");
  const std::vector<Utterance> test = load_utterances(spec.in_domain.test, 0, log, "eval", "test");
  double test_duration = 0.0;
  for (const auto& u : test) test_duration += u.features.duration_sec();

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Pipeline& p = pipelines[i];
    auto score = [&](const std::vector<Utterance>& set, std::int64_t* tokens) {
      std::vector<WordSequence> hyp, ref;
      for (const auto& u : set) {
        const AsrInput in = p.input(u.features);
        if (tokens) *tokens += static_cast<std::int64_t>(std::visit([](const auto& x) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(x)>, TokenSequence>) return x.size();
          else return x.num_frames();
        }, in));
        hyp.push_back(symbols_from_labels(asr_decode(p.asr, in)));
        ref.push_back(symbols_from_labels(u.labels));
      }
      return word_error_rate(hyp, ref).wer_percent;
    };
    RowResult& row = rows[i];
    std::int64_t test_tokens = 0;
    row.wer_dev = score(dev, nullptr);
    row.wer_test = score(test, &test_tokens);
    if (row.continuous) {
      const FrameMatrix& f = test.front().features;
      row.vocab_size = 0;
      row.bitrate = continuous_bitrate(static_cast<std::int64_t>(f.dim()), 32, f.frame_rate_hz());
    } else {
      row.vocab_size = p.bpe ? p.bpe->vocab_size() : p.tokenizer->vocab();
      row.bitrate = token_bitrate(test_tokens, test_duration, row.vocab_size).bits_per_second;
    }
  }

  CompareReport report;
  for (auto kind : {TokenizerKind::kKmeans, TokenizerKind::kFsq}) {
    const auto it = tokenizers.find({kind, false});
    if (it == tokenizers.end()) continue;
    std::vector<TokenSequence> streams;
    for (const auto& u : test) streams.push_back(it->second->encode(u.features));
    report.usage.push_back({to_string(kind), distribution_stats(streams, it->second->vocab(), 0.8)});
  }
  report.rows = std::move(rows);

  std::ostringstream md;
  md << "| Feature | Tokenizer data | DD | SW | Vocab | WER dev | WER test | Bitrate |\n";
  md << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    const std::string tick = "✓", cross = "✗";
    md << "| " << r.spec.name << " | "
       << (r.continuous ? "-" : (r.spec.out_of_domain_tokenizer ? "out-of-domain" : "in-domain")) << " | "
       << (r.continuous ? "-" : (r.spec.dd ? tick : cross)) << " | "
       << (r.continuous ? "-" : (r.spec.sw ? tick : cross)) << " | "
       << (r.continuous ? std::string("-") : std::to_string(r.vocab_size)) << " | " << fmt(r.wer_dev, 1) << " | "
       << fmt(r.wer_test, 1) << " | " << (r.continuous ? fmt(r.bitrate, 0) : fmt(r.bitrate, 1)) << " |\n";
  }
  if (!report.usage.empty()) {
    md << "\n| Tokenizer | Codebook | Used | Utilization | Entropy (bits) | Tokens for 80% |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& u : report.usage)
      md << "| " << u.tokenizer << " | " << u.report.vocab_size << " | " << u.report.sorted_frequencies.size()
         << " | " << fmt(u.report.utilization, 3) << " | " << fmt(u.report.entropy_bits, 3) << " | "
         << u.report.threshold_index << " |\n";
  }
  report.markdown = md.str();
  return report;
}

}  // namespace semtok
