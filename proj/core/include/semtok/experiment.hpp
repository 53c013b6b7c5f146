#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semtok/asr.hpp"
#include "semtok/fsq.hpp"
#include "semtok/kmeans.hpp"
#include "semtok/metrics.hpp"
#include "semtok/synth.hpp"
#include "semtok/train.hpp"

namespace semtok {

enum class TokenizerKind { kKmeans, kFsq };
std::string to_string(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(const std::string& text);

/// Where a domain's data comes from: either generated on the fly or read from
/// existing manifests. `lexicon` (a corpus.json) enables phoneme-spelled
/// targets for FSQ tokenizer training.
struct DomainSource {
  std::optional<SynthConfig> synth;
  std::filesystem::path train, dev, test;
  std::optional<std::filesystem::path> lexicon;
};

/// One row of the comparison: tokenizer, which domain trained it, post-processing.
struct ExperimentSpec {
  std::string name;
  TokenizerKind tokenizer = TokenizerKind::kKmeans;
  bool out_of_domain_tokenizer = false;
  bool dd = false;
  bool sw = false;
  std::int64_t sw_vocab = 0;
};

struct CompareSpec {
  std::uint64_t seed = 0;
  std::array<double, 3> split{0.7, 0.15, 0.15};
  DomainSource in_domain;
  DomainSource out_of_domain;
  KmeansConfig kmeans;
  FsqLevels fsq_levels = low_bitrate_fsq_levels();
  int fsq_dim_up = 16;
  TrainConfig fsq_train;
  AsrConfig asr;
  bool continuous_baseline = true;
  std::vector<ExperimentSpec> experiments;
  int threads = 1;
};

/// Parses the JSON experiment description; relative paths resolve against `base_dir`.
CompareSpec parse_compare_spec(const std::string& json_text, const std::filesystem::path& base_dir);
CompareSpec load_compare_spec(const std::filesystem::path& path);

/// Records every feature file read together with the phase reading it.
struct IoLog {
  struct Entry {
    std::string phase;  // "train" or "eval"
    std::string split;  // "train", "dev" or "test"
    std::string path;
  };
  std::vector<Entry> entries;
  void write(const std::filesystem::path& path) const;
};

struct RowResult {
  ExperimentSpec spec;
  bool continuous = false;
  std::int64_t vocab_size = 0;
  double wer_dev = 0.0;
  double wer_test = 0.0;
  double bitrate = 0.0;  // bits/sec on the test split
  std::size_t skipped_train = 0;
};

struct UsageResult {
  std::string tokenizer;
  DistributionReport report;
};

struct CompareReport {
  std::vector<RowResult> rows;
  std::vector<UsageResult> usage;
  std::string markdown;

  const RowResult& row(const std::string& name) const;
};

CompareReport run_compare(const CompareSpec& spec, const std::filesystem::path& work_dir, IoLog* log = nullptr);

/// Loads a manifest's utterances; transcripts are integer word ids.
/// `num_labels` of 0 infers the inventory from the largest id present.
std::vector<Utterance> load_utterances(const std::filesystem::path& manifest_path, int num_labels,
                                       IoLog* log = nullptr, const std::string& phase = "",
                                       const std::string& split = "");

}  // namespace semtok
