#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

enum class SpeechStyle { kScripted, kSpontaneous };

std::string to_string(SpeechStyle style);
SpeechStyle parse_speech_style(const std::string& text);

struct SynthConfig {
  int dim = 8;
  int num_phonemes = 12;
  int vocab_words = 30;
  SpeechStyle style = SpeechStyle::kSpontaneous;
  double age_shift = 0.0;   // magnitude of the additive offset along the corpus direction
  double noise_sigma = 0.3;
  int content_dim = 0;      // rank of the subspace holding the phoneme means; 0 = dim
  double mean_scale = 1.0;  // std-dev of the mean coordinates inside that subspace
  double noise_correlation = 0.0;  // AR(1) coefficient of the noise between consecutive frames
  int speaker_dim = 0;        // rank of the per-utterance speaker offset, orthogonal to the content
  double speaker_sigma = 0.0;
  int frames_min = 3;       // per-phoneme duration range, in frames
  int frames_max = 6;
  int word_min_phonemes = 2;
  int word_max_phonemes = 3;
  int utterances = 200;
  double frame_rate_hz = 50.0;
  std::uint64_t seed = 0;        // utterance sampling
  std::uint64_t world_seed = 0;  // phoneme means, lexicon, templates, shift direction
  std::string id_prefix = "utt";

  void validate() const;
};

/// Everything shared by corpora generated from the same world seed.
struct SynthWorld {
  Matrix phoneme_means;                  // P x dim
  RowVector shift_direction;             // unit vector
  Matrix speaker_basis;                  // speaker_dim x dim, orthonormal rows
  std::vector<std::vector<int>> lexicon; // word id - 1 -> phoneme ids in [1, P]
  std::vector<std::vector<int>> templates;  // scripted sentences (word ids)
};

SynthWorld synth_world(const SynthConfig& config);

struct SynthCorpus {
  SynthConfig config;
  SynthWorld world;
  std::vector<Utterance> utterances;
  std::vector<LabelSequence> phoneme_labels;  // per utterance, phoneme id per segment
  Manifest manifest;  // feature paths relative to the corpus directory
};

SynthCorpus synth_generate(const SynthConfig& config);

/// Expands word labels to their phoneme spelling via the lexicon.
LabelSequence spell_words(const LabelSequence& words, const std::vector<std::vector<int>>& lexicon,
                          int num_phonemes);

/// Writes `feats/<id>.sfm`, `manifest.tsv` and `corpus.json` under `dir`.
void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

struct SynthMetadata {
  SynthConfig config;
  SynthWorld world;
};
SynthMetadata read_synth_metadata(const std::filesystem::path& corpus_json);

struct SplitManifests {
  Manifest train;
  Manifest dev;
  Manifest test;
};

/// Seeded shuffle of utterance ids, cut by largest-remainder rounding of the
/// fractions (ties go to the later split). Each part keeps manifest order.
SplitManifests synth_split(const Manifest& corpus, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace semtok
