#include "semtok/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "semtok/error.hpp"
#include "semtok/io.hpp"

namespace semtok {
namespace {

constexpr int kTemplates = 10;
constexpr int kScriptedVocab = 20;
constexpr int kMaxMeanResamples = 1000;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string utterance_id(const SynthConfig& config, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return config.id_prefix + buf;
}

}  // namespace

std::string to_string(SpeechStyle style) {
  return style == SpeechStyle::kScripted ? "scripted" : "spontaneous";
}

SpeechStyle parse_speech_style(const std::string& text) {
  if (text == "scripted") return SpeechStyle::kScripted;
  if (text == "spontaneous") return SpeechStyle::kSpontaneous;
  fail(ErrorCode::kInvalidArgument, "style must be 'scripted' or 'spontaneous', got '" + text + "'");
}

void SynthConfig::validate() const {
  require(dim >= 2, ErrorCode::kInvalidArgument, "synth dim must be >= 2");
  require(num_phonemes >= 2, ErrorCode::kInvalidArgument, "num_phonemes must be >= 2");
  require(vocab_words >= 1, ErrorCode::kInvalidArgument, "vocab_words must be >= 1");
  require(frames_min >= 1 && frames_max >= frames_min, ErrorCode::kInvalidArgument,
          "need 1 <= frames_min <= frames_max");
  require(word_min_phonemes >= 1 && word_max_phonemes >= word_min_phonemes, ErrorCode::kInvalidArgument,
          "need 1 <= word_min_phonemes <= word_max_phonemes");
  require(std::isfinite(noise_sigma) && noise_sigma > 0.0, ErrorCode::kInvalidArgument, "noise_sigma must be > 0");
  require(std::isfinite(age_shift), ErrorCode::kInvalidArgument, "age_shift must be finite");
  require(content_dim >= 0 && content_dim <= dim, ErrorCode::kInvalidArgument, "need 0 <= content_dim <= dim");
  require(noise_correlation >= 0.0 && noise_correlation < 1.0, ErrorCode::kInvalidArgument,
          "noise_correlation must be in [0, 1)");
  require(speaker_dim >= 0 && std::isfinite(speaker_sigma) && speaker_sigma >= 0.0, ErrorCode::kInvalidArgument,
          "need speaker_dim >= 0 and speaker_sigma >= 0");
  require(speaker_dim == 0 || (content_dim > 0 && content_dim + speaker_dim <= dim), ErrorCode::kInvalidArgument,
          "speaker_dim needs content_dim > 0 and content_dim + speaker_dim <= dim");
  require(std::isfinite(mean_scale) && mean_scale > 0.0, ErrorCode::kInvalidArgument, "mean_scale must be > 0");
  require(utterances >= 0, ErrorCode::kInvalidArgument, "utterances must be >= 0");
  require(std::isfinite(frame_rate_hz) && frame_rate_hz > 0.0, ErrorCode::kInvalidArgument,
          "frame_rate_hz must be > 0");
}

SynthWorld synth_world(const SynthConfig& config) {
  config.validate();
  SynthWorld world;
  auto rng = stream(config.world_seed, 0, 0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Phoneme means: normal draws inside a content_dim-rank subspace, resampled
  // until every pair is at least 4 sigma apart.
  // The speaker subspace is orthogonal to the content subspace.
  const int rank = config.content_dim == 0 ? config.dim : config.content_dim;
  Matrix basis = Matrix::Identity(rank, config.dim);
  world.speaker_basis = Matrix::Zero(config.speaker_dim, config.dim);
  if (rank < config.dim) {
    Matrix g(config.dim, config.dim);
    for (int i = 0; i < config.dim; ++i)
      for (int j = 0; j < config.dim; ++j) g(i, j) = normal(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    basis = q.leftCols(rank).transpose();
    world.speaker_basis = q.middleCols(rank, config.speaker_dim).transpose();
  }
  const double min_sep = 4.0 * config.noise_sigma;
  bool separated = false;
  for (int attempt = 0; attempt < kMaxMeanResamples && !separated; ++attempt) {
    Matrix z(config.num_phonemes, rank);
    for (int p = 0; p < config.num_phonemes; ++p)
      for (int j = 0; j < rank; ++j) z(p, j) = config.mean_scale * normal(rng);
    world.phoneme_means = z * basis;
    separated = true;
    for (int a = 0; a < config.num_phonemes && separated; ++a)
      for (int b = a + 1; b < config.num_phonemes; ++b)
        if ((world.phoneme_means.row(a) - world.phoneme_means.row(b)).norm() < min_sep) {
          separated = false;
          break;
        }
  }
  require(separated, ErrorCode::kUnsatisfiable,
          "could not place " + std::to_string(config.num_phonemes) + " phoneme means " +
              std::to_string(min_sep) + " apart in " + std::to_string(kMaxMeanResamples) + " attempts");

  world.shift_direction.resize(config.dim);
  do {
    for (int j = 0; j < config.dim; ++j) world.shift_direction(j) = normal(rng);
  } while (world.shift_direction.norm() < 1e-6);
  world.shift_direction.normalize();

  // Lexicon: distinct phoneme strings, no phoneme repeated back to back.
  std::set<std::vector<int>> seen;
  for (int w = 0; w < config.vocab_words; ++w) {
    std::vector<int> spelling;
    int attempts = 0;
    do {
      require(++attempts <= 10000, ErrorCode::kUnsatisfiable,
              "cannot build " + std::to_string(config.vocab_words) + " distinct words from " +
                  std::to_string(config.num_phonemes) + " phonemes");
      spelling.assign(static_cast<std::size_t>(uniform_int(rng, config.word_min_phonemes, config.word_max_phonemes)), 0);
      for (std::size_t i = 0; i < spelling.size(); ++i) {
        do {
          spelling[i] = uniform_int(rng, 1, config.num_phonemes);
        } while (i > 0 && spelling[i] == spelling[i - 1]);
      }
    } while (!seen.insert(spelling).second);
    world.lexicon.push_back(std::move(spelling));
  }

  const int scripted_vocab = std::min(config.vocab_words, kScriptedVocab);
  for (int t = 0; t < kTemplates; ++t) {
    std::vector<int> sentence(static_cast<std::size_t>(uniform_int(rng, 3, 8)));
    for (auto& w : sentence) w = uniform_int(rng, 1, scripted_vocab);
    world.templates.push_back(std::move(sentence));
  }
  return world;
}

LabelSequence spell_words(const LabelSequence& words, const std::vector<std::vector<int>>& lexicon,
                          int num_phonemes) {
  std::vector<int> phonemes;
  for (int w : words.labels()) {
    require(w >= 1 && static_cast<std::size_t>(w) <= lexicon.size(), ErrorCode::kOutOfRange,
            "word " + std::to_string(w) + " not in lexicon");
    const auto& s = lexicon[static_cast<std::size_t>(w - 1)];
    phonemes.insert(phonemes.end(), s.begin(), s.end());
  }
  return LabelSequence(std::move(phonemes), num_phonemes);
}

SynthCorpus synth_generate(const SynthConfig& config) {
  SynthCorpus corpus{config, synth_world(config), {}, {}, {}};
  const SynthWorld& world = corpus.world;
  const RowVector offset = config.age_shift * world.shift_direction;
  std::vector<ManifestEntry> entries;

  for (int u = 0; u < config.utterances; ++u) {
    auto rng = stream(config.seed, static_cast<std::uint64_t>(u), 0xa11ce);
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::vector<int> words;
    if (config.style == SpeechStyle::kScripted) {
      words = world.templates[static_cast<std::size_t>(uniform_int(rng, 0, kTemplates - 1))];
    } else {
      words.resize(static_cast<std::size_t>(uniform_int(rng, 3, 12)));
      for (auto& w : words) w = uniform_int(rng, 1, config.vocab_words);
    }
    LabelSequence word_labels(words, config.vocab_words);
    LabelSequence phones = spell_words(word_labels, world.lexicon, config.num_phonemes);

    std::vector<int> durations(phones.size());
    for (auto& d : durations) d = uniform_int(rng, config.frames_min, config.frames_max);
    const int frames = std::accumulate(durations.begin(), durations.end(), 0);
    Matrix values(frames, config.dim);
    RowVector speaker = RowVector::Zero(config.dim);
    if (config.speaker_dim > 0) {
      RowVector coords(config.speaker_dim);
      for (auto& c : coords) c = config.speaker_sigma * unit_normal(rng);
      speaker = coords * world.speaker_basis;
    }

    // AR(1) noise; every frame's marginal stays N(0, sigma^2 I).
    const double rho = config.noise_correlation;
    const double innovation = std::sqrt(1.0 - rho * rho);
    RowVector n = RowVector::Zero(config.dim);
    Eigen::Index row = 0;
    for (std::size_t p = 0; p < phones.size(); ++p) {
      const auto mean = world.phoneme_means.row(phones[p] - 1);
      for (int f = 0; f < durations[p]; ++f, ++row)
        for (int j = 0; j < config.dim; ++j) {
          n(j) = row == 0 ? noise(rng) : rho * n(j) + innovation * noise(rng);
          values(row, j) = mean(j) + n(j) + offset(j) + speaker(j);
        }
    }

    const std::string id = utterance_id(config, u);
    entries.push_back({id, "feats/" + id + ".sfm", symbols_from_labels(word_labels)});
    corpus.utterances.push_back({id, FrameMatrix(std::move(values), config.frame_rate_hz), std::move(word_labels)});
    corpus.phoneme_labels.push_back(std::move(phones));
  }
  corpus.manifest = Manifest(std::move(entries));
  return corpus;
}

namespace {

nlohmann::ordered_json config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["num_phonemes"] = c.num_phonemes;
  j["vocab_words"] = c.vocab_words;
  j["style"] = to_string(c.style);
  j["age_shift"] = c.age_shift;
  j["noise_sigma"] = c.noise_sigma;
  j["content_dim"] = c.content_dim;
  j["mean_scale"] = c.mean_scale;
  j["noise_correlation"] = c.noise_correlation;
  j["speaker_dim"] = c.speaker_dim;
  j["speaker_sigma"] = c.speaker_sigma;
  j["frames_per_phoneme"] = {c.frames_min, c.frames_max};
  j["word_phonemes"] = {c.word_min_phonemes, c.word_max_phonemes};
  j["utterances"] = c.utterances;
  j["frame_rate_hz"] = c.frame_rate_hz;
  j["seed"] = c.seed;
  j["world_seed"] = c.world_seed;
  j["id_prefix"] = c.id_prefix;
  return j;
}

SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.dim = j.at("dim");
  c.num_phonemes = j.at("num_phonemes");
  c.vocab_words = j.at("vocab_words");
  c.style = parse_speech_style(j.at("style"));
  c.age_shift = j.at("age_shift");
  c.noise_sigma = j.at("noise_sigma");
  c.content_dim = j.value("content_dim", 0);
  c.mean_scale = j.value("mean_scale", 1.0);
  c.noise_correlation = j.value("noise_correlation", 0.0);
  c.speaker_dim = j.value("speaker_dim", 0);
  c.speaker_sigma = j.value("speaker_sigma", 0.0);
  c.frames_min = j.at("frames_per_phoneme").at(0);
  c.frames_max = j.at("frames_per_phoneme").at(1);
  c.word_min_phonemes = j.at("word_phonemes").at(0);
  c.word_max_phonemes = j.at("word_phonemes").at(1);
  c.utterances = j.at("utterances");
  c.frame_rate_hz = j.at("frame_rate_hz");
  c.seed = j.at("seed");
  c.world_seed = j.at("world_seed");
  c.id_prefix = j.at("id_prefix");
  return c;
}

}  // namespace

void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "feats");
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
    write_frame_matrix(corpus.utterances[i].features, dir / corpus.manifest[i].feature_path);
  write_manifest(corpus.manifest, dir / "manifest.tsv");

  nlohmann::ordered_json j;
  j["config"] = config_to_json(corpus.config);
  auto means = nlohmann::ordered_json::array();
  for (Eigen::Index p = 0; p < corpus.world.phoneme_means.rows(); ++p) {
    std::vector<double> row(corpus.world.phoneme_means.row(p).begin(), corpus.world.phoneme_means.row(p).end());
    means.push_back(row);
  }
  j["phoneme_means"] = std::move(means);
  j["shift_direction"] = std::vector<double>(corpus.world.shift_direction.begin(), corpus.world.shift_direction.end());
  j["lexicon"] = corpus.world.lexicon;
  j["templates"] = corpus.world.templates;
  detail::write_all_text(j.dump(2) + "\n", dir / "corpus.json");
}

SynthMetadata read_synth_metadata(const std::filesystem::path& corpus_json) {
  try {
    const auto j = nlohmann::json::parse(detail::read_all_text(corpus_json));
    SynthMetadata m;
    m.config = config_from_json(j.at("config"));
    const auto& means = j.at("phoneme_means");
    m.world.phoneme_means.resize(static_cast<Eigen::Index>(means.size()), m.config.dim);
    for (std::size_t p = 0; p < means.size(); ++p)
      for (int d = 0; d < m.config.dim; ++d) m.world.phoneme_means(static_cast<Eigen::Index>(p), d) = means[p].at(d);
    const auto dir = j.at("shift_direction").get<std::vector<double>>();
    m.world.shift_direction = Eigen::Map<const RowVector>(dir.data(), static_cast<Eigen::Index>(dir.size()));
    m.world.lexicon = j.at("lexicon").get<std::vector<std::vector<int>>>();
    m.world.templates = j.at("templates").get<std::vector<std::vector<int>>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "'" + corpus_json.string() + "': " + e.what());
  }
}

SplitManifests synth_split(const Manifest& corpus, std::array<double, 3> fractions, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  require(n >= 3, ErrorCode::kInsufficientData, "need at least 3 utterances to split");
  double sum = 0.0;
  for (double f : fractions) {
    require(std::isfinite(f) && f > 0.0, ErrorCode::kInvalidArgument, "split fractions must be positive");
    sum += f;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kInvalidArgument, "split fractions must sum to 1");

  constexpr double kEps = 1e-9;
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(quota + kEps));
    remainders[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{2, 1, 0};  // later splits first so they win ties
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b] + kEps; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::array<std::vector<std::size_t>, 3> parts;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    parts[i].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + sizes[i]));
    std::sort(parts[i].begin(), parts[i].end());
    pos += sizes[i];
  }
  auto build = [&](const std::vector<std::size_t>& idx) {
    std::vector<ManifestEntry> e;
    for (auto i : idx) e.push_back(corpus[i]);
    return Manifest(std::move(e));
  };
  return {build(parts[0]), build(parts[1]), build(parts[2])};
}

}  // namespace semtok
