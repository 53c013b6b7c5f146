#include "semtok/types.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

#include "semtok/error.hpp"

namespace semtok {

FrameMatrix::FrameMatrix(Matrix values, double frame_rate_hz)
    : values_(std::move(values)), frame_rate_hz_(frame_rate_hz) {
  require(values_.cols() >= 1, ErrorCode::kInvalidArgument, "feature dim must be >= 1");
  require(std::isfinite(frame_rate_hz_) && frame_rate_hz_ > 0, ErrorCode::kInvalidArgument,
          "frame rate must be positive");
  require(values_.allFinite(), ErrorCode::kNonFinite, "feature matrix contains NaN or Inf");
}

FrameMatrix FrameMatrix::empty(std::size_t dim, double frame_rate_hz) {
  return FrameMatrix(Matrix(0, static_cast<Eigen::Index>(dim)), frame_rate_hz);
}

TokenSequence::TokenSequence(std::vector<Token> tokens, Token vocab_size)
    : tokens_(std::move(tokens)), vocab_size_(vocab_size) {
  require(vocab_size_ >= 1, ErrorCode::kInvalidArgument, "vocab size must be >= 1");
  for (Token t : tokens_)
    require(t >= 0 && t < vocab_size_, ErrorCode::kOutOfRange,
            "token " + std::to_string(t) + " outside [0, " + std::to_string(vocab_size_) + ")");
}

LabelSequence::LabelSequence(std::vector<int> labels, int num_labels)
    : labels_(std::move(labels)), num_labels_(num_labels) {
  require(num_labels_ >= 1, ErrorCode::kInvalidArgument, "label inventory must be non-empty");
  for (int l : labels_)
    require(l >= 1 && l <= num_labels_, ErrorCode::kOutOfRange,
            "label " + std::to_string(l) + " outside [1, " + std::to_string(num_labels_) + "]");
}

Manifest::Manifest(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    require(!e.utterance_id.empty(), ErrorCode::kInvalidArgument, "empty utterance id");
    require(seen.insert(e.utterance_id).second, ErrorCode::kInvalidArgument,
            "duplicate utterance id '" + e.utterance_id + "'");
  }
}

LabelSequence labels_from_symbols(std::span<const std::string> symbols, int num_labels) {
  std::vector<int> labels;
  labels.reserve(symbols.size());
  for (const auto& s : symbols) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kParse,
            "transcript symbol '" + s + "' is not an integer label id");
    labels.push_back(value);
  }
  return LabelSequence(std::move(labels), num_labels);
}

std::vector<std::string> symbols_from_labels(const LabelSequence& labels) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (int l : labels.labels()) out.push_back(std::to_string(l));
  return out;
}

}  // namespace semtok
