#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace semtok {

// Row-major so that one row is one frame and rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Frame-wise continuous features of one utterance: N rows of dimension d,
/// sampled at `frame_rate_hz`. Immutable after construction.
class FrameMatrix {
 public:
  FrameMatrix() = default;
  /// Validates dim >= 1, frame_rate > 0 and that all values are finite.
  FrameMatrix(Matrix values, double frame_rate_hz);
  /// An empty (0 x dim) matrix.
  static FrameMatrix empty(std::size_t dim, double frame_rate_hz);

  std::size_t num_frames() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  double frame_rate_hz() const { return frame_rate_hz_; }
  double duration_sec() const { return static_cast<double>(num_frames()) / frame_rate_hz_; }
  const Matrix& values() const { return values_; }

  friend bool operator==(const FrameMatrix& a, const FrameMatrix& b) {
    return a.frame_rate_hz_ == b.frame_rate_hz_ && a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

 private:
  Matrix values_{0, 1};
  double frame_rate_hz_ = 50.0;
};

using Token = std::int64_t;

/// Discrete tokens of one utterance; every token lies in [0, vocab_size).
class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::vector<Token> tokens, Token vocab_size);

  const std::vector<Token>& tokens() const { return tokens_; }
  Token vocab_size() const { return vocab_size_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  Token operator[](std::size_t i) const { return tokens_[i]; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<Token> tokens_;
  Token vocab_size_ = 1;
};

/// Transcript as class ids in [1, num_labels]; 0 is the CTC blank and never a target.
class LabelSequence {
 public:
  LabelSequence() = default;
  LabelSequence(std::vector<int> labels, int num_labels);

  const std::vector<int>& labels() const { return labels_; }
  int num_labels() const { return num_labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int operator[](std::size_t i) const { return labels_[i]; }

  friend bool operator==(const LabelSequence&, const LabelSequence&) = default;

 private:
  std::vector<int> labels_;
  int num_labels_ = 1;
};

struct ManifestEntry {
  std::string utterance_id;
  std::string feature_path;
  std::vector<std::string> transcript;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Ordered list of utterances; ids are unique.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestEntry> entries);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ManifestEntry& operator[](std::size_t i) const { return entries_[i]; }

  friend bool operator==(const Manifest&, const Manifest&) = default;

 private:
  std::vector<ManifestEntry> entries_;
};

/// A labelled utterance held in memory.
struct Utterance {
  std::string id;
  FrameMatrix features;
  LabelSequence labels;
};

/// Parses transcript symbols as integer label ids in [1, num_labels].
LabelSequence labels_from_symbols(std::span<const std::string> symbols, int num_labels);
std::vector<std::string> symbols_from_labels(const LabelSequence& labels);

}  // namespace semtok
