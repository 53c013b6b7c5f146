#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

/// Collapses runs of equal adjacent tokens to one token.
TokenSequence dedup(const TokenSequence& seq);

struct BpeMerge {
  Token left = 0;
  Token right = 0;
  Token new_id = 0;

  friend bool operator==(const BpeMerge&, const BpeMerge&) = default;
};

/// Ordered merge table. New ids are consecutive from base_vocab and each
/// merge only references ids created before it.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(Token base_vocab, std::vector<BpeMerge> merges);

  Token base_vocab() const { return base_vocab_; }
  Token vocab_size() const { return base_vocab_ + static_cast<Token>(merges_.size()); }
  const std::vector<BpeMerge>& merges() const { return merges_; }

  friend bool operator==(const BpeModel&, const BpeModel&) = default;

 private:
  Token base_vocab_ = 1;
  std::vector<BpeMerge> merges_;
};

/// Greedy BPE over raw token streams: repeatedly merges the most frequent
/// adjacent pair (smallest (left, right) on ties), recounting after every
/// merge, until target_vocab is reached or no pair occurs at least twice.
/// Occurrences of (a, a) are counted without overlap.
BpeModel bpe_train(std::span<const TokenSequence> corpus, Token target_vocab);

/// Applies merges in training order, each left-to-right over the sequence.
TokenSequence bpe_apply(const TokenSequence& seq, const BpeModel& model);

/// Expands merged ids back to base tokens.
TokenSequence bpe_decode(const TokenSequence& seq, const BpeModel& model);

// Text format: `base_vocab <N>` then one `merge <left> <right> <new_id>` per line.
void write_bpe_model(const BpeModel& model, const std::filesystem::path& path);
BpeModel read_bpe_model(const std::filesystem::path& path);

}  // namespace semtok
