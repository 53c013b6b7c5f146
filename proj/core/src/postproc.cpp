#include "semtok/postproc.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "semtok/error.hpp"

namespace semtok {

TokenSequence dedup(const TokenSequence& seq) {
  std::vector<Token> out;
  out.reserve(seq.size());
  for (Token t : seq.tokens())
    if (out.empty() || out.back() != t) out.push_back(t);
  return TokenSequence(std::move(out), seq.vocab_size());
}

BpeModel::BpeModel(Token base_vocab, std::vector<BpeMerge> merges)
    : base_vocab_(base_vocab), merges_(std::move(merges)) {
  require(base_vocab_ >= 1, ErrorCode::kInvalidArgument, "base vocab must be >= 1");
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const BpeMerge& m = merges_[i];
    require(m.new_id == base_vocab_ + static_cast<Token>(i), ErrorCode::kInvalidArgument,
            "merge " + std::to_string(i) + " must create id " + std::to_string(base_vocab_ + static_cast<Token>(i)));
    require(m.left >= 0 && m.right >= 0 && m.left < m.new_id && m.right < m.new_id, ErrorCode::kInvalidArgument,
            "merge " + std::to_string(i) + " references an id not yet defined");
  }
}

namespace {

void merge_in_place(std::vector<Token>& seq, const BpeMerge& m) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < seq.size();) {
    if (r + 1 < seq.size() && seq[r] == m.left && seq[r + 1] == m.right) {
      seq[w++] = m.new_id;
      r += 2;
    } else {
      seq[w++] = seq[r++];
    }
  }
  seq.resize(w);
}

}  // namespace

BpeModel bpe_train(std::span<const TokenSequence> corpus, Token target_vocab) {
  require(!corpus.empty(), ErrorCode::kInvalidArgument, "BPE training needs a non-empty corpus");
  const Token base = corpus.front().vocab_size();
  for (const auto& s : corpus)
    require(s.vocab_size() == base, ErrorCode::kVocabMismatch, "corpus sequences have different vocab sizes");
  require(target_vocab >= base, ErrorCode::kInvalidArgument,
          "target vocab " + std::to_string(target_vocab) + " < base vocab " + std::to_string(base));

  std::vector<std::vector<Token>> work;
  work.reserve(corpus.size());
  for (const auto& s : corpus) work.push_back(s.tokens());

  std::vector<BpeMerge> merges;
  std::map<std::pair<Token, Token>, std::int64_t> counts;
  for (Token next_id = base; next_id < target_vocab; ++next_id) {
    counts.clear();
    for (const auto& seq : work) {
      std::size_t last_same = static_cast<std::size_t>(-1);
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        if (seq[i] == seq[i + 1]) {
          if (last_same != static_cast<std::size_t>(-1) && last_same + 1 == i && seq[last_same] == seq[i]) {
            last_same = static_cast<std::size_t>(-1);  // overlaps the previous (a, a)
            continue;
          }
          last_same = i;
        }
        ++counts[{seq[i], seq[i + 1]}];
      }
    }
    // std::map iterates in ascending (left, right); strict > keeps the smallest on ties.
    std::pair<Token, Token> best{};
    std::int64_t best_count = 0;
    for (const auto& [pair, c] : counts)
      if (c > best_count) {
        best = pair;
        best_count = c;
      }
    if (best_count < 2) break;
    const BpeMerge m{best.first, best.second, next_id};
    merges.push_back(m);
    for (auto& seq : work) merge_in_place(seq, m);
  }
  return BpeModel(base, std::move(merges));
}

TokenSequence bpe_apply(const TokenSequence& seq, const BpeModel& model) {
  require(seq.vocab_size() == model.base_vocab(), ErrorCode::kVocabMismatch,
          "sequence vocab " + std::to_string(seq.vocab_size()) + " != BPE base vocab " +
              std::to_string(model.base_vocab()));
  std::vector<Token> out = seq.tokens();
  for (const auto& m : model.merges()) {
    if (out.size() < 2) break;
    merge_in_place(out, m);
  }
  return TokenSequence(std::move(out), model.vocab_size());
}

TokenSequence bpe_decode(const TokenSequence& seq, const BpeModel& model) {
  const Token base = model.base_vocab();
  std::vector<Token> out;
  std::vector<Token> stack;
  for (Token t : seq.tokens()) {
    require(t >= 0 && t < model.vocab_size(), ErrorCode::kOutOfRange,
            "token " + std::to_string(t) + " outside BPE vocab");
    stack.push_back(t);
    while (!stack.empty()) {
      const Token top = stack.back();
      stack.pop_back();
      if (top < base) {
        out.push_back(top);
      } else {
        const BpeMerge& m = model.merges()[static_cast<std::size_t>(top - base)];
        stack.push_back(m.right);
        stack.push_back(m.left);
      }
    }
  }
  return TokenSequence(std::move(out), base);
}

void write_bpe_model(const BpeModel& model, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "base_vocab " << model.base_vocab() << '\n';
  for (const auto& m : model.merges()) out << "merge " << m.left << ' ' << m.right << ' ' << m.new_id << '\n';
  detail::write_all_text(out.str(), path);
}

BpeModel read_bpe_model(const std::filesystem::path& path) {
  std::istringstream in(detail::read_all_text(path));
  std::string key;
  Token base = 0;
  require(static_cast<bool>(in >> key >> base) && key == "base_vocab", ErrorCode::kParse,
          "'" + path.string() + "' must start with 'base_vocab <N>'");
  std::vector<BpeMerge> merges;
  while (in >> key) {
    BpeMerge m;
    require(key == "merge" && static_cast<bool>(in >> m.left >> m.right >> m.new_id), ErrorCode::kParse,
            "bad merge line in '" + path.string() + "'");
    merges.push_back(m);
  }
  return BpeModel(base, std::move(merges));
}

}  // namespace semtok
