#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

struct BitrateReport {
  double bits_per_second = 0.0;
  double tokens_per_second = 0.0;
  double bits_per_token = 0.0;
  std::int64_t total_tokens = 0;
  double total_duration_sec = 0.0;
};

/// bits/sec = (total tokens / duration) * log2(vocab_size).
BitrateReport token_bitrate(std::span<const TokenSequence> corpus, double total_duration_sec,
                            std::int64_t vocab_size);
BitrateReport token_bitrate(std::int64_t total_tokens, double total_duration_sec, std::int64_t vocab_size);

/// Bitrate of raw continuous features: dim * bits_per_value * frame_rate.
double continuous_bitrate(std::int64_t dim, std::int64_t bits_per_value, double frame_rate_hz);

struct DistributionReport {
  std::vector<std::pair<Token, std::int64_t>> sorted_frequencies;  // descending count, ascending id on ties
  double entropy_bits = 0.0;
  double utilization = 0.0;
  std::int64_t threshold_index = 0;  // smallest m whose top-m share reaches `threshold`
  double threshold = 0.8;
  std::int64_t vocab_size = 0;
  std::int64_t total_count = 0;
  bool empty_corpus = false;
};

/// Codebook usage statistics. Only tokens with count > 0 are listed.
DistributionReport distribution_stats(std::span<const TokenSequence> corpus, std::int64_t vocab_size,
                                      double threshold = 0.8);
DistributionReport distribution_from_counts(std::span<const std::int64_t> counts, double threshold = 0.8);

struct WerResult {
  double wer_percent = 0.0;
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t reference_words = 0;
};

using WordSequence = std::vector<std::string>;

/// Unit-cost Levenshtein alignment of one hypothesis against one reference.
/// Among minimum-cost alignments, substitutions are preferred over an
/// insertion + deletion pair.
WerResult align_words(std::span<const std::string> hyp, std::span<const std::string> ref);
WerResult word_error_rate(std::span<const WordSequence> hyp, std::span<const WordSequence> ref);

std::string to_json(const BitrateReport& report);
std::string to_json(const DistributionReport& report);
std::string to_json(const WerResult& result);

// `rank,token_id,count,cumulative_share`, rank starting at 1.
void write_distribution_csv(const DistributionReport& report, const std::filesystem::path& path);
// Static bar chart of counts by rank with the threshold marked.
void write_distribution_svg(const DistributionReport& report, const std::filesystem::path& path,
                            const std::string& title = "Token frequency distribution");

}  // namespace semtok
