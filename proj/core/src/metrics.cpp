#include "semtok/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semtok/error.hpp"

namespace semtok {

BitrateReport token_bitrate(std::int64_t total_tokens, double total_duration_sec, std::int64_t vocab_size) {
  require(std::isfinite(total_duration_sec) && total_duration_sec > 0.0, ErrorCode::kInvalidArgument,
          "duration must be positive");
  require(vocab_size >= 2, ErrorCode::kInvalidArgument, "vocab size must be >= 2");
  require(total_tokens >= 0, ErrorCode::kInvalidArgument, "token count must be >= 0");
  BitrateReport r;
  r.total_tokens = total_tokens;
  r.total_duration_sec = total_duration_sec;
  r.bits_per_token = std::log2(static_cast<double>(vocab_size));
  r.tokens_per_second = static_cast<double>(total_tokens) / total_duration_sec;
  r.bits_per_second = r.tokens_per_second * r.bits_per_token;
  return r;
}

BitrateReport token_bitrate(std::span<const TokenSequence> corpus, double total_duration_sec,
                            std::int64_t vocab_size) {
  std::int64_t total = 0;
  for (const auto& s : corpus) total += static_cast<std::int64_t>(s.size());
  return token_bitrate(total, total_duration_sec, vocab_size);
}

double continuous_bitrate(std::int64_t dim, std::int64_t bits_per_value, double frame_rate_hz) {
  require(dim > 0 && bits_per_value > 0 && frame_rate_hz > 0, ErrorCode::kInvalidArgument,
          "dim, bits and frame rate must be positive");
  return static_cast<double>(dim) * static_cast<double>(bits_per_value) * frame_rate_hz;
}

DistributionReport distribution_from_counts(std::span<const std::int64_t> counts, double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument, "threshold must be in (0, 1]");
  require(!counts.empty(), ErrorCode::kInvalidArgument, "vocab size must be >= 1");
  DistributionReport r;
  r.threshold = threshold;
  r.vocab_size = static_cast<std::int64_t>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    require(counts[i] >= 0, ErrorCode::kInvalidArgument, "negative count");
    if (counts[i] > 0) r.sorted_frequencies.emplace_back(static_cast<Token>(i), counts[i]);
    r.total_count += counts[i];
  }
  std::stable_sort(r.sorted_frequencies.begin(), r.sorted_frequencies.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (r.total_count == 0) {
    r.empty_corpus = true;
    return r;
  }
  const auto total = static_cast<double>(r.total_count);
  r.utilization = static_cast<double>(r.sorted_frequencies.size()) / static_cast<double>(r.vocab_size);
  for (const auto& [id, c] : r.sorted_frequencies) {
    const double p = static_cast<double>(c) / total;
    r.entropy_bits -= p * std::log2(p);
  }
  r.entropy_bits = std::max(0.0, r.entropy_bits);
  // Integer comparison: cumulative/total >= threshold without rounding drift
  // when threshold*total is integral.
  const double needed = threshold * total;
  std::int64_t cumulative = 0;
  for (std::size_t m = 0; m < r.sorted_frequencies.size(); ++m) {
    cumulative += r.sorted_frequencies[m].second;
    if (static_cast<double>(cumulative) >= needed - 1e-9 * total) {
      r.threshold_index = static_cast<std::int64_t>(m + 1);
      break;
    }
  }
  return r;
}

DistributionReport distribution_stats(std::span<const TokenSequence> corpus, std::int64_t vocab_size,
                                      double threshold) {
  require(vocab_size >= 1, ErrorCode::kInvalidArgument, "vocab size must be >= 1");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(vocab_size), 0);
  for (const auto& s : corpus)
    for (Token t : s.tokens()) {
      require(t < vocab_size, ErrorCode::kOutOfRange, "token " + std::to_string(t) + " >= vocab size");
      ++counts[static_cast<std::size_t>(t)];
    }
  return distribution_from_counts(counts, threshold);
}

WerResult align_words(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const std::size_t H = hyp.size();
  const std::size_t R = ref.size();
  // cost[i][j]: edits to turn ref[0..i) into hyp[0..j).
  std::vector<std::vector<std::int64_t>> cost(R + 1, std::vector<std::int64_t>(H + 1, 0));
  for (std::size_t i = 0; i <= R; ++i) cost[i][0] = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= H; ++j) cost[0][j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= R; ++i)
    for (std::size_t j = 1; j <= H; ++j) {
      const std::int64_t diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({diag, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }
  WerResult r;
  r.reference_words = static_cast<std::int64_t>(R);
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  if (R > 0)
    r.wer_percent = 100.0 * static_cast<double>(r.substitutions + r.deletions + r.insertions) / static_cast<double>(R);
  return r;
}

WerResult word_error_rate(std::span<const WordSequence> hyp, std::span<const WordSequence> ref) {
  require(hyp.size() == ref.size(), ErrorCode::kInvalidArgument,
          "hypothesis and reference corpora differ in length");
  WerResult total;
  for (std::size_t u = 0; u < hyp.size(); ++u) {
    const WerResult r = align_words(hyp[u], ref[u]);
    total.substitutions += r.substitutions;
    total.deletions += r.deletions;
    total.insertions += r.insertions;
    total.reference_words += r.reference_words;
  }
  require(total.reference_words > 0, ErrorCode::kInvalidArgument, "reference corpus has no words");
  total.wer_percent = 100.0 * static_cast<double>(total.substitutions + total.deletions + total.insertions) /
                      static_cast<double>(total.reference_words);
  return total;
}

std::string to_json(const BitrateReport& r) {
  nlohmann::ordered_json j;
  j["bits_per_second"] = r.bits_per_second;
  j["tokens_per_second"] = r.tokens_per_second;
  j["bits_per_token"] = r.bits_per_token;
  j["total_tokens"] = r.total_tokens;
  j["total_duration_sec"] = r.total_duration_sec;
  return j.dump();
}

std::string to_json(const DistributionReport& r) {
  nlohmann::ordered_json j;
  auto freq = nlohmann::ordered_json::array();
  for (const auto& [id, c] : r.sorted_frequencies) freq.push_back({id, c});
  j["sorted_frequencies"] = std::move(freq);
  j["entropy_bits"] = r.entropy_bits;
  j["utilization"] = r.utilization;
  j["threshold_index"] = r.threshold_index;
  j["threshold"] = r.threshold;
  j["vocab_size"] = r.vocab_size;
  j["total_count"] = r.total_count;
  j["empty_corpus"] = r.empty_corpus;
  return j.dump();
}

std::string to_json(const WerResult& r) {
  nlohmann::ordered_json j;
  j["wer_percent"] = r.wer_percent;
  j["substitutions"] = r.substitutions;
  j["deletions"] = r.deletions;
  j["insertions"] = r.insertions;
  j["reference_words"] = r.reference_words;
  return j.dump();
}

void write_distribution_csv(const DistributionReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create '" + path.string() + "'");
  out.imbue(std::locale::classic());
  out.precision(10);
  out << "rank,token_id,count,cumulative_share\n";
  std::int64_t cumulative = 0;
  for (std::size_t i = 0; i < r.sorted_frequencies.size(); ++i) {
    cumulative += r.sorted_frequencies[i].second;
    out << i + 1 << ',' << r.sorted_frequencies[i].first << ',' << r.sorted_frequencies[i].second << ','
        << static_cast<double>(cumulative) / static_cast<double>(r.total_count) << '\n';
  }
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_distribution_svg(const DistributionReport& r, const std::filesystem::path& path,
                            const std::string& title) {
  constexpr double kWidth = 800, kHeight = 400, kMargin = 50;
  const double plot_w = kWidth - 2 * kMargin;
  const double plot_h = kHeight - 2 * kMargin;
  const auto bars = static_cast<double>(std::max<std::int64_t>(r.vocab_size, 1));
  const double max_count =
      r.sorted_frequencies.empty() ? 1.0 : static_cast<double>(r.sorted_frequencies.front().second);
  std::ostringstream svg;
  svg.imbue(std::locale::classic());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";
  const double bar_w = plot_w / bars;
  for (std::size_t i = 0; i < r.sorted_frequencies.size(); ++i) {
    const double h = plot_h * static_cast<double>(r.sorted_frequencies[i].second) / max_count;
    svg << "<rect x=\"" << kMargin + bar_w * static_cast<double>(i) << "\" y=\"" << kMargin + plot_h - h
        << "\" width=\"" << std::max(bar_w, 0.5) << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
  }
  if (r.threshold_index > 0) {
    const double x = kMargin + bar_w * static_cast<double>(r.threshold_index);
    svg << "<line x1=\"" << x << "\" y1=\"" << kMargin << "\" x2=\"" << x << "\" y2=\"" << kMargin + plot_h
        << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << x + 4 << "\" y=\"" << kMargin + 14 << "\" font-size=\"12\" fill=\"red\">"
        << static_cast<int>(std::lround(r.threshold * 100)) << "% at rank " << r.threshold_index << "</text>\n";
  }
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin + plot_h << "\" x2=\"" << kMargin + plot_w
      << "\" y2=\"" << kMargin + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">token rank (descending frequency)</text>\n";
  svg << "</svg>\n";
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create '" + path.string() + "'");
  out << svg.str();
}

}  // namespace semtok
