#include "semtok/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "semtok/error.hpp"

namespace semtok {
namespace detail {

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all_bytes(const std::vector<char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::string read_all_text(const std::filesystem::path& path) {
  auto bytes = read_all_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_all_text(const std::string& text, const std::filesystem::path& path) {
  write_all_bytes(std::vector<char>(text.begin(), text.end()), path);
}

}  // namespace detail

namespace {

constexpr std::string_view kFeatureMagic = "SFM0";
constexpr std::uint32_t kFeatureVersion = 1;

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_frame_matrix(const FrameMatrix& matrix, const std::filesystem::path& path) {
  const Matrix& v = matrix.values();
  detail::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(matrix.dim()));
  w.u64(matrix.num_frames());
  w.f64(matrix.frame_rate_hz());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const float f = static_cast<float>(v(r, c));
      require(std::isfinite(f), ErrorCode::kNonFinite, "value does not fit in float32");
      w.f32(f);
    }
  }
  detail::write_all_bytes(w.bytes(), path);
}

FrameMatrix read_frame_matrix(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_all_bytes(path));
  require(r.has_magic(kFeatureMagic), ErrorCode::kMalformedHeader,
          "'" + path.string() + "' is not a feature file");
  constexpr auto hdr = ErrorCode::kMalformedHeader;
  const std::uint32_t version = r.u32(hdr);
  require(version == kFeatureVersion, hdr, "unsupported feature file version " + std::to_string(version));
  const std::uint32_t dim = r.u32(hdr);
  const std::uint64_t frames = r.u64(hdr);
  const double rate = r.f64(hdr);
  require(dim >= 1, hdr, "feature dim must be >= 1");
  require(std::isfinite(rate) && rate > 0, hdr, "frame rate must be positive");
  const std::uint64_t expected = frames * dim * 4;
  require(frames <= std::numeric_limits<std::uint64_t>::max() / (4ull * dim), hdr, "frame count overflows");
  require(r.remaining() >= expected, ErrorCode::kTruncatedPayload,
          "'" + path.string() + "' payload shorter than header declares");
  require(r.remaining() == expected, hdr, "trailing bytes after payload");
  Matrix values(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const float f = r.f32(ErrorCode::kTruncatedPayload);
      require(std::isfinite(f), ErrorCode::kNonFinite, "'" + path.string() + "' contains NaN/Inf");
      values(i, j) = f;
    }
  return FrameMatrix(std::move(values), rate);
}

std::string format_token_line(const TokenRecord& record) {
  std::string line = record.utterance_id;
  line.push_back('\t');
  char buf[24];
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    if (i) line.push_back(' ');
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), record.tokens[i]);
    line.append(buf, end);
  }
  return line;
}

TokenRecord parse_token_line(const std::string& line) {
  const auto tab = line.find('\t');
  require(tab != std::string::npos && tab > 0, ErrorCode::kParse, "token line lacks '<id>\\t': " + line);
  TokenRecord rec{line.substr(0, tab), {}};
  for (const auto& field : split_whitespace(line.substr(tab + 1))) {
    Token value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    require(ec == std::errc() && ptr == field.data() + field.size() && value >= 0, ErrorCode::kParse,
            "bad token id '" + field + "'");
    rec.tokens.push_back(value);
  }
  return rec;
}

std::vector<TokenRecord> read_token_file(const std::filesystem::path& path) {
  std::vector<TokenRecord> out;
  for (const auto& line : split_lines(detail::read_all_text(path)))
    if (!line.empty()) out.push_back(parse_token_line(line));
  return out;
}

void write_token_file(const std::vector<TokenRecord>& records, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) {
    text += format_token_line(r);
    text.push_back('\n');
  }
  detail::write_all_text(text, path);
}

std::vector<TranscriptRecord> read_transcript_file(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> out;
  for (const auto& line : split_lines(detail::read_all_text(path))) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos && tab > 0, ErrorCode::kParse, "transcript line lacks '<id>\\t': " + line);
    out.push_back({line.substr(0, tab), split_whitespace(line.substr(tab + 1))});
  }
  return out;
}

void write_transcript_file(const std::vector<TranscriptRecord>& records,
                           const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) {
    text += r.utterance_id;
    text.push_back('\t');
    for (std::size_t i = 0; i < r.symbols.size(); ++i) {
      if (i) text.push_back(' ');
      text += r.symbols[i];
    }
    text.push_back('\n');
  }
  detail::write_all_text(text, path);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::vector<ManifestEntry> entries;
  bool first = true;
  for (const auto& line : split_lines(detail::read_all_text(path))) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("utterance_id\t", 0) == 0) continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    require(t2 != std::string::npos, ErrorCode::kParse, "manifest row needs 3 columns: " + line);
    entries.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                       split_whitespace(line.substr(t2 + 1))});
  }
  return Manifest(std::move(entries));
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::string text = "utterance_id\tfeature_path\ttranscript\n";
  for (const auto& e : manifest.entries()) {
    text += e.utterance_id + '\t' + e.feature_path + '\t';
    for (std::size_t i = 0; i < e.transcript.size(); ++i) {
      if (i) text.push_back(' ');
      text += e.transcript[i];
    }
    text.push_back('\n');
  }
  detail::write_all_text(text, path);
}

std::filesystem::path resolve_feature_path(const std::filesystem::path& manifest_path,
                                           const ManifestEntry& entry) {
  std::filesystem::path p(entry.feature_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace semtok
