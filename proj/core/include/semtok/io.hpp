#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

// Feature file: "SFM0" | u32 version=1 | u32 dim | u64 num_frames | f64 frame_rate |
// num_frames*dim f32, all little-endian, row-major.
FrameMatrix read_frame_matrix(const std::filesystem::path& path);
void write_frame_matrix(const FrameMatrix& matrix, const std::filesystem::path& path);

struct TokenRecord {
  std::string utterance_id;
  std::vector<Token> tokens;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

// Token file: one utterance per line, `<id>\t<space separated decimal ids>`.
std::vector<TokenRecord> read_token_file(const std::filesystem::path& path);
void write_token_file(const std::vector<TokenRecord>& records, const std::filesystem::path& path);
std::string format_token_line(const TokenRecord& record);
TokenRecord parse_token_line(const std::string& line);

// Transcript file: same layout as the token file but with arbitrary
// whitespace-free symbols instead of integers.
struct TranscriptRecord {
  std::string utterance_id;
  std::vector<std::string> symbols;
};
std::vector<TranscriptRecord> read_transcript_file(const std::filesystem::path& path);
void write_transcript_file(const std::vector<TranscriptRecord>& records,
                           const std::filesystem::path& path);

// Manifest: TSV with header `utterance_id\tfeature_path\ttranscript`.
// Relative feature paths are resolved against the manifest's directory by
// `resolve_feature_path`.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::filesystem::path resolve_feature_path(const std::filesystem::path& manifest_path,
                                           const ManifestEntry& entry);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace semtok
