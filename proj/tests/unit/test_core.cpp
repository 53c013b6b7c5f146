#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

#include "semtok/error.hpp"
#include "semtok/io.hpp"
#include "semtok/types.hpp"
#include "support/temp_dir.hpp"

using namespace semtok;
using semtok::testing::TempDir;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected semtok::Error");
  return ErrorCode::kIo;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

FrameMatrix three_by_two() {
  Matrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  return FrameMatrix(m, 50.0);
}

}  // namespace

TEST_CASE("feature file round trip") {
  TempDir dir;
  const auto f = three_by_two();
  write_frame_matrix(f, dir / "a.sfm");
  const auto back = read_frame_matrix(dir / "a.sfm");
  CHECK(back == f);
  CHECK(back.frame_rate_hz() == 50.0);
  // magic + version + dim + frames + rate + payload
  CHECK(std::filesystem::file_size(dir / "a.sfm") == 4 + 4 + 4 + 8 + 8 + 3 * 2 * 4);
}

TEST_CASE("feature file round trip is element-exact for float32 values") {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 100.0f);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = static_cast<int>(rng() % 7);
    const int cols = 1 + static_cast<int>(rng() % 5);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = static_cast<double>(n(rng));
    const FrameMatrix f(m, 16000.0 / 320.0);
    write_frame_matrix(f, dir / "r.sfm");
    CHECK(read_frame_matrix(dir / "r.sfm") == f);
  }
}

TEST_CASE("empty feature matrix keeps its dim") {
  TempDir dir;
  write_frame_matrix(FrameMatrix::empty(7, 50.0), dir / "e.sfm");
  const auto back = read_frame_matrix(dir / "e.sfm");
  CHECK(back.num_frames() == 0);
  CHECK(back.dim() == 7);
  CHECK(back.duration_sec() == 0.0);
}

TEST_CASE("repeated writes are byte-identical") {
  TempDir dir;
  write_frame_matrix(three_by_two(), dir / "a.sfm");
  write_frame_matrix(three_by_two(), dir / "b.sfm");
  CHECK(slurp(dir / "a.sfm") == slurp(dir / "b.sfm"));
}

TEST_CASE("feature reader distinguishes failure modes") {
  TempDir dir;
  write_frame_matrix(three_by_two(), dir / "ok.sfm");
  const std::string good = slurp(dir / "ok.sfm");

  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(dir / "bad.sfm", bad);
    CHECK(code_of([&] { read_frame_matrix(dir / "bad.sfm"); }) == ErrorCode::kMalformedHeader);
  }
  SUBCASE("wrong version") {
    std::string bad = good;
    bad[4] = 2;
    spit(dir / "bad.sfm", bad);
    CHECK(code_of([&] { read_frame_matrix(dir / "bad.sfm"); }) == ErrorCode::kMalformedHeader);
  }
  SUBCASE("short header") {
    spit(dir / "bad.sfm", good.substr(0, 10));
    CHECK(code_of([&] { read_frame_matrix(dir / "bad.sfm"); }) == ErrorCode::kMalformedHeader);
  }
  SUBCASE("truncated payload") {
    spit(dir / "bad.sfm", good.substr(0, good.size() - 3));
    CHECK(code_of([&] { read_frame_matrix(dir / "bad.sfm"); }) == ErrorCode::kTruncatedPayload);
  }
  SUBCASE("NaN in payload") {
    std::string bad = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 28 + 4, &nan, 4);
    spit(dir / "bad.sfm", bad);
    CHECK(code_of([&] { read_frame_matrix(dir / "bad.sfm"); }) == ErrorCode::kNonFinite);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_frame_matrix(dir / "nope.sfm"); }) == ErrorCode::kIo);
  }
}

TEST_CASE("non-finite values never reach disk") {
  TempDir dir;
  Matrix m(2, 2);
  m << 1, std::numeric_limits<double>::quiet_NaN(), 3, 4;
  CHECK(code_of([&] { FrameMatrix(m, 50.0); }) == ErrorCode::kNonFinite);

  // Finite in double but overflows float32.
  m << 1, 1e300, 3, 4;
  const FrameMatrix huge(m, 50.0);
  CHECK(code_of([&] { write_frame_matrix(huge, dir / "h.sfm"); }) == ErrorCode::kNonFinite);
  CHECK_FALSE(std::filesystem::exists(dir / "h.sfm"));
}

TEST_CASE("domain type invariants") {
  CHECK(code_of([] { FrameMatrix(Matrix(2, 2), 0.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { FrameMatrix(Matrix(2, 0), 50.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { TokenSequence({0, 5}, 5); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { TokenSequence({-1}, 5); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { LabelSequence({1, 0}, 3); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { LabelSequence({4}, 3); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] {
          Manifest({{"a", "x.sfm", {}}, {"a", "y.sfm", {}}});
        }) == ErrorCode::kInvalidArgument);
  CHECK_NOTHROW(TokenSequence({}, 1));
}

TEST_CASE("token lines serialize and parse back") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    TokenRecord r{"utt" + std::to_string(trial), {}};
    const auto len = rng() % 12;
    for (std::size_t i = 0; i < len; ++i) r.tokens.push_back(static_cast<Token>(rng() % 100000));
    const std::string line = format_token_line(r);
    CHECK(line.find('\t') != std::string::npos);
    CHECK(parse_token_line(line) == r);
  }
  CHECK(format_token_line({"u", {}}) == "u\t");
  CHECK(format_token_line({"u", {3, 10, 0}}) == "u\t3 10 0");
}

TEST_CASE("token line parse errors") {
  CHECK(code_of([] { parse_token_line("no tab here"); }) == ErrorCode::kParse);
  CHECK(code_of([] { parse_token_line("u\t1 x 2"); }) == ErrorCode::kParse);
  CHECK(code_of([] { parse_token_line("u\t1 -2"); }) == ErrorCode::kParse);
}

TEST_CASE("token file round trip ignores the process locale") {
  TempDir dir;
  std::vector<TokenRecord> records{{"a", {1, 2, 1000000}}, {"b", {}}, {"c", {7}}};
  try {
    std::locale::global(std::locale("de_DE.UTF-8"));
  } catch (const std::runtime_error&) {
    // Locale not installed; the check below still runs under "C".
  }
  write_token_file(records, dir / "t.tok");
  CHECK(read_token_file(dir / "t.tok") == records);
  CHECK(slurp(dir / "t.tok") == "a\t1 2 1000000\nb\t\nc\t7\n");
  std::locale::global(std::locale::classic());
}

TEST_CASE("manifest round trip and path resolution") {
  TempDir dir;
  const Manifest m({{"u1", "feats/u1.sfm", {"3", "4"}}, {"u2", "/abs/u2.sfm", {}}});
  write_manifest(m, dir / "m.tsv");
  CHECK(slurp(dir / "m.tsv").rfind("utterance_id\tfeature_path\ttranscript\n", 0) == 0);
  const Manifest back = read_manifest(dir / "m.tsv");
  CHECK(back == m);
  CHECK(resolve_feature_path(dir / "m.tsv", back[0]) == dir / "feats/u1.sfm");
  CHECK(resolve_feature_path(dir / "m.tsv", back[1]) == std::filesystem::path("/abs/u2.sfm"));
}

TEST_CASE("label and symbol conversion") {
  const std::vector<std::string> words{"3", "1", "2"};
  const LabelSequence labels = labels_from_symbols(words, 3);
  CHECK(labels.labels() == std::vector<int>{3, 1, 2});
  CHECK(symbols_from_labels(labels) == words);
  const std::vector<std::string> bad{"x"};
  CHECK(code_of([&] { labels_from_symbols(bad, 3); }) == ErrorCode::kParse);
  const std::vector<std::string> zero{"0"};
  CHECK(code_of([&] { labels_from_symbols(zero, 3); }) == ErrorCode::kOutOfRange);
}
