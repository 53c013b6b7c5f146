#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "semtok/error.hpp"
#include "semtok/fsq.hpp"
#include "support/temp_dir.hpp"

using namespace semtok;

namespace {

FsqModel identity_down(const FsqLevels& levels) {
  const int d = static_cast<int>(levels.d_low());
  FsqModel m = FsqModel::zeros(levels, d, d, 1);
  m.w_down = Matrix::Identity(d, d);
  m.w_up = Matrix::Identity(d, d);
  return m;
}

void check_bijection(const FsqLevels& levels) {
  const auto size = static_cast<Token>(levels.codebook_size());
  // token -> code -> token
  for (Token t = 0; t < size; ++t) {
    const Code c = fsq_unindex(t, levels);
    for (std::size_t i = 0; i < c.size(); ++i) {
      REQUIRE(c[i] >= 0);
      REQUIRE(c[i] < levels[i]);
    }
    REQUIRE(fsq_index(c, levels) == t);
  }
  // code -> token -> code over the whole lattice, in odometer order
  Code c(levels.d_low(), 0);
  std::vector<bool> seen(static_cast<std::size_t>(size), false);
  while (true) {
    const Token t = fsq_index(c, levels);
    REQUIRE(!seen[static_cast<std::size_t>(t)]);
    seen[static_cast<std::size_t>(t)] = true;
    REQUIRE(fsq_unindex(t, levels) == c);
    std::size_t i = 0;
    while (i < c.size() && c[i] == levels[i] - 1) c[i++] = 0;
    if (i == c.size()) break;
    ++c[i];
  }
}

}  // namespace

TEST_CASE("level sets and codebook sizes") {
  CHECK(default_fsq_levels().levels() == std::vector<int>{5, 5, 5, 4, 4});
  CHECK(default_fsq_levels().codebook_size() == 2000);
  CHECK(low_bitrate_fsq_levels().levels() == std::vector<int>{8, 6, 5});
  CHECK(low_bitrate_fsq_levels().codebook_size() == 240);
  CHECK_THROWS_AS(FsqLevels(std::vector<int>{}), Error);
  CHECK_THROWS_AS(FsqLevels({5, 1}), Error);
  CHECK_THROWS_AS(FsqLevels(std::vector<int>(40, 1 << 20)), Error);  // product overflows 64 bits
}

TEST_CASE("bound and round") {
  CHECK(fsq_round_channel(0.0, 5) == 2);
  CHECK(fsq_round_channel(-10.0, 5) == 0);
  CHECK(fsq_round_channel(10.0, 5) == 4);
  CHECK(fsq_bound_channel(0.3, 4) == doctest::Approx(1.5 * (std::tanh(0.3) + 1.0)));
  CHECK(fsq_round_channel(0.3, 4) == 2);
  const std::vector<double> z{0.0, -10.0, 10.0};
  CHECK(fsq_bound_round(z, FsqLevels({5, 5, 5})) == Code{2, 0, 4});
  // Half-way values round away from zero: L=2, z=0 bounds to exactly 0.5.
  CHECK(fsq_round_channel(0.0, 2) == 1);
}

TEST_CASE("rounding is monotone and stays in range") {
  for (int levels : {2, 3, 4, 5, 8}) {
    int prev = 0;
    for (double z = -8.0; z <= 8.0; z += 0.01) {
      const int c = fsq_round_channel(z, levels);
      CHECK(c >= prev);
      CHECK(c < levels);
      prev = c;
    }
    CHECK(prev == levels - 1);
  }
}

TEST_CASE("mixed-radix index") {
  const FsqLevels big = default_fsq_levels();
  const FsqLevels small = low_bitrate_fsq_levels();
  CHECK(fsq_index(Code{0, 0, 0, 0, 0}, big) == 0);
  CHECK(fsq_index(Code{4, 4, 4, 3, 3}, big) == 1999);
  CHECK(fsq_index(Code{7, 5, 4}, small) == 239);
  CHECK(fsq_unindex(0, big) == Code{0, 0, 0, 0, 0});
  CHECK(fsq_unindex(1999, big) == Code{4, 4, 4, 3, 3});
  CHECK_THROWS_AS(fsq_index(Code{5, 0, 0, 0, 0}, big), Error);
  CHECK_THROWS_AS(fsq_index(Code{0, 0, 0}, big), Error);
  CHECK_THROWS_AS(fsq_unindex(2000, big), Error);
  CHECK_THROWS_AS(fsq_unindex(-1, big), Error);
}

TEST_CASE("index is a bijection") {
  SUBCASE("[5,5,5,4,4]") { check_bijection(default_fsq_levels()); }
  SUBCASE("[8,6,5]") { check_bijection(low_bitrate_fsq_levels()); }
  SUBCASE("[2,3,7,2]") { check_bijection(FsqLevels({2, 3, 7, 2})); }
}

TEST_CASE("encode") {
  const FsqLevels levels = default_fsq_levels();

  SUBCASE("zero model maps every frame to the midpoint code") {
    const FsqModel m = FsqModel::zeros(levels, 6, 4, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 3.0);
    Matrix x(9, 6);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = n(rng);
    const TokenSequence t = fsq_encode(FrameMatrix(x, 50.0), m);
    CHECK(t.vocab_size() == 2000);
    // (L-1)/2 = 1.5 on the four-level channels rounds away from zero to 2.
    CHECK(t.tokens() == std::vector<Token>(9, 1312));
    CHECK(fsq_unindex(1312, levels) == Code{2, 2, 2, 2, 2});
    CHECK(fsq_index(Code{2, 2, 2, 1, 1}, levels) == 687);
  }
  SUBCASE("saturated inputs give the last token") {
    const FsqModel m = identity_down(levels);
    const TokenSequence t = fsq_encode(FrameMatrix(Matrix::Constant(2, 5, 10.0), 50.0), m);
    CHECK(t.tokens() == std::vector<Token>(2, 1999));
  }
  SUBCASE("empty input") {
    CHECK(fsq_encode(FrameMatrix::empty(5, 50.0), identity_down(levels)).empty());
  }
  SUBCASE("frames are encoded independently and in order") {
    const FsqModel m = identity_down(levels);
    Matrix x(3, 5);
    x << -9, -9, -9, -9, -9, 0, 0, 0, 0, 0, 9, 9, 9, 9, 9;
    CHECK(fsq_encode(FrameMatrix(x, 50.0), m).tokens() == std::vector<Token>{0, 1312, 1999});
    Matrix y = x.colwise().reverse();
    CHECK(fsq_encode(FrameMatrix(y, 50.0), m).tokens() == std::vector<Token>{1999, 1312, 0});
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(fsq_encode(FrameMatrix(Matrix::Zero(1, 4), 50.0), identity_down(levels)), Error);
  }
}

TEST_CASE("dequantize normalizes codes before the up-projection") {
  const FsqModel five = identity_down(FsqLevels({5}));
  const auto out = [](const FsqModel& m, Token t) {
    return fsq_dequantize(TokenSequence({t}, static_cast<Token>(m.levels.codebook_size())), m).values()(0, 0);
  };
  CHECK(out(five, 2) == 0.0);
  CHECK(out(five, 0) == -1.0);
  CHECK(out(five, 4) == 1.0);
  const FsqModel four = identity_down(FsqLevels({4}));
  CHECK(out(four, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(fsq_normalize_code(3, 4) == 1.0);

  const TokenSequence wrong_vocab({0}, 7);
  try {
    fsq_dequantize(wrong_vocab, five);
    FAIL("expected vocab mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kVocabMismatch);
  }
}

TEST_CASE("model file round trip") {
  semtok::testing::TempDir dir;
  FsqModel m = FsqModel::zeros(low_bitrate_fsq_levels(), 4, 6, 9);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> q(-64, 64);
  for (Matrix* w : {&m.w_down, &m.w_up, &m.w_cls})
    for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = q(rng) / 16.0;
  m.b_cls(3) = 0.25;
  write_fsq_model(m, dir / "m.fsq");
  CHECK(read_fsq_model(dir / "m.fsq") == m);

  std::ofstream(dir / "junk.fsq") << "FSQ1garbage";
  CHECK_THROWS_AS(read_fsq_model(dir / "junk.fsq"), Error);
}
