#include <doctest.h>

#include <random>

#include "semtok/error.hpp"
#include "semtok/kmeans.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace semtok;

namespace {

FrameMatrix gaussian_cloud(std::mt19937_64& rng, const std::vector<std::pair<double, double>>& centers, int per,
                           double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  Matrix m(static_cast<Eigen::Index>(centers.size()) * per, 2);
  Eigen::Index row = 0;
  for (const auto& [x, y] : centers)
    for (int i = 0; i < per; ++i, ++row) {
      m(row, 0) = x + n(rng);
      m(row, 1) = y + n(rng);
    }
  return FrameMatrix(m, 50.0);
}

double best_of_restarts(const FrameMatrix& points, int k, int restarts) {
  double best = std::numeric_limits<double>::infinity();
  for (int seed = 0; seed < restarts; ++seed) {
    KmeansConfig c;
    c.k = k;
    c.seed = static_cast<std::uint64_t>(seed);
    const std::vector<FrameMatrix> corpus{points};
    best = std::min(best, kmeans_inertia(corpus, kmeans_train(corpus, c)));
  }
  return best;
}

Token brute_force_nearest(const RowVector& x, const Matrix& centroids) {
  Token best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("two well separated clouds") {
  std::mt19937_64 rng(1);
  const std::vector<FrameMatrix> corpus{gaussian_cloud(rng, {{0, 0}, {10, 10}}, 50, 0.01)};
  KmeansConfig c;
  c.k = 2;
  const Codebook cb = kmeans_train(corpus, c);
  const Matrix& m = cb.centroids();
  const Eigen::Index lo = m(0, 0) < m(1, 0) ? 0 : 1;
  CHECK((m.row(lo) - RowVector::Zero(2)).norm() < 0.1);
  CHECK((m.row(1 - lo) - RowVector::Constant(2, 10.0)).norm() < 0.1);
}

TEST_CASE("k = 1 gives the global mean") {
  std::mt19937_64 rng(2);
  const std::vector<FrameMatrix> corpus{gaussian_cloud(rng, {{1, 2}, {-3, 4}}, 20, 1.0),
                                        gaussian_cloud(rng, {{5, 5}}, 7, 2.0)};
  RowVector mean = RowVector::Zero(2);
  double n = 0;
  for (const auto& f : corpus) {
    mean += f.values().colwise().sum();
    n += static_cast<double>(f.num_frames());
  }
  mean /= n;
  KmeansConfig c;
  c.k = 1;
  CHECK((kmeans_train(corpus, c).centroids().row(0) - mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("six points: best of ten restarts reaches the exhaustive optimum") {
  Matrix p(6, 2);
  p << 0, 0, 1, 0, 0, 1, 5, 5, 6, 5, 5, 7;
  const FrameMatrix points(p, 50.0);
  CHECK(oracle::best_partition_inertia(p, 2) == doctest::Approx(14.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(best_of_restarts(points, 2, 10) - 14.0 / 3.0) < 1e-9);
}

TEST_CASE("random small instances match the exhaustive optimum") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 7);  // 4..10 points
    const int k = 2 + static_cast<int>(rng() % 2);
    Matrix p(n, 2);
    for (int i = 0; i < n; ++i) p.row(i) << u(rng), u(rng);
    CAPTURE(trial);
    CHECK(std::abs(best_of_restarts(FrameMatrix(p, 50.0), k, 10) - oracle::best_partition_inertia(p, k)) < 1e-9);
  }
}

TEST_CASE("assignment") {
  Matrix c = Matrix::Zero(8, 2);
  for (int i = 0; i < 8; ++i) c.row(i) << i, -i;
  const Codebook cb(c);

  SUBCASE("exact centroid") {
    Matrix x(1, 2);
    x << 7, -7;
    CHECK(kmeans_assign(FrameMatrix(x, 50.0), cb).tokens() == std::vector<Token>{7});
  }
  SUBCASE("ties go to the lowest index") {
    Matrix cc = Matrix::Zero(6, 1);
    cc << 9, 9, -1, 9, 9, 1;
    Matrix x = Matrix::Zero(1, 1);
    CHECK(kmeans_assign(FrameMatrix(x, 50.0), Codebook(cc)).tokens() == std::vector<Token>{2});
  }
  SUBCASE("codebook maps onto itself") {
    const auto tokens = kmeans_assign(FrameMatrix(c, 50.0), cb).tokens();
    for (Token i = 0; i < 8; ++i) CHECK(tokens[static_cast<std::size_t>(i)] == i);
  }
  SUBCASE("empty utterance") {
    const auto t = kmeans_assign(FrameMatrix::empty(2, 50.0), cb);
    CHECK(t.empty());
    CHECK(t.vocab_size() == 8);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(kmeans_assign(FrameMatrix(Matrix::Zero(2, 3), 50.0), cb), Error);
  }
}

TEST_CASE("assignment equals a brute-force scan") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(20, 4), c(8, 4);
    for (auto* m : {&x, &c})
      for (Eigen::Index i = 0; i < m->rows(); ++i)
        for (Eigen::Index j = 0; j < 4; ++j) (*m)(i, j) = n(rng);
    const auto tokens = kmeans_assign(FrameMatrix(x, 50.0), Codebook(c));
    for (Eigen::Index i = 0; i < 20; ++i) CHECK(tokens[static_cast<std::size_t>(i)] == brute_force_nearest(x.row(i), c));
  }
}

TEST_CASE("inertia trace never increases and training is deterministic") {
  std::mt19937_64 rng(4);
  std::vector<FrameMatrix> corpus;
  for (int u = 0; u < 5; ++u) corpus.push_back(gaussian_cloud(rng, {{0, 0}, {3, 1}, {1, 4}, {-2, 2}}, 30, 1.2));
  for (int k : {2, 5, 17, 60}) {
    KmeansConfig c;
    c.k = k;
    c.seed = 77;
    const KmeansFit a = kmeans_fit(corpus, c);
    REQUIRE(!a.inertia_trace.empty());
    for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1]);
    CHECK(a.inertia_trace.back() == doctest::Approx(kmeans_inertia(corpus, a.codebook)).epsilon(1e-12));
    c.threads = 3;
    CHECK(kmeans_fit(corpus, c).codebook == a.codebook);
  }
}

TEST_CASE("duplicate-heavy data keeps k centroids") {
  // Three distinct points repeated; k-means++ picks duplicates' positions and
  // the repair step must keep the codebook size at k.
  Matrix p(30, 1);
  for (int i = 0; i < 30; ++i) p(i, 0) = i % 3;
  KmeansConfig c;
  c.k = 3;
  const Codebook cb = kmeans_train(std::vector<FrameMatrix>{FrameMatrix(p, 50.0)}, c);
  CHECK(cb.k() == 3);
  std::vector<double> v{cb.centroids()(0, 0), cb.centroids()(1, 0), cb.centroids()(2, 0)};
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("training errors") {
  KmeansConfig c;
  c.k = 5;
  const std::vector<FrameMatrix> tiny{FrameMatrix(Matrix::Zero(3, 2), 50.0)};
  CHECK_THROWS_AS(kmeans_train(tiny, c), Error);
  const std::vector<FrameMatrix> mixed{FrameMatrix(Matrix::Zero(10, 2), 50.0), FrameMatrix(Matrix::Zero(10, 3), 50.0)};
  try {
    kmeans_train(mixed, c);
    FAIL("expected dimension mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("codebook file round trip") {
  semtok::testing::TempDir dir;
  Matrix c(3, 2);
  c << 0.5, -1.25, 3, 4, 0.0009765625, 7;
  write_codebook(Codebook(c), dir / "cb.kmc");
  CHECK(read_codebook(dir / "cb.kmc") == Codebook(c));
}
