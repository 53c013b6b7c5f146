#include "semtok/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "binary_io.hpp"
#include "semtok/error.hpp"
#include "semtok/parallel.hpp"

namespace semtok {
namespace {

constexpr std::string_view kCodebookMagic = "KMC0";

// Squared distance to every centroid; returns (index, distance) of the
// nearest one, lowest index on ties.
std::pair<Eigen::Index, double> nearest(const double* x, const Matrix& centroids) {
  const Eigen::Index dim = centroids.cols();
  const double* c = centroids.data();
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k, c += dim) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double diff = c[j] - x[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

Matrix stack_frames(std::span<const FrameMatrix> corpus) {
  require(!corpus.empty(), ErrorCode::kInsufficientData, "empty corpus");
  const auto dim = static_cast<Eigen::Index>(corpus.front().dim());
  Eigen::Index total = 0;
  for (const auto& m : corpus) {
    require(static_cast<Eigen::Index>(m.dim()) == dim, ErrorCode::kDimensionMismatch,
            "utterances have different feature dims");
    total += static_cast<Eigen::Index>(m.num_frames());
  }
  Matrix all(total, dim);
  Eigen::Index row = 0;
  for (const auto& m : corpus) {
    all.middleRows(row, m.values().rows()) = m.values();
    row += m.values().rows();
  }
  return all;
}

Matrix kmeanspp_seed(const Matrix& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  Matrix centroids(k, points.cols());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

}  // namespace

Codebook::Codebook(Matrix centroids) : centroids_(std::move(centroids)) {
  require(centroids_.rows() >= 1 && centroids_.cols() >= 1, ErrorCode::kInvalidArgument,
          "codebook needs k >= 1 and dim >= 1");
  require(centroids_.allFinite(), ErrorCode::kNonFinite, "codebook contains NaN/Inf");
}

KmeansFit kmeans_fit(std::span<const FrameMatrix> corpus, const KmeansConfig& config) {
  require(config.k >= 1 && config.max_iters >= 1 && config.tol >= 0, ErrorCode::kInvalidArgument,
          "k-means config needs k >= 1, max_iters >= 1, tol >= 0");
  const Matrix points = stack_frames(corpus);
  const Eigen::Index n = points.rows();
  require(n >= config.k, ErrorCode::kInsufficientData,
          "corpus has " + std::to_string(n) + " frames, fewer than k=" + std::to_string(config.k));

  std::mt19937_64 rng(config.seed);
  Matrix centroids = kmeanspp_seed(points, config.k, rng);

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> next(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  Matrix previous;
  KmeansFit fit;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    parallel_for(static_cast<std::size_t>(n), config.threads, [&](std::size_t i) {
      auto [k, d] = nearest(points.row(static_cast<Eigen::Index>(i)).data(), centroids);
      next[i] = k;
      dist[i] = d;
    });

    // Empty-cluster repair: the frame farthest from its centroid (taken from a
    // cluster that keeps at least one member) becomes the empty cluster's centroid.
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(config.k), 0);
    for (auto k : next) ++sizes[k];
    for (int c = 0; c < config.k; ++c) {
      if (sizes[c] != 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i)
        if (sizes[next[i]] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
      if (far < 0) break;
      --sizes[next[far]];
      next[far] = c;
      sizes[c] = 1;
      dist[far] = 0.0;
      centroids.row(c) = points.row(far);
    }

    double inertia = 0.0;
    for (double d : dist) inertia += d;

    if (!fit.inertia_trace.empty()) {
      const double prev = fit.inertia_trace.back();
      // Only reachable through floating-point rounding at convergence; keep
      // the previous (better) state.
      if (inertia > prev) {
        centroids = std::move(previous);
        break;
      }
    }
    const bool unchanged = next == assign;
    const double prev = fit.inertia_trace.empty() ? std::numeric_limits<double>::infinity()
                                                  : fit.inertia_trace.back();
    fit.inertia_trace.push_back(inertia);
    assign = next;
    fit.iterations = iter + 1;
    if (unchanged) break;
    if (std::isfinite(prev) && (prev <= 0.0 || (prev - inertia) / prev < config.tol)) break;

    // Update step: centroid = mean of its members (fixed summation order).
    Matrix sums = Matrix::Zero(config.k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(assign[i]) += points.row(i);
    Matrix updated = centroids;
    for (int c = 0; c < config.k; ++c)
      if (sizes[c] > 0) updated.row(c) = sums.row(c) / static_cast<double>(sizes[c]);

    if (iter + 1 == config.max_iters) {
      // Last allowed update: accept it only if it does not worsen inertia.
      double after = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) after += nearest(points.row(i).data(), updated).second;
      if (after <= inertia) centroids = std::move(updated);
      break;
    }
    previous = std::move(centroids);
    centroids = std::move(updated);
  }
  fit.codebook = Codebook(std::move(centroids));
  return fit;
}

Codebook kmeans_train(std::span<const FrameMatrix> corpus, const KmeansConfig& config) {
  return kmeans_fit(corpus, config).codebook;
}

TokenSequence kmeans_assign(const FrameMatrix& matrix, const Codebook& codebook) {
  require(matrix.dim() == codebook.dim(), ErrorCode::kDimensionMismatch,
          "features have dim " + std::to_string(matrix.dim()) + ", codebook has " +
              std::to_string(codebook.dim()));
  std::vector<Token> tokens(matrix.num_frames());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    tokens[i] = nearest(matrix.values().row(static_cast<Eigen::Index>(i)).data(), codebook.centroids()).first;
  return TokenSequence(std::move(tokens), static_cast<Token>(codebook.k()));
}

double kmeans_inertia(std::span<const FrameMatrix> corpus, const Codebook& codebook) {
  double total = 0.0;
  for (const auto& m : corpus) {
    require(m.dim() == codebook.dim(), ErrorCode::kDimensionMismatch, "feature/codebook dim mismatch");
    for (Eigen::Index i = 0; i < m.values().rows(); ++i)
      total += nearest(m.values().row(i).data(), codebook.centroids()).second;
  }
  return total;
}

void write_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic(kCodebookMagic);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(codebook.k()));
  w.u32(static_cast<std::uint32_t>(codebook.dim()));
  const Matrix& c = codebook.centroids();
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) w.f32(static_cast<float>(c(i, j)));
  detail::write_all_bytes(w.bytes(), path);
}

Codebook read_codebook(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_all_bytes(path));
  constexpr auto hdr = ErrorCode::kMalformedHeader;
  require(r.has_magic(kCodebookMagic), hdr, "'" + path.string() + "' is not a codebook file");
  require(r.u32(hdr) == 1, hdr, "unsupported codebook version");
  const std::uint32_t k = r.u32(hdr);
  const std::uint32_t dim = r.u32(hdr);
  require(k >= 1 && dim >= 1, hdr, "codebook needs k >= 1 and dim >= 1");
  require(r.remaining() >= std::uint64_t{k} * dim * 4, ErrorCode::kTruncatedPayload, "codebook payload truncated");
  Matrix c(k, dim);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = r.f32(ErrorCode::kTruncatedPayload);
  return Codebook(std::move(c));
}

}  // namespace semtok
