#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

struct KmeansConfig {
  int k = 2000;
  int max_iters = 100;
  std::uint64_t seed = 0;
  double tol = 1e-6;  // relative inertia improvement below which training stops
  int threads = 1;
};

/// K centroids of dimension d, one per row.
class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(Matrix centroids);

  std::size_t k() const { return static_cast<std::size_t>(centroids_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids_.cols()); }
  const Matrix& centroids() const { return centroids_; }

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.centroids_.rows() == b.centroids_.rows() && a.centroids_.cols() == b.centroids_.cols() &&
           a.centroids_ == b.centroids_;
  }

 private:
  Matrix centroids_{1, 1};
};

struct KmeansFit {
  Codebook codebook;
  // Inertia after each assignment step; non-increasing by construction.
  std::vector<double> inertia_trace;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding over all frames of the corpus.
KmeansFit kmeans_fit(std::span<const FrameMatrix> corpus, const KmeansConfig& config);
Codebook kmeans_train(std::span<const FrameMatrix> corpus, const KmeansConfig& config);

/// Nearest-centroid index per frame (squared Euclidean, lowest index on ties).
TokenSequence kmeans_assign(const FrameMatrix& matrix, const Codebook& codebook);

/// Sum of squared distances from every frame to its nearest centroid.
double kmeans_inertia(std::span<const FrameMatrix> corpus, const Codebook& codebook);

// Codebook file: "KMC0" | u32 version=1 | u32 k | u32 dim | k*dim f32 LE row-major.
void write_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook read_codebook(const std::filesystem::path& path);

}  // namespace semtok
