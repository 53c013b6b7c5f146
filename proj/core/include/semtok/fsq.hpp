#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semtok/types.hpp"

namespace semtok {

/// Per-channel quantization levels [L_0, ..., L_{d_low-1}], each >= 2.
/// The implicit codebook is the Cartesian product of the channel ranges.
class FsqLevels {
 public:
  FsqLevels() = default;
  explicit FsqLevels(std::vector<int> levels);

  const std::vector<int>& levels() const { return levels_; }
  std::size_t d_low() const { return levels_.size(); }
  int operator[](std::size_t i) const { return levels_[i]; }
  std::uint64_t codebook_size() const { return codebook_size_; }

  friend bool operator==(const FsqLevels& a, const FsqLevels& b) { return a.levels_ == b.levels_; }

 private:
  std::vector<int> levels_;
  std::uint64_t codebook_size_ = 0;
};

/// [5,5,5,4,4] -> 2000 entries, aligned with a 2000-cluster K-means codebook.
FsqLevels default_fsq_levels();
/// [8,6,5] -> 240 entries, the ultra-low-bitrate configuration.
FsqLevels low_bitrate_fsq_levels();

using Code = std::vector<int>;

/// Bounded rounding of one channel: round(((L-1)/2) * (tanh(z) + 1)),
/// half away from zero, clamped to [0, L-1].
int fsq_round_channel(double z, int levels);
/// Continuous pre-rounding value ((L-1)/2) * (tanh(z) + 1) of one channel.
double fsq_bound_channel(double z, int levels);

Code fsq_bound_round(std::span<const double> h_down, const FsqLevels& levels);

/// Mixed-radix index: c_0 + sum_i c_i * prod_{j<i} L_j.
Token fsq_index(std::span<const int> code, const FsqLevels& levels);
Code fsq_unindex(Token token, const FsqLevels& levels);

/// Maps channel code c on L levels to 2c/(L-1) - 1, i.e. into [-1, 1].
double fsq_normalize_code(int code, int levels);

/// Down-projection, quantizer, up-projection and the per-frame ASR head used
/// while training the tokenizer. Projections are affine: y = x * W + b.
struct FsqModel {
  FsqLevels levels;
  int dim_in = 0;
  int dim_up = 0;
  int num_labels = 0;  // ASR head has num_labels + 1 outputs, index 0 = blank

  Matrix w_down;      // dim_in x d_low
  RowVector b_down;   // d_low
  Matrix w_up;        // d_low x dim_up
  RowVector b_up;     // dim_up
  Matrix w_cls;       // dim_up x (num_labels + 1)
  RowVector b_cls;    // num_labels + 1

  /// Zero-initialized model of the given shape.
  static FsqModel zeros(FsqLevels levels, int dim_in, int dim_up, int num_labels);
  /// Throws unless every block has the declared shape and is finite.
  void validate() const;
  std::size_t num_classes() const { return static_cast<std::size_t>(num_labels) + 1; }

  friend bool operator==(const FsqModel&, const FsqModel&);
};

/// Pre-quantization activations h * w_down + b_down, one row per frame.
Matrix fsq_project_down(const FrameMatrix& matrix, const FsqModel& model);
/// Per-frame codes of a projected matrix.
std::vector<Code> fsq_quantize(const Matrix& h_down, const FsqLevels& levels);

TokenSequence fsq_encode(const FrameMatrix& matrix, const FsqModel& model);
/// Up-projected reconstruction of a token sequence (dim_up columns).
FrameMatrix fsq_dequantize(const TokenSequence& tokens, const FsqModel& model,
                           double frame_rate_hz = 50.0);
/// Per-frame logits of the tokenizer's ASR head applied to the dequantized codes.
Matrix fsq_asr_logits(const FrameMatrix& matrix, const FsqModel& model);

// Model file: "FSQ0" | u32 version=1 | u32 d_low | u32 levels[d_low] | u32 dim_in |
// u32 dim_up | u32 num_labels | w_down, b_down, w_up, b_up, w_cls, b_cls as
// f32 LE row-major blocks.
void write_fsq_model(const FsqModel& model, const std::filesystem::path& path);
FsqModel read_fsq_model(const std::filesystem::path& path);

}  // namespace semtok
