#include "semtok/fsq.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "semtok/error.hpp"

namespace semtok {
namespace {

constexpr std::string_view kFsqMagic = "FSQ0";

}  // namespace

FsqLevels::FsqLevels(std::vector<int> levels) : levels_(std::move(levels)) {
  require(!levels_.empty(), ErrorCode::kInvalidArgument, "FSQ needs at least one channel");
  std::uint64_t size = 1;
  for (int l : levels_) {
    require(l >= 2, ErrorCode::kInvalidArgument, "every FSQ level must be >= 2");
    require(size <= std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(l) &&
                size * static_cast<std::uint64_t>(l) <= static_cast<std::uint64_t>(std::numeric_limits<Token>::max()),
            ErrorCode::kOutOfRange, "FSQ codebook size overflows 64 bits");
    size *= static_cast<std::uint64_t>(l);
  }
  codebook_size_ = size;
}

FsqLevels default_fsq_levels() { return FsqLevels({5, 5, 5, 4, 4}); }
FsqLevels low_bitrate_fsq_levels() { return FsqLevels({8, 6, 5}); }

double fsq_bound_channel(double z, int levels) {
  return 0.5 * static_cast<double>(levels - 1) * (std::tanh(z) + 1.0);
}

int fsq_round_channel(double z, int levels) {
  const double r = std::round(fsq_bound_channel(z, levels));
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(levels - 1)));
}

Code fsq_bound_round(std::span<const double> h_down, const FsqLevels& levels) {
  require(h_down.size() == levels.d_low(), ErrorCode::kDimensionMismatch, "activation width != d_low");
  Code code(h_down.size());
  for (std::size_t i = 0; i < code.size(); ++i) code[i] = fsq_round_channel(h_down[i], levels[i]);
  return code;
}

Token fsq_index(std::span<const int> code, const FsqLevels& levels) {
  require(code.size() == levels.d_low(), ErrorCode::kDimensionMismatch, "code width != d_low");
  Token index = 0;
  Token radix = 1;
  for (std::size_t i = 0; i < code.size(); ++i) {
    require(code[i] >= 0 && code[i] < levels[i], ErrorCode::kOutOfRange,
            "channel " + std::to_string(i) + " code " + std::to_string(code[i]) + " outside [0, " +
                std::to_string(levels[i]) + ")");
    index += static_cast<Token>(code[i]) * radix;
    radix *= levels[i];
  }
  return index;
}

Code fsq_unindex(Token token, const FsqLevels& levels) {
  require(token >= 0 && static_cast<std::uint64_t>(token) < levels.codebook_size(), ErrorCode::kOutOfRange,
          "token " + std::to_string(token) + " outside the implicit codebook");
  Code code(levels.d_low());
  for (std::size_t i = 0; i < code.size(); ++i) {
    code[i] = static_cast<int>(token % levels[i]);
    token /= levels[i];
  }
  return code;
}

double fsq_normalize_code(int code, int levels) {
  return 2.0 * static_cast<double>(code) / static_cast<double>(levels - 1) - 1.0;
}

FsqModel FsqModel::zeros(FsqLevels levels, int dim_in, int dim_up, int num_labels) {
  require(dim_in >= 1 && dim_up >= 1 && num_labels >= 1, ErrorCode::kInvalidArgument,
          "FSQ model needs dim_in, dim_up, num_labels >= 1");
  FsqModel m;
  const auto d_low = static_cast<Eigen::Index>(levels.d_low());
  m.levels = std::move(levels);
  m.dim_in = dim_in;
  m.dim_up = dim_up;
  m.num_labels = num_labels;
  m.w_down = Matrix::Zero(dim_in, d_low);
  m.b_down = RowVector::Zero(d_low);
  m.w_up = Matrix::Zero(d_low, dim_up);
  m.b_up = RowVector::Zero(dim_up);
  m.w_cls = Matrix::Zero(dim_up, num_labels + 1);
  m.b_cls = RowVector::Zero(num_labels + 1);
  return m;
}

void FsqModel::validate() const {
  const auto d_low = static_cast<Eigen::Index>(levels.d_low());
  const Eigen::Index c = num_labels + 1;
  const bool shapes = d_low >= 1 && dim_in >= 1 && dim_up >= 1 && num_labels >= 1 &&
                      w_down.rows() == dim_in && w_down.cols() == d_low && b_down.size() == d_low &&
                      w_up.rows() == d_low && w_up.cols() == dim_up && b_up.size() == dim_up &&
                      w_cls.rows() == dim_up && w_cls.cols() == c && b_cls.size() == c;
  require(shapes, ErrorCode::kDimensionMismatch, "FSQ model blocks have inconsistent shapes");
  require(w_down.allFinite() && b_down.allFinite() && w_up.allFinite() && b_up.allFinite() &&
              w_cls.allFinite() && b_cls.allFinite(),
          ErrorCode::kNonFinite, "FSQ model weights contain NaN/Inf");
}

bool operator==(const FsqModel& a, const FsqModel& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return a.levels == b.levels && a.dim_in == b.dim_in && a.dim_up == b.dim_up &&
         a.num_labels == b.num_labels && same(a.w_down, b.w_down) && same(a.b_down, b.b_down) &&
         same(a.w_up, b.w_up) && same(a.b_up, b.b_up) && same(a.w_cls, b.w_cls) &&
         same(a.b_cls, b.b_cls);
}

Matrix fsq_project_down(const FrameMatrix& matrix, const FsqModel& model) {
  require(static_cast<int>(matrix.dim()) == model.dim_in, ErrorCode::kDimensionMismatch,
          "features have dim " + std::to_string(matrix.dim()) + ", model expects " +
              std::to_string(model.dim_in));
  Matrix z = matrix.values() * model.w_down;
  z.rowwise() += model.b_down;
  return z;
}

std::vector<Code> fsq_quantize(const Matrix& h_down, const FsqLevels& levels) {
  std::vector<Code> codes(static_cast<std::size_t>(h_down.rows()));
  for (Eigen::Index n = 0; n < h_down.rows(); ++n)
    codes[n] = fsq_bound_round(std::span<const double>(h_down.row(n).data(), levels.d_low()), levels);
  return codes;
}

TokenSequence fsq_encode(const FrameMatrix& matrix, const FsqModel& model) {
  const Matrix z = fsq_project_down(matrix, model);
  std::vector<Token> tokens;
  tokens.reserve(matrix.num_frames());
  for (const auto& code : fsq_quantize(z, model.levels)) tokens.push_back(fsq_index(code, model.levels));
  return TokenSequence(std::move(tokens), static_cast<Token>(model.levels.codebook_size()));
}

FrameMatrix fsq_dequantize(const TokenSequence& tokens, const FsqModel& model, double frame_rate_hz) {
  require(static_cast<std::uint64_t>(tokens.vocab_size()) == model.levels.codebook_size(),
          ErrorCode::kVocabMismatch, "token vocab " + std::to_string(tokens.vocab_size()) +
                                         " != FSQ codebook size " +
                                         std::to_string(model.levels.codebook_size()));
  const auto d_low = static_cast<Eigen::Index>(model.levels.d_low());
  Matrix normalized(static_cast<Eigen::Index>(tokens.size()), d_low);
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const Code code = fsq_unindex(tokens[n], model.levels);
    for (Eigen::Index i = 0; i < d_low; ++i)
      normalized(static_cast<Eigen::Index>(n), i) = fsq_normalize_code(code[i], model.levels[i]);
  }
  Matrix up = normalized * model.w_up;
  up.rowwise() += model.b_up;
  return FrameMatrix(std::move(up), frame_rate_hz);
}

Matrix fsq_asr_logits(const FrameMatrix& matrix, const FsqModel& model) {
  const FrameMatrix up = fsq_dequantize(fsq_encode(matrix, model), model, matrix.frame_rate_hz());
  Matrix logits = up.values() * model.w_cls;
  logits.rowwise() += model.b_cls;
  return logits;
}

namespace {

template <typename M>
void put_block(detail::ByteWriter& w, const M& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
}

template <typename M>
void get_block(detail::ByteReader& r, M& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32(ErrorCode::kTruncatedPayload);
}

}  // namespace

void write_fsq_model(const FsqModel& model, const std::filesystem::path& path) {
  model.validate();
  detail::ByteWriter w;
  w.magic(kFsqMagic);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.levels.d_low()));
  for (int l : model.levels.levels()) w.u32(static_cast<std::uint32_t>(l));
  w.u32(static_cast<std::uint32_t>(model.dim_in));
  w.u32(static_cast<std::uint32_t>(model.dim_up));
  w.u32(static_cast<std::uint32_t>(model.num_labels));
  put_block(w, model.w_down);
  put_block(w, model.b_down);
  put_block(w, model.w_up);
  put_block(w, model.b_up);
  put_block(w, model.w_cls);
  put_block(w, model.b_cls);
  detail::write_all_bytes(w.bytes(), path);
}

FsqModel read_fsq_model(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_all_bytes(path));
  constexpr auto hdr = ErrorCode::kMalformedHeader;
  require(r.has_magic(kFsqMagic), hdr, "'" + path.string() + "' is not an FSQ model file");
  require(r.u32(hdr) == 1, hdr, "unsupported FSQ model version");
  const std::uint32_t d_low = r.u32(hdr);
  require(d_low >= 1 && d_low <= 64, hdr, "implausible d_low");
  std::vector<int> levels(d_low);
  for (auto& l : levels) l = static_cast<int>(r.u32(hdr));
  const auto dim_in = static_cast<int>(r.u32(hdr));
  const auto dim_up = static_cast<int>(r.u32(hdr));
  const auto num_labels = static_cast<int>(r.u32(hdr));
  FsqModel m;
  try {
    m = FsqModel::zeros(FsqLevels(std::move(levels)), dim_in, dim_up, num_labels);
  } catch (const Error& e) {
    fail(hdr, e.what());
  }
  get_block(r, m.w_down);
  get_block(r, m.b_down);
  get_block(r, m.w_up);
  get_block(r, m.b_up);
  get_block(r, m.w_cls);
  get_block(r, m.b_cls);
  m.validate();
  return m;
}

}  // namespace semtok
