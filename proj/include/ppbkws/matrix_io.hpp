#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/posteriors.hpp"
#include "ppbkws/text.hpp"

// Posterior matrix files.
//
// Text:   "PPB <utt_id> <frame_shift> <T> <N> <kind>" followed by T rows of N
//         values. Values use the shortest round-trip decimal form, so text
//         files are lossless.
// Binary: "PPBB", u32 kind, u64 T, u64 N, f64 frame_shift, u32 utt length,
//         utt bytes, then T*N float32 values row-major. All little-endian.
// Both variants may hold several matrices back to back.

namespace ppbkws {

inline constexpr std::string_view kBinaryMatrixMagic = "PPBB";
inline constexpr std::string_view kBinaryMatrixExtension = ".bin";

inline std::string serialize_matrix_text(const PosteriorMatrix& m) {
  std::string out = "PPB " + m.utt_id() + " " + detail::format_double(m.frame_shift()) + " " +
                    std::to_string(m.frames()) + " " + std::to_string(m.phones()) + " " +
                    std::string(to_string(m.kind())) + "\n";
  for (std::size_t t = 0; t < m.frames(); ++t) {
    const auto row = m.row(t);
    for (std::size_t n = 0; n < row.size(); ++n) {
      if (n) out += ' ';
      out += detail::format_double(row[n]);
    }
    out += '\n';
  }
  return out;
}

inline std::string serialize_matrices_text(std::span<const PosteriorMatrix> ms) {
  std::string out;
  for (const auto& m : ms) out += serialize_matrix_text(m);
  return out;
}

inline std::vector<PosteriorMatrix> parse_matrices_text(std::string_view text) {
  std::vector<PosteriorMatrix> out;
  detail::LineReader reader(text);
  std::string_view line;
  PosteriorMatrix* cur = nullptr;
  std::size_t next_row = 0;
  while (reader.next(line)) {
    const auto ln = reader.line_number();
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok[0] == "PPB") {
      if (cur && next_row != cur->frames())
        throw ParseError(ln, "matrix '" + cur->utt_id() + "' has too few rows");
      if (tok.size() != 6) throw ParseError(ln, "expected 'PPB <utt_id> <frame_shift> <T> <N> <kind>'");
      const auto kind = parse_matrix_kind(tok[5]);
      if (!kind) throw ParseError(ln, "unknown matrix kind '" + std::string(tok[5]) + "'");
      const double shift = detail::parse_number_or_throw<double>(tok[2], ln, "frame shift");
      if (!(shift > 0.0)) throw ParseError(ln, "frame shift must be positive");
      out.emplace_back(std::string(tok[1]), shift,
                       detail::parse_number_or_throw<std::size_t>(tok[3], ln, "frame count"),
                       detail::parse_number_or_throw<std::size_t>(tok[4], ln, "phone count"), *kind);
      cur = &out.back();
      next_row = 0;
      continue;
    }
    if (!cur) throw ParseError(ln, "values before PPB header");
    if (next_row >= cur->frames()) throw ParseError(ln, "too many rows for '" + cur->utt_id() + "'");
    if (tok.size() != cur->phones())
      throw ParseError(ln, "expected " + std::to_string(cur->phones()) + " values");
    auto row = cur->row(next_row++);
    for (std::size_t n = 0; n < tok.size(); ++n)
      row[n] = detail::parse_number_or_throw<double>(tok[n], ln, "value");
  }
  if (cur && next_row != cur->frames())
    throw ParseError(reader.line_number(), "matrix '" + cur->utt_id() + "' has too few rows");
  return out;
}

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  static_assert(sizeof(T) == sizeof(U));
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out += static_cast<char>((bits >> (8 * i)) & 0xff);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ >= bytes_.size(); }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error("truncated binary matrix file");
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T get_le() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const auto s = take(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return std::bit_cast<T>(bits);
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Values are narrowed to float32.
inline std::string serialize_matrices_binary(std::span<const PosteriorMatrix> ms) {
  std::string out;
  for (const auto& m : ms) {
    out += kBinaryMatrixMagic;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.kind()));
    detail::put_le<std::uint64_t>(out, m.frames());
    detail::put_le<std::uint64_t>(out, m.phones());
    detail::put_le<double>(out, m.frame_shift());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.utt_id().size()));
    out += m.utt_id();
    for (double v : m.values()) detail::put_le<float>(out, static_cast<float>(v));
  }
  return out;
}

inline std::vector<PosteriorMatrix> parse_matrices_binary(std::string_view bytes) {
  std::vector<PosteriorMatrix> out;
  detail::ByteReader in(bytes);
  while (!in.done()) {
    if (in.take(kBinaryMatrixMagic.size()) != kBinaryMatrixMagic) throw Error("bad binary matrix magic");
    const auto kind = in.get_le<std::uint32_t>();
    if (kind > static_cast<std::uint32_t>(MatrixKind::kLogSmoothed)) throw Error("bad matrix kind");
    const auto frames = in.get_le<std::uint64_t>();
    const auto phones = in.get_le<std::uint64_t>();
    const auto shift = in.get_le<double>();
    const auto utt_len = in.get_le<std::uint32_t>();
    std::string utt(in.take(utt_len));
    if (phones != 0 && frames > (bytes.size() / 4) / phones) throw Error("truncated binary matrix file");
    PosteriorMatrix m(std::move(utt), shift, frames, phones, static_cast<MatrixKind>(kind));
    for (auto& v : m.values()) v = static_cast<double>(in.get_le<float>());
    out.push_back(std::move(m));
  }
  return out;
}

// Dispatches on the leading magic bytes.
inline std::vector<PosteriorMatrix> parse_matrices(std::string_view bytes) {
  if (bytes.substr(0, kBinaryMatrixMagic.size()) == kBinaryMatrixMagic) return parse_matrices_binary(bytes);
  return parse_matrices_text(bytes);
}

inline bool is_binary_matrix_path(std::string_view path) {
  return path.size() >= kBinaryMatrixExtension.size() &&
         path.substr(path.size() - kBinaryMatrixExtension.size()) == kBinaryMatrixExtension;
}

inline std::string serialize_matrices_for_path(std::string_view path, std::span<const PosteriorMatrix> ms) {
  return is_binary_matrix_path(path) ? serialize_matrices_binary(ms) : serialize_matrices_text(ms);
}

}  // namespace ppbkws
