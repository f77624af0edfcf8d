#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/lattice.hpp"
#include "ppbkws/phone_set.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

struct PosteriorConfig {
  // Acoustic likelihoods enter the path weight as ac_loglik / lambda.
  double lambda = 12.0;

  void validate() const {
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  }
};

enum class MatrixKind { kRaw, kSmoothed, kLogSmoothed };

inline std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::kRaw: return "raw";
    case MatrixKind::kSmoothed: return "smoothed";
    case MatrixKind::kLogSmoothed: return "log-smoothed";
  }
  return "raw";
}

inline std::optional<MatrixKind> parse_matrix_kind(std::string_view s) {
  if (s == "raw") return MatrixKind::kRaw;
  if (s == "smoothed") return MatrixKind::kSmoothed;
  if (s == "log-smoothed") return MatrixKind::kLogSmoothed;
  return std::nullopt;
}

// Frames x phones matrix, row-major. Row t is the phoneme posterior vector of
// frame t (raw), its smoothed version, or the log of the latter.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  PosteriorMatrix(std::string utt_id, double frame_shift, std::size_t frames, std::size_t phones,
                  MatrixKind kind)
      : utt_id_(std::move(utt_id)),
        frame_shift_(frame_shift),
        frames_(frames),
        phones_(phones),
        kind_(kind),
        values_(frames * phones, 0.0) {}

  const std::string& utt_id() const { return utt_id_; }
  double frame_shift() const { return frame_shift_; }
  std::size_t frames() const { return frames_; }
  std::size_t phones() const { return phones_; }
  MatrixKind kind() const { return kind_; }
  void set_kind(MatrixKind kind) { kind_ = kind; }
  double duration_seconds() const { return static_cast<double>(frames_) * frame_shift_; }

  double& at(std::size_t t, std::size_t n) { return values_[t * phones_ + n]; }
  double at(std::size_t t, std::size_t n) const { return values_[t * phones_ + n]; }
  std::span<double> row(std::size_t t) { return {values_.data() + t * phones_, phones_}; }
  std::span<const double> row(std::size_t t) const { return {values_.data() + t * phones_, phones_}; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const PosteriorMatrix&, const PosteriorMatrix&) = default;

 private:
  std::string utt_id_;
  double frame_shift_ = kDefaultFrameShift;
  std::size_t frames_ = 0;
  std::size_t phones_ = 0;
  MatrixKind kind_ = MatrixKind::kRaw;
  std::vector<double> values_;
};

inline double arc_log_weight(const LatticeArc& arc, const PosteriorConfig& cfg) {
  return arc.ac_loglik / cfg.lambda + arc.lm_logprob;
}

// P(l|O) for every arc (indexed like lat.arcs()), by log-space forward-backward.
inline std::vector<double> arc_posteriors(const Lattice& lat, const PosteriorConfig& cfg) {
  cfg.validate();
  if (lat.empty()) throw Error("empty lattice: " + lat.utt_id());

  constexpr double kLogZero = -std::numeric_limits<double>::infinity();
  const auto& arcs = lat.arcs();
  const std::size_t num_nodes = lat.nodes().size();
  std::vector<double> weight(arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) weight[a] = arc_log_weight(arcs[a], cfg);

  // Arcs are sorted by topological position of their source.
  std::vector<double> alpha(num_nodes, kLogZero), beta(num_nodes, kLogZero);
  for (auto i : lat.initial_nodes()) alpha[i] = 0.0;
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const auto s = lat.src_index(a), d = lat.dst_index(a);
    alpha[d] = detail::log_add(alpha[d], alpha[s] + weight[a]);
  }
  for (auto i : lat.final_nodes()) beta[i] = 0.0;
  for (std::size_t a = arcs.size(); a-- > 0;) {
    const auto s = lat.src_index(a), d = lat.dst_index(a);
    beta[s] = detail::log_add(beta[s], weight[a] + beta[d]);
  }

  double total = kLogZero;
  for (auto i : lat.final_nodes()) total = detail::log_add(total, alpha[i]);
  if (!std::isfinite(total)) throw Error("lattice has no finite-weight path: " + lat.utt_id());

  std::vector<double> post(arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const double lp = alpha[lat.src_index(a)] + weight[a] + beta[lat.dst_index(a)] - total;
    post[a] = std::clamp(std::exp(lp), 0.0, 1.0);
  }
  return post;
}

// Folds arc posteriors into per-frame phone posteriors: p_t^n sums P(l|O) over
// arcs whose alignment puts phone n on frame t. Phone k of an arc occupies the
// half-open frame range [start_k, start_k + duration_k).
inline PosteriorMatrix frame_posteriors(const Lattice& lat, std::span<const double> arc_post,
                                        const PhoneSet& phones) {
  if (arc_post.size() != lat.arcs().size())
    throw ValidationError("arc posterior count does not match the lattice");
  PosteriorMatrix m(lat.utt_id(), lat.frame_shift(), static_cast<std::size_t>(lat.num_frames()),
                    phones.size(), MatrixKind::kRaw);
  const auto& arcs = lat.arcs();
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    FrameIndex t = lat.arc_start_frame(a);
    for (const auto& seg : arcs[a].alignment) {
      if (!phones.contains(seg.phone))
        throw ValidationError("phone id " + std::to_string(seg.phone) + " outside the phone set");
      for (FrameIndex end = t + seg.frames; t < end; ++t)
        m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(seg.phone)) += arc_post[a];
    }
  }
  return m;
}

inline PosteriorMatrix compute_ppb(const Lattice& lat, const PosteriorConfig& cfg,
                                   const PhoneSet& phones) {
  const auto post = arc_posteriors(lat, cfg);
  return frame_posteriors(lat, post, phones);
}

// Reference implementation by explicit path enumeration. Exponential in the
// lattice size; throws once more than `max_paths` paths have been seen.
inline PosteriorMatrix brute_force_frame_posteriors(const Lattice& lat, const PosteriorConfig& cfg,
                                                    const PhoneSet& phones,
                                                    std::size_t max_paths = 1'000'000) {
  cfg.validate();
  if (lat.empty()) throw Error("empty lattice: " + lat.utt_id());

  const auto& arcs = lat.arcs();
  std::vector<std::vector<std::size_t>> out_arcs(lat.nodes().size());
  for (std::size_t a = 0; a < arcs.size(); ++a) out_arcs[lat.src_index(a)].push_back(a);
  std::vector<bool> is_final(lat.nodes().size(), false);
  for (auto i : lat.final_nodes()) is_final[i] = true;

  struct Path {
    double log_weight;
    std::vector<std::size_t> arcs;
  };
  std::vector<Path> paths;
  std::vector<std::size_t> stack_arcs;
  auto dfs = [&](auto&& self, std::size_t node, double lw) -> void {
    if (is_final[node]) {
      if (paths.size() >= max_paths) throw Error("path enumeration exceeds the safety cap");
      paths.push_back({lw, stack_arcs});
      return;
    }
    for (auto a : out_arcs[node]) {
      stack_arcs.push_back(a);
      self(self, lat.dst_index(a), lw + arc_log_weight(arcs[a], cfg));
      stack_arcs.pop_back();
    }
  };
  for (auto i : lat.initial_nodes()) dfs(dfs, i, 0.0);

  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) max_lw = std::max(max_lw, p.log_weight);
  double z = 0.0;
  for (const auto& p : paths) z += std::exp(p.log_weight - max_lw);

  PosteriorMatrix m(lat.utt_id(), lat.frame_shift(), static_cast<std::size_t>(lat.num_frames()),
                    phones.size(), MatrixKind::kRaw);
  for (const auto& p : paths) {
    const double w = std::exp(p.log_weight - max_lw) / z;
    for (auto a : p.arcs) {
      FrameIndex t = lat.arc_start_frame(a);
      for (const auto& seg : arcs[a].alignment) {
        if (!phones.contains(seg.phone))
          throw ValidationError("phone id " + std::to_string(seg.phone) + " outside the phone set");
        for (FrameIndex k = 0; k < seg.frames; ++k, ++t)
          m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(seg.phone)) += w;
      }
    }
  }
  return m;
}

}  // namespace ppbkws
