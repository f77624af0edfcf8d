#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/posteriors.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

struct SmoothingConfig {
  double alpha = 0.2;
  double epsilon = 1e-42;
  bool emit_log = false;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
    if (!(epsilon > 0.0 && epsilon < 1e-6)) throw ValidationError("epsilon must be in (0, 1e-6)");
  }
};

// Index of the largest entry, lowest id on ties. nullopt for an uncovered
// (all-zero) row.
inline std::optional<std::size_t> frame_argmax(std::span<const double> row) {
  std::optional<std::size_t> best;
  for (std::size_t n = 0; n < row.size(); ++n) {
    if (row[n] <= 0.0) continue;
    if (!best || row[n] > row[*best]) best = n;
  }
  return best;
}

// Phoneme confusion model: row n is the mean posterior vector over frames
// whose argmax is n. Rows with no frames hold the unit vector e_n.
class ConfusionModel {
 public:
  ConfusionModel() = default;

  explicit ConfusionModel(std::size_t phones)
      : phones_(phones), means_(phones * phones, 0.0), counts_(phones, 0) {
    for (std::size_t n = 0; n < phones; ++n) means_[n * phones + n] = 1.0;
  }

  ConfusionModel(std::size_t phones, std::vector<double> means, std::vector<std::uint64_t> counts)
      : phones_(phones), means_(std::move(means)), counts_(std::move(counts)) {
    if (means_.size() != phones_ * phones_ || counts_.size() != phones_)
      throw ValidationError("confusion model dimensions do not match");
  }

  std::size_t phones() const { return phones_; }
  std::span<const double> mean(std::size_t n) const { return {means_.data() + n * phones_, phones_}; }
  std::uint64_t count(std::size_t n) const { return counts_[n]; }
  bool is_empty_row(std::size_t n) const { return counts_[n] == 0; }
  std::span<const double> means() const { return means_; }
  std::span<const std::uint64_t> counts() const { return counts_; }

  friend bool operator==(const ConfusionModel&, const ConfusionModel&) = default;

 private:
  std::size_t phones_ = 0;
  std::vector<double> means_;
  std::vector<std::uint64_t> counts_;
};

// Streaming estimator; add() raw matrices in any grouping, then finish().
class ConfusionAccumulator {
 public:
  void add(const PosteriorMatrix& m) {
    if (m.kind() != MatrixKind::kRaw)
      throw ValidationError("confusion model needs raw posteriors, got " + std::string(to_string(m.kind())));
    if (!seen_) {
      phones_ = m.phones();
      sums_.assign(phones_ * phones_, 0.0);
      counts_.assign(phones_, 0);
      seen_ = true;
    } else if (m.phones() != phones_) {
      throw ValidationError("posterior matrices disagree on the number of phones");
    }
    for (std::size_t t = 0; t < m.frames(); ++t) {
      const auto row = m.row(t);
      const auto best = frame_argmax(row);
      if (!best) continue;
      ++counts_[*best];
      double* sum = sums_.data() + *best * phones_;
      for (std::size_t k = 0; k < phones_; ++k) sum[k] += row[k];
    }
  }

  ConfusionModel finish() const {
    if (!seen_) throw Error("cannot estimate a confusion model from no matrices");
    ConfusionModel identity(phones_);
    std::vector<double> means(identity.means().begin(), identity.means().end());
    for (std::size_t n = 0; n < phones_; ++n) {
      if (counts_[n] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts_[n]);
      for (std::size_t k = 0; k < phones_; ++k) means[n * phones_ + k] = sums_[n * phones_ + k] * inv;
    }
    return ConfusionModel(phones_, std::move(means), counts_);
  }

 private:
  bool seen_ = false;
  std::size_t phones_ = 0;
  std::vector<double> sums_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionModel estimate_confusion_model(std::span<const PosteriorMatrix> matrices) {
  ConfusionAccumulator acc;
  for (const auto& m : matrices) acc.add(m);
  return acc.finish();
}

// s_t = (1 - alpha) p_t + alpha mu_argmax(p_t) on covered frames, then every
// entry below epsilon (all entries of uncovered frames) is raised to epsilon.
inline PosteriorMatrix smooth(const PosteriorMatrix& m, const ConfusionModel& cm, const SmoothingConfig& cfg) {
  cfg.validate();
  if (m.kind() != MatrixKind::kRaw)
    throw ValidationError("smoothing needs raw posteriors, got " + std::string(to_string(m.kind())));
  if (m.phones() != cm.phones())
    throw ValidationError("matrix has " + std::to_string(m.phones()) + " phones, confusion model " +
                          std::to_string(cm.phones()));
  PosteriorMatrix out(m.utt_id(), m.frame_shift(), m.frames(), m.phones(),
                      cfg.emit_log ? MatrixKind::kLogSmoothed : MatrixKind::kSmoothed);
  const double keep = 1.0 - cfg.alpha;
  for (std::size_t t = 0; t < m.frames(); ++t) {
    const auto in = m.row(t);
    auto row = out.row(t);
    if (const auto best = frame_argmax(in)) {
      const auto mu = cm.mean(*best);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = keep * in[k] + cfg.alpha * mu[k];
    }
    for (auto& v : row) {
      if (v < cfg.epsilon) v = cfg.epsilon;
      if (cfg.emit_log) v = std::log(v);
    }
  }
  return out;
}

// "CM <N>", N rows of N means, then one row of N frame counts.
inline std::string serialize_confusion_model(const ConfusionModel& cm) {
  const std::size_t n = cm.phones();
  std::string out = "CM " + std::to_string(n) + "\n";
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = cm.mean(r);
    for (std::size_t k = 0; k < n; ++k) {
      if (k) out += ' ';
      out += detail::format_double(row[k]);
    }
    out += '\n';
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k) out += ' ';
    out += std::to_string(cm.count(k));
  }
  out += '\n';
  return out;
}

inline ConfusionModel parse_confusion_model(std::string_view text) {
  detail::LineReader reader(text);
  std::string_view line;
  std::vector<std::vector<std::string_view>> rows;
  std::size_t header_line = 0;
  std::optional<std::size_t> n;
  while (reader.next(line)) {
    auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (!n) {
      if (tok.size() != 2 || tok[0] != "CM") throw ParseError(reader.line_number(), "expected 'CM <N>'");
      n = detail::parse_number_or_throw<std::size_t>(tok[1], reader.line_number(), "phone count");
      header_line = reader.line_number();
      continue;
    }
    if (tok.size() != *n)
      throw ParseError(reader.line_number(), "expected " + std::to_string(*n) + " values");
    if (rows.size() == *n + 1) throw ParseError(reader.line_number(), "trailing data after counts");
    rows.push_back(std::move(tok));
  }
  if (!n) throw ParseError(header_line, "missing CM header");
  if (rows.size() != *n + 1) throw ParseError(reader.line_number(), "confusion model is truncated");
  std::vector<double> means;
  means.reserve(*n * *n);
  for (std::size_t r = 0; r < *n; ++r)
    for (auto v : rows[r]) means.push_back(detail::parse_number_or_throw<double>(v, header_line + r + 1, "value"));
  std::vector<std::uint64_t> counts;
  for (auto v : rows[*n]) counts.push_back(detail::parse_number_or_throw<std::uint64_t>(v, header_line + *n + 1, "count"));
  return ConfusionModel(*n, std::move(means), std::move(counts));
}

}  // namespace ppbkws
