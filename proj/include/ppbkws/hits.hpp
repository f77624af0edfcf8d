#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

enum class Decision { kYes, kNo };

inline std::string_view to_string(Decision d) { return d == Decision::kYes ? "YES" : "NO"; }

// A keyword detection. Times are in seconds. `score` is ln P(H*) as emitted by
// the decoder and a probability share once normalized.
struct Hit {
  std::string kwid;
  std::string utt_id;
  double tbeg = 0.0;
  double dur = 0.0;
  double score = 0.0;
  Decision decision = Decision::kYes;

  double midpoint() const { return tbeg + 0.5 * dur; }

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct ReferenceOccurrence {
  std::string kwid;
  std::string utt_id;
  double tbeg = 0.0;
  double dur = 0.0;

  double midpoint() const { return tbeg + 0.5 * dur; }

  friend bool operator==(const ReferenceOccurrence&, const ReferenceOccurrence&) = default;
};

// Canonical output order: (kwid, utt_id, tbeg), then longer and better first.
inline void sort_hits(std::vector<Hit>& hits) {
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return std::tie(a.kwid, a.utt_id, a.tbeg, b.dur, b.score) <
           std::tie(b.kwid, b.utt_id, b.tbeg, a.dur, a.score);
  });
}

namespace detail {

inline void check_field(std::string_view s, std::size_t line, std::string_view what) {
  if (s.empty() || has_whitespace(s)) throw ParseError(line, "invalid " + std::string(what));
}

inline void check_times(double tbeg, double dur, std::size_t line) {
  if (!(tbeg >= 0.0)) throw ParseError(line, "tbeg must be >= 0");
  if (!(dur > 0.0)) throw ParseError(line, "dur must be > 0");
}

}  // namespace detail

// TSV: kwid utt_id tbeg dur score decision. Blank lines and '#' comments are skipped.
inline std::vector<Hit> parse_hits(std::string_view text) {
  std::vector<Hit> out;
  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto ln = reader.line_number();
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok.size() != 6) throw ParseError(ln, "expected 'kwid utt_id tbeg dur score decision'");
    Hit h;
    h.kwid = std::string(tok[0]);
    h.utt_id = std::string(tok[1]);
    h.tbeg = detail::parse_number_or_throw<double>(tok[2], ln, "tbeg");
    h.dur = detail::parse_number_or_throw<double>(tok[3], ln, "dur");
    h.score = detail::parse_number_or_throw<double>(tok[4], ln, "score");
    if (tok[5] == "YES") {
      h.decision = Decision::kYes;
    } else if (tok[5] == "NO") {
      h.decision = Decision::kNo;
    } else {
      throw ParseError(ln, "decision must be YES or NO");
    }
    detail::check_times(h.tbeg, h.dur, ln);
    out.push_back(std::move(h));
  }
  return out;
}

inline std::string serialize_hits(std::span<const Hit> hits) {
  std::string out;
  for (const auto& h : hits) {
    out += h.kwid + '\t' + h.utt_id + '\t' + detail::format_double(h.tbeg) + '\t' +
           detail::format_double(h.dur) + '\t' + detail::format_double(h.score) + '\t' +
           std::string(to_string(h.decision)) + '\n';
  }
  return out;
}

// TSV: kwid utt_id tbeg dur.
inline std::vector<ReferenceOccurrence> parse_refs(std::string_view text) {
  std::vector<ReferenceOccurrence> out;
  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto ln = reader.line_number();
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok.size() != 4) throw ParseError(ln, "expected 'kwid utt_id tbeg dur'");
    ReferenceOccurrence r;
    r.kwid = std::string(tok[0]);
    r.utt_id = std::string(tok[1]);
    r.tbeg = detail::parse_number_or_throw<double>(tok[2], ln, "tbeg");
    r.dur = detail::parse_number_or_throw<double>(tok[3], ln, "dur");
    detail::check_times(r.tbeg, r.dur, ln);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string serialize_refs(std::span<const ReferenceOccurrence> refs) {
  std::string out;
  for (const auto& r : refs) {
    out += r.kwid + '\t' + r.utt_id + '\t' + detail::format_double(r.tbeg) + '\t' +
           detail::format_double(r.dur) + '\n';
  }
  return out;
}

}  // namespace ppbkws
