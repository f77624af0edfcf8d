#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

struct ScoringConfig {
  double beta = 999.9;
  double total_speech_seconds = 0.0;
  double align_tolerance_seconds = 0.5;

  void validate() const {
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (!(total_speech_seconds > 0.0)) throw ValidationError("total speech duration must be positive");
    if (!(align_tolerance_seconds > 0.0)) throw ValidationError("alignment tolerance must be positive");
  }
};

// Sum-to-one normalization per keyword: score_i <- exp(gamma*score_i) / sum_j
// exp(gamma*score_j), over all of the keyword's hits. Order and decisions are
// kept.
inline std::vector<Hit> sto_normalize(std::vector<Hit> hits, double gamma = 1.0) {
  if (!(gamma > 0.0)) throw ValidationError("STO exponent must be positive");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < hits.size(); ++i) groups[hits[i].kwid].push_back(i);
  for (const auto& [kwid, idx] : groups) {
    double top = -std::numeric_limits<double>::infinity();
    for (auto i : idx) top = std::max(top, gamma * hits[i].score);
    double sum = 0.0;
    for (auto i : idx) sum += std::exp(gamma * hits[i].score - top);
    for (auto i : idx) hits[i].score = std::exp(gamma * hits[i].score - top) / sum;
  }
  return hits;
}

struct LabeledHit {
  Hit hit;
  bool true_positive = false;
};

struct Alignment {
  std::vector<LabeledHit> hits;  // same order as the input hits
  std::vector<ReferenceOccurrence> missed;
};

// Greedy one-to-one matching within each (kwid, utt_id): candidate pairs have
// midpoints at most the tolerance apart and are taken in order of increasing
// midpoint distance, ties going to the earlier hit.
inline Alignment align_hits(std::span<const Hit> hits, std::span<const ReferenceOccurrence> refs,
                            const ScoringConfig& cfg) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<std::size_t>> hit_groups, ref_groups;
  for (std::size_t i = 0; i < hits.size(); ++i) hit_groups[{hits[i].kwid, hits[i].utt_id}].push_back(i);
  for (std::size_t j = 0; j < refs.size(); ++j) ref_groups[{refs[j].kwid, refs[j].utt_id}].push_back(j);

  std::vector<bool> hit_matched(hits.size(), false), ref_matched(refs.size(), false);
  for (const auto& [key, hidx] : hit_groups) {
    const auto rit = ref_groups.find(key);
    if (rit == ref_groups.end()) continue;
    struct Pair {
      double dist;
      std::size_t hit;
      std::size_t ref;
    };
    std::vector<Pair> pairs;
    for (auto i : hidx)
      for (auto j : rit->second) {
        const double d = std::abs(hits[i].midpoint() - refs[j].midpoint());
        if (d <= cfg.align_tolerance_seconds) pairs.push_back({d, i, j});
      }
    std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
      return std::tie(a.dist, hits[a.hit].tbeg, a.hit, refs[a.ref].tbeg, a.ref) <
             std::tie(b.dist, hits[b.hit].tbeg, b.hit, refs[b.ref].tbeg, b.ref);
    });
    for (const auto& p : pairs) {
      if (hit_matched[p.hit] || ref_matched[p.ref]) continue;
      hit_matched[p.hit] = ref_matched[p.ref] = true;
    }
  }

  Alignment out;
  for (std::size_t i = 0; i < hits.size(); ++i) out.hits.push_back({hits[i], hit_matched[i]});
  for (std::size_t j = 0; j < refs.size(); ++j)
    if (!ref_matched[j]) out.missed.push_back(refs[j]);
  return out;
}

struct TwvPoint {
  double theta = 0.0;
  double twv = 0.0;
};

struct KeywordErrorRates {
  std::string kwid;
  std::size_t n_true = 0;
  std::size_t n_correct = 0;
  std::size_t n_false_alarm = 0;
  double p_miss = 0.0;
  double p_fa = 0.0;
};

struct TwvReport {
  std::vector<TwvPoint> curve;  // ascending theta
  double mtwv = 0.0;
  double theta = 0.0;
  std::vector<KeywordErrorRates> keywords;  // at the MTWV threshold
  std::size_t keywords_without_refs = 0;    // hit keywords absent from the references
};

namespace detail {

inline std::map<std::string, std::size_t> count_true(std::span<const ReferenceOccurrence> refs) {
  std::map<std::string, std::size_t> n_true;
  for (const auto& r : refs) ++n_true[r.kwid];
  return n_true;
}

inline double keyword_cost(std::size_t n_true, std::size_t correct, std::size_t fa, const ScoringConfig& cfg) {
  const double p_miss = 1.0 - static_cast<double>(correct) / static_cast<double>(n_true);
  const double p_fa = static_cast<double>(fa) / (cfg.total_speech_seconds - static_cast<double>(n_true));
  return p_miss + cfg.beta * p_fa;
}

inline std::vector<KeywordErrorRates> rates_at(const Alignment& alignment,
                                               const std::map<std::string, std::size_t>& n_true,
                                               const ScoringConfig& cfg, double theta) {
  std::map<std::string, KeywordErrorRates> by_kw;
  for (const auto& [kwid, n] : n_true) by_kw[kwid] = {kwid, n, 0, 0, 1.0, 0.0};
  for (const auto& lh : alignment.hits) {
    const auto it = by_kw.find(lh.hit.kwid);
    if (it == by_kw.end() || lh.hit.score < theta) continue;
    if (lh.true_positive) {
      ++it->second.n_correct;
    } else {
      ++it->second.n_false_alarm;
    }
  }
  std::vector<KeywordErrorRates> out;
  for (auto& [kwid, r] : by_kw) {
    r.p_miss = 1.0 - static_cast<double>(r.n_correct) / static_cast<double>(r.n_true);
    r.p_fa = static_cast<double>(r.n_false_alarm) / (cfg.total_speech_seconds - static_cast<double>(r.n_true));
    out.push_back(r);
  }
  return out;
}

}  // namespace detail

// TWV at one threshold, counting hits with score >= theta. Keywords without
// references are left out of the average.
inline double twv_at(const Alignment& alignment, std::span<const ReferenceOccurrence> refs,
                     const ScoringConfig& cfg, double theta) {
  cfg.validate();
  const auto n_true = detail::count_true(refs);
  if (n_true.empty()) throw Error("no keywords with reference occurrences");
  double cost = 0.0;
  for (const auto& r : detail::rates_at(alignment, n_true, cfg, theta)) cost += r.p_miss + cfg.beta * r.p_fa;
  return 1.0 - cost / static_cast<double>(n_true.size());
}

// Sweeps the decision threshold over every distinct hit score plus one value
// below (min(0, lowest score)) and one above (past max(1, highest score)) and
// reports the maximum TWV. Ties go to the lowest threshold.
inline TwvReport compute_mtwv(const Alignment& alignment, std::span<const ReferenceOccurrence> refs,
                              const ScoringConfig& cfg) {
  cfg.validate();
  const auto n_true = detail::count_true(refs);
  if (n_true.empty()) throw Error("no keywords with reference occurrences");
  for (const auto& [kwid, n] : n_true)
    if (static_cast<double>(n) >= cfg.total_speech_seconds)
      throw ValidationError("keyword " + kwid + " has more occurrences than seconds of speech");

  std::map<std::string, std::size_t> kw_index;
  for (const auto& [kwid, n] : n_true) kw_index.emplace(kwid, kw_index.size());
  std::vector<std::size_t> truth(kw_index.size()), correct(kw_index.size(), 0), fa(kw_index.size(), 0);
  for (const auto& [kwid, idx] : kw_index) truth[idx] = n_true.at(kwid);

  struct Scored {
    double score;
    std::size_t kw;
    bool tp;
  };
  std::vector<Scored> scored;
  std::set<std::string> unknown;
  double lo = 0.0, hi = 1.0;
  for (const auto& lh : alignment.hits) {
    lo = std::min(lo, lh.hit.score);
    hi = std::max(hi, lh.hit.score);
    const auto it = kw_index.find(lh.hit.kwid);
    if (it == kw_index.end()) {
      unknown.insert(lh.hit.kwid);
      continue;
    }
    scored.push_back({lh.hit.score, it->second, lh.true_positive});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  const double num_kw = static_cast<double>(kw_index.size());
  std::vector<double> cost(kw_index.size());
  double total_cost = 0.0;
  for (std::size_t k = 0; k < cost.size(); ++k) {
    cost[k] = detail::keyword_cost(truth[k], 0, 0, cfg);
    total_cost += cost[k];
  }

  std::vector<TwvPoint> desc;
  desc.push_back({std::nextafter(hi, std::numeric_limits<double>::infinity()), 1.0 - total_cost / num_kw});
  for (std::size_t i = 0; i < scored.size();) {
    const double theta = scored[i].score;
    for (; i < scored.size() && scored[i].score == theta; ++i) {
      const auto k = scored[i].kw;
      if (scored[i].tp) {
        ++correct[k];
      } else {
        ++fa[k];
      }
      total_cost -= cost[k];
      cost[k] = detail::keyword_cost(truth[k], correct[k], fa[k], cfg);
      total_cost += cost[k];
    }
    desc.push_back({theta, 1.0 - total_cost / num_kw});
  }
  if (desc.back().theta > lo) desc.push_back({lo, desc.back().twv});

  TwvReport report;
  report.curve.assign(desc.rbegin(), desc.rend());
  report.mtwv = report.curve.front().twv;
  report.theta = report.curve.front().theta;
  for (const auto& p : report.curve)
    if (p.twv > report.mtwv) {
      report.mtwv = p.twv;
      report.theta = p.theta;
    }
  report.keywords = detail::rates_at(alignment, n_true, cfg, report.theta);
  report.keywords_without_refs = unknown.size();
  return report;
}

// Curve rows "theta<TAB>twv".
inline std::string serialize_twv_curve(const TwvReport& report) {
  std::string out;
  for (const auto& p : report.curve)
    out += detail::format_double(p.theta) + '\t' + detail::format_double(p.twv) + '\n';
  return out;
}

inline std::string mtwv_summary_line(const TwvReport& report) {
  return "MTWV " + detail::format_decimal(report.mtwv) + " " + detail::format_decimal(report.theta);
}

}  // namespace ppbkws
