#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/keyword_fsa.hpp"
#include "ppbkws/posteriors.hpp"

namespace ppbkws {

// How competing hypotheses that reach the same FSA state are merged.
enum class Recombination {
  // One hypothesis per state, the one with the best running average. Live
  // hypotheses never outnumber FSA states, but a discarded hypothesis could
  // have scored better later, so the result is approximate.
  kPerState,
  // One hypothesis per (state, start frame of the current phone), keeping the
  // best completed-phone sum. Such hypotheses share their whole future, so this
  // finds the best segmentation exactly; up to max_phone_frames per state.
  kExact,
};

inline std::string_view to_string(Recombination r) {
  return r == Recombination::kExact ? "exact" : "per-state";
}

struct DecoderConfig {
  double theta_start = 0.05;
  double theta_beam = 0.1;
  double theta_hit = 0.3;
  FrameIndex min_phone_frames = 2;
  FrameIndex max_phone_frames = 50;
  Recombination recombination = Recombination::kPerState;

  void validate() const {
    if (!(theta_start >= 0.0 && theta_start <= 1.0)) throw ValidationError("theta_start must be in [0, 1]");
    if (!(theta_beam >= 0.0 && theta_beam <= theta_hit && theta_hit <= 1.0))
      throw ValidationError("thresholds must satisfy 0 <= theta_beam <= theta_hit <= 1");
    if (min_phone_frames < 1 || min_phone_frames > max_phone_frames)
      throw ValidationError("phone duration bounds must satisfy 1 <= min <= max");
  }
};

struct DecodeStats {
  std::size_t max_live = 0;    // peak number of live hypotheses after a frame
  std::size_t raw_hits = 0;    // accepted final hypotheses before overlap merging
};

// One accepted keyword occurrence in frame units; `probability` is P(H*).
struct Detection {
  FrameIndex start = 0;
  FrameIndex end = 0;  // inclusive
  double probability = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

namespace detail {

struct Hypothesis {
  StateId state;          // FSA state entered by the phone being consumed
  FrameIndex start_frame;
  std::int32_t done;      // completed phones
  double done_sum;        // sum of completed phone means
  FrameIndex phone_start;
  double phone_sum;       // sum of s_t over the current phone so far

  // Average phone probability with the open phone counted at its partial mean;
  // equals P(H) whenever the phone closes at frame t.
  double average(FrameIndex t) const {
    const double phone_mean = phone_sum / static_cast<double>(t - phone_start + 1);
    return (done_sum + phone_mean) / static_cast<double>(done + 1);
  }
};

// Greedy non-maximum suppression: visit in descending probability (earlier,
// then longer on ties) and keep detections that overlap no kept one. Raising
// the acceptance threshold therefore only removes detections.
inline std::vector<Detection> suppress_overlaps(std::vector<Detection> raw) {
  std::sort(raw.begin(), raw.end(), [](const Detection& a, const Detection& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.start != b.start) return a.start < b.start;
    return a.end > b.end;
  });
  std::map<FrameIndex, FrameIndex> kept;  // start -> end, disjoint
  std::vector<Detection> out;
  for (const auto& d : raw) {
    auto it = kept.upper_bound(d.end);
    if (it != kept.begin() && std::prev(it)->second >= d.start) continue;
    kept.emplace(d.start, d.end);
    out.push_back(d);
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.start < b.start; });
  return out;
}

template <bool kLogInput>
std::vector<Detection> detect(const KeywordFsa& fsa, const PosteriorMatrix& m, const DecoderConfig& cfg,
                              DecodeStats* stats) {
  const std::size_t num_states = fsa.num_states();
  const std::size_t num_phones = m.phones();
  const auto values = m.values();
  auto prob = [&](FrameIndex t, PhoneId phone) {
    const double v = values[static_cast<std::size_t>(t) * num_phones + static_cast<std::size_t>(phone)];
    if constexpr (kLogInput) {
      return std::exp(v);
    } else {
      return v;
    }
  };
  const bool exact = cfg.recombination == Recombination::kExact;
  const auto start_arcs = fsa.transitions(KeywordFsa::kStart);

  std::vector<Hypothesis> live, next;
  // Per-state slot: the per-state winner, or in exact mode the single
  // hypothesis whose current phone starts at this frame.
  std::vector<Hypothesis> slot(num_states);
  std::vector<double> slot_avg(num_states);
  std::vector<char> occupied(num_states, 0);
  std::vector<StateId> touched;
  std::vector<Detection> raw;

  auto offer_slot = [&](const Hypothesis& h, double avg) {
    const auto s = static_cast<std::size_t>(h.state);
    if (!occupied[s]) {
      occupied[s] = 1;
      touched.push_back(h.state);
    } else if (exact) {
      // Same state and phone start: the future is shared, keep the larger prefix.
      if (!(h.done_sum > slot[s].done_sum ||
            (h.done_sum == slot[s].done_sum && h.start_frame < slot[s].start_frame)))
        return;
    } else {
      if (!(avg > slot_avg[s] || (avg == slot_avg[s] && h.start_frame < slot[s].start_frame))) return;
    }
    slot[s] = h;
    slot_avg[s] = avg;
  };

  const auto frames = static_cast<FrameIndex>(m.frames());
  for (FrameIndex t = 0; t < frames; ++t) {
    next.clear();
    touched.clear();

    for (const auto& h : live) {
      const FrameIndex len = t - h.phone_start;  // frames consumed by the open phone
      if (len < cfg.max_phone_frames) {
        Hypothesis ext = h;
        ext.phone_sum += prob(t, fsa.incoming_phone(h.state));
        const double avg = ext.average(t);
        if (avg >= cfg.theta_beam) {
          if (exact) {
            next.push_back(ext);
          } else {
            offer_slot(ext, avg);
          }
        }
      }
      if (len >= cfg.min_phone_frames) {
        const double closed_sum = h.done_sum + h.phone_sum / static_cast<double>(len);
        for (const auto& tr : fsa.transitions(h.state)) {
          Hypothesis adv{tr.target, h.start_frame, h.done + 1, closed_sum, t, prob(t, tr.phone)};
          const double avg = adv.average(t);
          if (avg >= cfg.theta_beam) offer_slot(adv, avg);
        }
      }
    }

    for (const auto& tr : start_arcs) {
      const double p = prob(t, tr.phone);
      if (p > cfg.theta_start && p >= cfg.theta_beam) offer_slot({tr.target, t, 0, 0.0, t, p}, p);
    }

    std::sort(touched.begin(), touched.end());
    for (auto s : touched) {
      next.push_back(slot[static_cast<std::size_t>(s)]);
      occupied[static_cast<std::size_t>(s)] = 0;
    }

    for (const auto& h : next) {
      if (!fsa.is_final(h.state) || t - h.phone_start + 1 < cfg.min_phone_frames) continue;
      const double p = h.average(t);
      if (p > cfg.theta_hit) raw.push_back({h.start_frame, t, p});
    }

    live.swap(next);
    if (stats) stats->max_live = std::max(stats->max_live, live.size());
  }

  if (stats) stats->raw_hits += raw.size();
  return suppress_overlaps(std::move(raw));
}

}  // namespace detail

// Frame-synchronous search of one keyword over one utterance of smoothed
// features. Returns non-overlapping detections ordered by start frame.
inline std::vector<Detection> detect_keyword(const KeywordFsa& fsa, const PosteriorMatrix& m,
                                             const DecoderConfig& cfg, DecodeStats* stats = nullptr) {
  cfg.validate();
  if (m.kind() == MatrixKind::kRaw) throw ValidationError("decoder needs smoothed features, got raw posteriors");
  for (std::size_t s = 1; s < fsa.num_states(); ++s) {
    const auto phone = fsa.incoming_phone(static_cast<StateId>(s));
    if (phone < 0 || static_cast<std::size_t>(phone) >= m.phones())
      throw ValidationError("keyword " + fsa.kwid() + " uses phone " + std::to_string(phone) +
                            " outside the feature dimension");
  }
  return m.kind() == MatrixKind::kLogSmoothed ? detail::detect<true>(fsa, m, cfg, stats)
                                              : detail::detect<false>(fsa, m, cfg, stats);
}

// Same search, emitting hits with score ln P(H*).
inline std::vector<Hit> decode_keyword(const KeywordFsa& fsa, const PosteriorMatrix& m, const DecoderConfig& cfg,
                                       DecodeStats* stats = nullptr) {
  std::vector<Hit> hits;
  for (const auto& d : detect_keyword(fsa, m, cfg, stats)) {
    Hit h;
    h.kwid = fsa.kwid();
    h.utt_id = m.utt_id();
    h.tbeg = static_cast<double>(d.start) * m.frame_shift();
    h.dur = static_cast<double>(d.end - d.start + 1) * m.frame_shift();
    h.score = std::log(d.probability);
    h.decision = Decision::kYes;
    hits.push_back(std::move(h));
  }
  return hits;
}

}  // namespace ppbkws
