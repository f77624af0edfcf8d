#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/lattice.hpp"
#include "ppbkws/lexicon.hpp"
#include "ppbkws/phone_set.hpp"

namespace ppbkws {

// Seeded random source. Distributions are implemented here rather than taken
// from <random> so that outputs are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % range);
  }

  // Uniform real in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }

 private:
  std::mt19937_64 engine_;
};

struct RandomLatticeOptions {
  std::size_t num_arcs = 10;
  std::size_t num_phones = 4;
  std::size_t max_nodes = 6;
  FrameIndex max_gap = 4;       // frames between consecutive nodes
  FrameIndex lead_frames = 0;   // uncovered frames before the first node
  FrameIndex trail_frames = 0;  // uncovered frames after the last node
  std::string utt_id = "rand";
};

// Random DAG lattice: a backbone chain through every node plus extra forward
// arcs, so every arc lies on a complete path. Node ids and arc order are
// shuffled to exercise canonicalization.
inline Lattice random_lattice(Rng& rng, const RandomLatticeOptions& opt) {
  if (opt.num_arcs < 1 || opt.num_phones < 1 || opt.max_nodes < 2) throw ValidationError("bad random lattice options");
  const auto max_nodes = std::min<std::size_t>(opt.max_nodes, opt.num_arcs + 1);
  const auto k = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(max_nodes)));
  std::vector<FrameIndex> frames(k);
  frames[0] = opt.lead_frames;
  for (std::size_t i = 1; i < k; ++i) frames[i] = frames[i - 1] + static_cast<FrameIndex>(rng.uniform_int(1, opt.max_gap));

  std::vector<NodeId> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = static_cast<NodeId>(i * 3 + 1);
  rng.shuffle(ids);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < k; ++i) edges.emplace_back(i, i + 1);
  while (edges.size() < opt.num_arcs) {
    auto a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
    auto b = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace_back(a, b);
  }

  std::vector<LatticeNode> nodes;
  for (std::size_t i = 0; i < k; ++i) nodes.push_back({ids[i], frames[i]});
  std::vector<LatticeArc> arcs;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    LatticeArc arc;
    arc.src = ids[a];
    arc.dst = ids[b];
    arc.word = "w" + std::to_string(e);
    arc.lm_logprob = rng.uniform(-5.0, 0.0);
    arc.ac_loglik = rng.uniform(-40.0, 0.0);
    FrameIndex remaining = frames[b] - frames[a];
    const auto pieces = static_cast<FrameIndex>(rng.uniform_int(1, std::min<FrameIndex>(remaining, 3)));
    for (FrameIndex p = 0; p < pieces; ++p) {
      const FrameIndex left = pieces - p - 1;
      const FrameIndex d = p + 1 == pieces ? remaining : static_cast<FrameIndex>(rng.uniform_int(1, remaining - left));
      arc.alignment.push_back({static_cast<PhoneId>(rng.uniform_int(0, static_cast<std::int64_t>(opt.num_phones) - 1)), d});
      remaining -= d;
    }
    arcs.push_back(std::move(arc));
  }
  rng.shuffle(arcs);
  rng.shuffle(nodes);
  return Lattice::create(opt.utt_id, kDefaultFrameShift, frames.back() + opt.trail_frames, std::move(nodes),
                         std::move(arcs));
}

struct PlantSpec {
  std::string kwid;
  int occurrences = 1;
  // Phone ids; generated at random when empty.
  Pronunciation pronunciation;
};

struct GenConfig {
  std::uint64_t seed = 7;
  int num_utterances = 50;
  FrameIndex frames_per_utterance = 1000;
  int num_phones = 30;  // including SIL
  // Used when `plants` is empty: keywords KW001.. each planted `occurrences` times.
  int num_keywords = 20;
  int occurrences = 3;
  std::vector<PlantSpec> plants;
  double confusion_noise = 0.1;
  int branching = 3;  // arcs per word slot: the true word plus branching-1 competitors
  double lambda = 12.0;  // acoustic scale the competitor masses are calibrated for
  double frame_shift = kDefaultFrameShift;
  int min_keyword_phones = 4;
  int max_keyword_phones = 7;
  double alt_pronunciation_rate = 0.25;

  void validate() const {
    if (num_utterances < 1) throw ValidationError("need at least one utterance");
    if (frames_per_utterance < 1) throw ValidationError("need at least one frame per utterance");
    if (num_phones < 3) throw ValidationError("need at least 3 phones");
    if (!(confusion_noise >= 0.0 && confusion_noise < 1.0)) throw ValidationError("confusion_noise must be in [0, 1)");
    if (branching < 1) throw ValidationError("branching must be >= 1");
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (!(frame_shift > 0.0)) throw ValidationError("frame shift must be positive");
    if (min_keyword_phones < 1 || min_keyword_phones > max_keyword_phones)
      throw ValidationError("bad keyword length range");
  }
};

struct SyntheticCorpus {
  PhoneSet phones{{"SIL", "p01"}, 0};
  KeywordLexicon lexicon;
  std::vector<Lattice> lattices;
  std::vector<ReferenceOccurrence> refs;
  double speech_seconds = 0.0;
};

namespace detail {

struct SynthWord {
  std::string label;
  std::vector<PhoneSegment> phones;
  const std::string* kwid = nullptr;

  FrameIndex frames() const {
    FrameIndex n = 0;
    for (const auto& s : phones) n += s.frames;
    return n;
  }
};

inline FrameIndex random_phone_duration(Rng& rng) { return static_cast<FrameIndex>(rng.uniform_int(3, 9)); }

// Filler words covering exactly `frames` frames.
inline void fill_gap(Rng& rng, FrameIndex frames, PhoneId silence, int num_phones, std::vector<SynthWord>& out) {
  while (frames > 0) {
    SynthWord w;
    if (rng.bernoulli(0.15)) {
      w.label = "<sil>";
      const auto d = std::min<FrameIndex>(frames, static_cast<FrameIndex>(rng.uniform_int(5, 30)));
      w.phones.push_back({silence, d});
      frames -= d;
    } else {
      w.label = "w" + std::to_string(rng.uniform_int(0, 9999));
      const auto count = rng.uniform_int(2, 5);
      for (std::int64_t i = 0; i < count && frames > 0; ++i) {
        auto d = random_phone_duration(rng);
        if (d >= frames || frames - d < 3) d = frames;
        w.phones.push_back({static_cast<PhoneId>(rng.uniform_int(1, num_phones - 1)), d});
        frames -= d;
      }
    }
    out.push_back(std::move(w));
  }
}

// Competitor for `truth`: every phone is substituted with probability 1/2
// (mostly by its confusion partner), at least one always is, and phone
// boundaries are jittered by up to two frames.
inline std::vector<PhoneSegment> confusable_variant(Rng& rng, const std::vector<PhoneSegment>& truth,
                                                    const std::vector<PhoneId>& partner, int num_phones) {
  auto out = truth;
  auto substitute = [&](PhoneSegment& seg) {
    PhoneId p = rng.bernoulli(0.7) ? partner[static_cast<std::size_t>(seg.phone)]
                                   : static_cast<PhoneId>(rng.uniform_int(1, num_phones - 1));
    if (p == seg.phone) p = partner[static_cast<std::size_t>(seg.phone)];
    seg.phone = p;
  };
  bool changed = false;
  for (auto& seg : out)
    if (rng.bernoulli(0.5)) {
      substitute(seg);
      changed = true;
    }
  if (!changed) substitute(out[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(out.size()) - 1))]);

  FrameIndex total = 0;
  for (const auto& s : truth) total += s.frames;
  const auto n = static_cast<FrameIndex>(out.size());
  FrameIndex prev = 0, boundary = 0;
  for (FrameIndex i = 0; i + 1 < n; ++i) {
    boundary += truth[static_cast<std::size_t>(i)].frames;
    const FrameIndex lo = prev + 1, hi = total - (n - i - 1);
    const FrameIndex b = std::clamp<FrameIndex>(boundary + static_cast<FrameIndex>(rng.uniform_int(-2, 2)), lo, hi);
    out[static_cast<std::size_t>(i)].frames = b - prev;
    prev = b;
  }
  out.back().frames = total - prev;
  return out;
}

}  // namespace detail

// Builds a corpus of sausage-shaped lattices with planted keyword occurrences.
// Each word slot carries the true word with posterior 1 - confusion_noise (at
// the configured lambda) and branching - 1 confusable competitors sharing the
// rest. References record the planted spans exactly.
inline SyntheticCorpus generate_corpus(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticCorpus corpus;

  std::vector<std::string> labels{std::string(kSilenceLabel)};
  for (int p = 1; p < cfg.num_phones; ++p) labels.push_back((p < 10 ? "p0" : "p") + std::to_string(p));
  corpus.phones = PhoneSet(labels, 0);
  const PhoneId silence = 0;

  // Symmetric confusion pairs among non-silence phones.
  std::vector<PhoneId> order;
  for (PhoneId p = 1; p < cfg.num_phones; ++p) order.push_back(p);
  rng.shuffle(order);
  std::vector<PhoneId> partner(static_cast<std::size_t>(cfg.num_phones), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t j = (i % 2 == 0) ? (i + 1 < order.size() ? i + 1 : i - 1) : i - 1;
    partner[static_cast<std::size_t>(order[i])] = order[j];
  }
  partner[static_cast<std::size_t>(silence)] = order.front();

  std::vector<PlantSpec> plants = cfg.plants;
  if (plants.empty()) {
    for (int k = 1; k <= cfg.num_keywords; ++k) {
      std::string id = std::to_string(k);
      plants.push_back({"KW" + std::string(3 - std::min<std::size_t>(3, id.size()), '0') + id, cfg.occurrences, {}});
    }
  }

  struct Occurrence {
    std::size_t plant;
    std::size_t pron;
  };
  std::vector<Occurrence> occurrences;
  std::vector<std::vector<Pronunciation>> prons(plants.size());
  for (std::size_t k = 0; k < plants.size(); ++k) {
    auto pron = plants[k].pronunciation;
    if (pron.empty()) {
      const auto len = rng.uniform_int(cfg.min_keyword_phones, cfg.max_keyword_phones);
      for (std::int64_t i = 0; i < len; ++i) pron.push_back(static_cast<PhoneId>(rng.uniform_int(1, cfg.num_phones - 1)));
    }
    for (auto p : pron)
      if (p < 0 || p >= cfg.num_phones)
        throw ValidationError("keyword " + plants[k].kwid + " uses phone " + std::to_string(p) +
                              " outside the generated phone set");
    prons[k].push_back(pron);
    if (plants[k].pronunciation.empty() && rng.bernoulli(cfg.alt_pronunciation_rate)) {
      auto alt = pron;
      auto& p = alt[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(alt.size()) - 1))];
      p = partner[static_cast<std::size_t>(p)];
      if (alt != pron) prons[k].push_back(alt);
    }
    for (const auto& pr : prons[k]) corpus.lexicon.add(plants[k].kwid, "kw" + plants[k].kwid, pr);
    for (int o = 0; o < plants[k].occurrences; ++o)
      occurrences.push_back({k, static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(prons[k].size()) - 1))});
  }

  std::vector<std::vector<Occurrence>> per_utt(static_cast<std::size_t>(cfg.num_utterances));
  for (const auto& occ : occurrences)
    per_utt[static_cast<std::size_t>(rng.uniform_int(0, cfg.num_utterances - 1))].push_back(occ);

  for (int u = 0; u < cfg.num_utterances; ++u) {
    std::string utt_id = std::to_string(u + 1);
    utt_id = "utt" + std::string(4 - std::min<std::size_t>(4, utt_id.size()), '0') + utt_id;
    auto& plan = per_utt[static_cast<std::size_t>(u)];
    rng.shuffle(plan);

    std::vector<detail::SynthWord> planted;
    FrameIndex planted_frames = 0;
    for (const auto& occ : plan) {
      detail::SynthWord w;
      w.label = "kw" + plants[occ.plant].kwid;
      w.kwid = &plants[occ.plant].kwid;
      for (auto p : prons[occ.plant][occ.pron]) w.phones.push_back({p, detail::random_phone_duration(rng)});
      planted_frames += w.frames();
      planted.push_back(std::move(w));
    }
    if (planted_frames > cfg.frames_per_utterance)
      throw ValidationError("planted keywords do not fit into " + utt_id);

    const FrameIndex free_frames = cfg.frames_per_utterance - planted_frames;
    std::vector<FrameIndex> cuts{0, free_frames};
    for (std::size_t i = 0; i < planted.size(); ++i) cuts.push_back(static_cast<FrameIndex>(rng.uniform_int(0, free_frames)));
    std::sort(cuts.begin(), cuts.end());

    std::vector<detail::SynthWord> words;
    for (std::size_t i = 0; i <= planted.size(); ++i) {
      detail::fill_gap(rng, cuts[i + 1] - cuts[i], silence, cfg.num_phones, words);
      if (i < planted.size()) words.push_back(std::move(planted[i]));
    }

    std::vector<LatticeNode> nodes{{0, 0}};
    std::vector<LatticeArc> arcs;
    FrameIndex t = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& word = words[w];
      const FrameIndex span = word.frames();
      const auto src = static_cast<NodeId>(w), dst = static_cast<NodeId>(w + 1);
      nodes.push_back({dst, t + span});
      if (word.kwid)
        corpus.refs.push_back({*word.kwid, utt_id, t * cfg.frame_shift, span * cfg.frame_shift});

      const int competitors = cfg.confusion_noise > 0.0 ? cfg.branching - 1 : 0;
      std::vector<double> mass{1.0 - (competitors > 0 ? cfg.confusion_noise : 0.0)};
      std::vector<double> share;
      double share_sum = 0.0;
      for (int c = 0; c < competitors; ++c) {
        share.push_back(rng.uniform(0.5, 1.5));
        share_sum += share.back();
      }
      for (double s : share) mass.push_back(cfg.confusion_noise * s / share_sum);

      // A per-slot acoustic offset shared by every arc leaves posteriors unchanged.
      const double offset = -0.5 * cfg.lambda * span;
      for (std::size_t a = 0; a < mass.size(); ++a) {
        LatticeArc arc;
        arc.src = src;
        arc.dst = dst;
        arc.word = a == 0 ? word.label : word.label + "_alt" + std::to_string(a);
        arc.alignment = a == 0 ? word.phones : detail::confusable_variant(rng, word.phones, partner, cfg.num_phones);
        arc.lm_logprob = rng.uniform(-4.0, -1.0);
        arc.ac_loglik = cfg.lambda * (std::log(mass[a]) - arc.lm_logprob) + offset;
        arcs.push_back(std::move(arc));
      }
      t += span;
    }
    corpus.lattices.push_back(Lattice::create(utt_id, cfg.frame_shift, cfg.frames_per_utterance, std::move(nodes),
                                              std::move(arcs), &corpus.phones));
  }
  corpus.speech_seconds = cfg.num_utterances * cfg.frames_per_utterance * cfg.frame_shift;
  return corpus;
}

}  // namespace ppbkws
