#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ppbkws/ppbkws.hpp"

using namespace ppbkws;

namespace {

constexpr PhoneId A = 1, B = 2, C = 3, D = 4;

PosteriorMatrix flat(std::size_t frames, std::size_t phones, double value) {
  PosteriorMatrix m("u", 0.01, frames, phones, MatrixKind::kSmoothed);
  for (auto& v : m.values()) v = value;
  return m;
}

KeywordFsa fsa_of(std::vector<Pronunciation> prons) { return build_keyword_fsa("KW", prons); }

DecoderConfig open_config(Recombination r) {
  DecoderConfig cfg;
  cfg.theta_start = 0.0;
  cfg.theta_beam = 0.0;
  cfg.theta_hit = 0.0;
  cfg.min_phone_frames = 1;
  cfg.max_phone_frames = 50;
  cfg.recombination = r;
  return cfg;
}

double best_probability(const std::vector<Detection>& ds) {
  double best = -1.0;
  for (const auto& d : ds) best = std::max(best, d.probability);
  return best;
}

// Two-phone evidence for the hand-checked examples: a on frames 3-5, b on 6-8.
PosteriorMatrix ab_matrix(double pa, double pb, double rest) {
  PosteriorMatrix m("u", 0.01, 12, 3, MatrixKind::kSmoothed);
  for (std::size_t t = 0; t < 12; ++t) {
    m.at(t, 0) = 1.0 - 2 * rest;
    m.at(t, A) = rest;
    m.at(t, B) = rest;
  }
  for (std::size_t t = 3; t <= 5; ++t) {
    m.at(t, A) = pa;
    m.at(t, B) = 1.0 - pa;
    m.at(t, 0) = 0.0;
  }
  for (std::size_t t = 6; t <= 8; ++t) {
    m.at(t, B) = pb;
    m.at(t, A) = 1.0 - pb;
    m.at(t, 0) = 0.0;
  }
  return m;
}

}  // namespace

TEST(KeywordFsa, LinearChain) {
  const auto fsa = fsa_of({{A, B, C}});
  EXPECT_EQ(fsa.num_states(), 4u);
  EXPECT_EQ(fsa.num_transitions(), 3u);
  EXPECT_TRUE(fsa.is_linear());
  EXPECT_TRUE(fsa.is_final(3));
  EXPECT_FALSE(fsa.is_final(2));
}

TEST(KeywordFsa, SharedPrefix) {
  // start, a, ab, abc, abd.
  const auto fsa = fsa_of({{A, B, C}, {A, B, D}});
  EXPECT_EQ(fsa.num_states(), 5u);
  EXPECT_EQ(fsa.num_transitions(), 4u);
  EXPECT_FALSE(fsa.is_linear());
  const std::vector<Pronunciation> want{{A, B, C}, {A, B, D}};
  EXPECT_EQ(fsa.pronunciations(), want);
}

TEST(KeywordFsa, DuplicatesCollapse) {
  const auto fsa = fsa_of({{A}, {A}});
  EXPECT_EQ(fsa.num_states(), 2u);
  EXPECT_EQ(fsa.pronunciations().size(), 1u);
}

TEST(KeywordFsa, PrefixPronunciationIsFinalMidway) {
  const auto fsa = fsa_of({{A, B}, {A, B, C}});
  EXPECT_EQ(fsa.num_states(), 4u);
  EXPECT_TRUE(fsa.is_final(2));
  EXPECT_TRUE(fsa.is_final(3));
}

TEST(KeywordFsa, RandomTriesSpellTheirPronunciations) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    std::vector<Pronunciation> prons(static_cast<std::size_t>(rng.uniform_int(1, 5)));
    std::size_t total = 0;
    for (auto& p : prons) {
      p.resize(static_cast<std::size_t>(rng.uniform_int(1, 6)));
      for (auto& ph : p) ph = static_cast<PhoneId>(rng.uniform_int(1, 3));
      total += p.size();
    }
    const auto fsa = fsa_of(prons);
    EXPECT_LE(fsa.num_states(), 1 + total);
    auto want = prons;
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    auto got = fsa.pronunciations();
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, want);
    // Depth grows by one along every transition, so there are no loops.
    for (std::size_t s = 0; s < fsa.num_states(); ++s)
      for (const auto& tr : fsa.transitions(static_cast<StateId>(s)))
        EXPECT_EQ(fsa.depth(tr.target), fsa.depth(static_cast<StateId>(s)) + 1);
  }
}

TEST(KeywordFsa, Errors) {
  EXPECT_THROW(fsa_of({}), ValidationError);
  EXPECT_THROW(fsa_of({{A}, {}}), ValidationError);
}

TEST(Decoder, PerfectEvidenceGivesOneHit) {
  const auto m = ab_matrix(1.0, 1.0, 1e-6);
  DecoderConfig cfg;
  cfg.theta_start = 0.5;
  cfg.theta_beam = 0.3;
  cfg.theta_hit = 0.5;
  const auto hits = decode_keyword(fsa_of({{A, B}}), m, cfg);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_NEAR(hits[0].tbeg, 0.03, 1e-12);
  EXPECT_NEAR(hits[0].dur, 0.06, 1e-12);
  EXPECT_EQ(hits[0].score, 0.0);
  EXPECT_EQ(hits[0].decision, Decision::kYes);
  EXPECT_EQ(hits[0].kwid, "KW");
  // b on 6..8 then a on the 1e-6 floor averages just above 0.5.
  cfg.theta_hit = 0.6;
  EXPECT_TRUE(decode_keyword(fsa_of({{B, A}}), m, cfg).empty());
}

TEST(Decoder, AveragedEvidence) {
  const auto m = ab_matrix(0.8, 0.6, 0.0);
  auto cfg = open_config(Recombination::kExact);
  cfg.min_phone_frames = 2;
  cfg.max_phone_frames = 12;
  const double best = best_probability(detect_keyword(fsa_of({{A, B}}), m, cfg));
  EXPECT_NEAR(best, 0.7, 1e-12);
  EXPECT_NEAR(best, oracle::best_segmentation(m, {A, B}, 2, 12), 1e-12);
  EXPECT_NEAR(std::log(best), -0.35667494393873245, 1e-12);
}

TEST(Decoder, ExactModeMatchesExhaustiveSegmentation) {
  Rng rng(99);
  for (int i = 0; i < 150; ++i) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(2, 30));
    PosteriorMatrix m("r", 0.01, frames, 4, MatrixKind::kSmoothed);
    for (auto& v : m.values()) v = rng.uniform(1e-3, 1.0);
    Pronunciation pron(static_cast<std::size_t>(rng.uniform_int(1, 4)));
    for (auto& p : pron) p = static_cast<PhoneId>(rng.uniform_int(0, 3));
    auto cfg = open_config(Recombination::kExact);
    cfg.min_phone_frames = static_cast<FrameIndex>(rng.uniform_int(1, 2));
    cfg.max_phone_frames = static_cast<FrameIndex>(rng.uniform_int(cfg.min_phone_frames, 8));
    const double want = oracle::best_segmentation(m, pron, cfg.min_phone_frames, cfg.max_phone_frames);
    const double got = best_probability(detect_keyword(fsa_of({pron}), m, cfg));
    ASSERT_NEAR(got, want, 1e-9) << "case " << i;
    // The per-state rule can only lose candidates.
    cfg.recombination = Recombination::kPerState;
    EXPECT_LE(best_probability(detect_keyword(fsa_of({pron}), m, cfg)), want + 1e-12);
  }
}

TEST(Decoder, ExactModeHandlesBranchingKeywords) {
  Rng rng(7);
  for (int i = 0; i < 60; ++i) {
    PosteriorMatrix m("r", 0.01, 20, 4, MatrixKind::kSmoothed);
    for (auto& v : m.values()) v = rng.uniform(1e-3, 1.0);
    const std::vector<Pronunciation> prons{{1, 2, 3}, {1, 2}, {1, 3, 3}};
    auto cfg = open_config(Recombination::kExact);
    cfg.max_phone_frames = 6;
    double want = -1.0;
    for (const auto& p : prons) want = std::max(want, oracle::best_segmentation(m, p, 1, 6));
    EXPECT_NEAR(best_probability(detect_keyword(fsa_of(prons), m, cfg)), want, 1e-9);
  }
}

TEST(Decoder, PerStateRecombinationCanMissTheBest) {
  // At frame 2 the hypothesis with a = {1} and a fresh, weak b phone
  // (average 0.5) loses state b to a = {0} whose b phone began on a strong
  // frame (0.525). Ten strong b frames later the loser would have reached
  // about 0.909.
  PosteriorMatrix m("u", 0.01, 13, 3, MatrixKind::kSmoothed);
  const double a[] = {0.5, 0.9, 0.0};
  const double b[] = {0.0, 1.0, 0.1};
  for (std::size_t t = 0; t < 13; ++t) {
    m.at(t, A) = t < 3 ? a[t] : 0.0;
    m.at(t, B) = t < 3 ? b[t] : 1.0;
  }
  const auto fsa = fsa_of({{A, B}});
  const double want = oracle::best_segmentation(m, {A, B}, 1, 50);
  EXPECT_NEAR(want, (0.9 + 10.1 / 11.0) / 2.0, 1e-12);
  EXPECT_NEAR(best_probability(detect_keyword(fsa, m, open_config(Recombination::kExact))), want, 1e-12);
  EXPECT_LT(best_probability(detect_keyword(fsa, m, open_config(Recombination::kPerState))), want - 0.1);
}

TEST(Decoder, ConstantEvidenceScoresTheConstant) {
  Rng rng(3);
  for (double c : {0.3, 0.6, 0.9}) {
    for (std::size_t len : {2u, 5u, 10u}) {
      Pronunciation pron(len);
      for (auto& p : pron) p = static_cast<PhoneId>(rng.uniform_int(0, 5));
      const auto m = flat(400, 6, c);
      for (auto mode : {Recombination::kPerState, Recombination::kExact}) {
        DecoderConfig cfg;
        cfg.theta_hit = c / 2;
        cfg.theta_beam = c / 2;
        cfg.min_phone_frames = 2;
        cfg.max_phone_frames = 9;
        cfg.recombination = mode;
        const auto ds = detect_keyword(fsa_of({pron}), m, cfg);
        ASSERT_FALSE(ds.empty());
        for (const auto& d : ds) EXPECT_NEAR(d.probability, c, 1e-12);
      }
    }
  }
}

TEST(Decoder, LiveHypothesesBoundedByStates) {
  Rng rng(12);
  for (int i = 0; i < 30; ++i) {
    PosteriorMatrix m("r", 0.01, 300, 5, MatrixKind::kSmoothed);
    for (auto& v : m.values()) v = rng.uniform();
    std::vector<Pronunciation> prons{{1, 2, 3, 4}, {1, 2, 4}, {2, 2}};
    const auto fsa = fsa_of(prons);
    DecodeStats stats;
    detect_keyword(fsa, m, open_config(Recombination::kPerState), &stats);
    EXPECT_LE(stats.max_live, fsa.num_states());
    EXPECT_GT(stats.max_live, 0u);
  }
}

TEST(Decoder, RaisingThetaHitOnlyFilters) {
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    PosteriorMatrix m("r", 0.01, 200, 4, MatrixKind::kSmoothed);
    for (auto& v : m.values()) v = rng.uniform();
    const auto fsa = fsa_of({{1, 2, 3}});
    DecoderConfig low;
    low.theta_beam = 0.1;
    low.theta_hit = 0.2;
    auto high = low;
    high.theta_hit = 0.5;
    const auto all = detect_keyword(fsa, m, low);
    std::vector<Detection> filtered;
    for (const auto& d : all)
      if (d.probability > high.theta_hit) filtered.push_back(d);
    EXPECT_EQ(detect_keyword(fsa, m, high), filtered);
  }
}

TEST(Decoder, RaisingThetaBeamNeverRaisesTheBest) {
  Rng rng(32);
  for (int i = 0; i < 30; ++i) {
    PosteriorMatrix m("r", 0.01, 120, 4, MatrixKind::kSmoothed);
    for (auto& v : m.values()) v = rng.uniform();
    const auto fsa = fsa_of({{1, 2, 3}});
    auto cfg = open_config(Recombination::kExact);
    cfg.theta_hit = 0.6;
    cfg.max_phone_frames = 10;
    double prev = 2.0;
    for (double beam : {0.0, 0.2, 0.4, 0.5, 0.6}) {
      cfg.theta_beam = beam;
      const double best = best_probability(detect_keyword(fsa, m, cfg));
      EXPECT_LE(best, prev);
      prev = best;
    }
  }
}

TEST(Decoder, DetectionsDoNotOverlap) {
  Rng rng(33);
  PosteriorMatrix m("r", 0.01, 500, 4, MatrixKind::kSmoothed);
  for (auto& v : m.values()) v = rng.uniform();
  const auto ds = detect_keyword(fsa_of({{1, 2}}), m, open_config(Recombination::kPerState));
  ASSERT_GT(ds.size(), 1u);
  for (std::size_t i = 1; i < ds.size(); ++i) EXPECT_GT(ds[i].start, ds[i - 1].end);
}

TEST(Decoder, LogInputMatchesProbabilityInput) {
  Rng rng(34);
  PosteriorMatrix m("r", 0.01, 200, 4, MatrixKind::kSmoothed);
  for (auto& v : m.values()) v = rng.uniform(1e-3, 1.0);
  auto lm = m;
  lm.set_kind(MatrixKind::kLogSmoothed);
  for (auto& v : lm.values()) v = std::log(v);
  DecoderConfig cfg;
  const auto fsa = fsa_of({{1, 2, 3}});
  const auto a = detect_keyword(fsa, m, cfg), b = detect_keyword(fsa, lm, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].start, b[i].start);
    EXPECT_NEAR(a[i].probability, b[i].probability, 1e-12);
  }
}

TEST(Decoder, Errors) {
  auto m = flat(10, 3, 0.5);
  const auto fsa = fsa_of({{1, 2}});
  DecoderConfig bad;
  bad.theta_beam = 0.5;
  bad.theta_hit = 0.3;
  EXPECT_THROW(detect_keyword(fsa, m, bad), ValidationError);
  bad = {};
  bad.min_phone_frames = 0;
  EXPECT_THROW(detect_keyword(fsa, m, bad), ValidationError);
  EXPECT_THROW(detect_keyword(fsa_of({{1, 5}}), m, {}), ValidationError);
  m.set_kind(MatrixKind::kRaw);
  EXPECT_THROW(detect_keyword(fsa, m, {}), ValidationError);
}

TEST(Search, EmptyLexiconGivesNoHits) {
  const std::vector<PosteriorMatrix> ms{flat(50, 3, 0.5)};
  EXPECT_TRUE(search_corpus(KeywordLexicon{}, ms, {}).hits.empty());
}

TEST(Search, PlantedOccurrencesAreFound) {
  GenConfig g;
  g.num_utterances = 2;
  g.frames_per_utterance = 400;
  g.num_phones = 12;
  g.confusion_noise = 0.0;
  g.plants = {{"KW", 2, {3, 5, 7, 9}}};
  const auto corpus = generate_corpus(g);
  const auto raw = compute_raw_posteriors(corpus.lattices, corpus.phones, {});
  const auto feats = smooth_all(raw, estimate_confusion_model(raw), {});
  DecoderConfig cfg;
  cfg.theta_hit = 0.9;
  const auto result = search_corpus(corpus.lexicon, feats, cfg);
  ASSERT_EQ(result.hits.size(), 2u);
  ASSERT_EQ(corpus.refs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(result.hits[i].utt_id, corpus.refs[i].utt_id);
    // Neighbouring filler may repeat an edge phone, so the hit can be wider.
    const auto& h = result.hits[i];
    const auto& r = corpus.refs[i];
    EXPECT_LE(h.tbeg, r.tbeg + 1e-9);
    EXPECT_GE(h.tbeg + h.dur, r.tbeg + r.dur - 1e-9);
    EXPECT_LT(std::abs((h.tbeg + h.dur / 2) - (r.tbeg + r.dur / 2)), 0.5);
  }
  ASSERT_EQ(result.timings.size(), 1u);
  EXPECT_EQ(result.timings[0].kwid, "KW");
  EXPECT_NEAR(result.timings[0].seconds_audio, 8.0, 1e-9);
}

TEST(Search, DeterministicAcrossThreadCounts) {
  GenConfig g;
  g.num_utterances = 6;
  g.frames_per_utterance = 500;
  g.num_keywords = 8;
  g.occurrences = 2;
  g.confusion_noise = 0.4;
  const auto corpus = generate_corpus(g);
  const auto raw = compute_raw_posteriors(corpus.lattices, corpus.phones, {}, 3);
  EXPECT_EQ(raw, compute_raw_posteriors(corpus.lattices, corpus.phones, {}, 1));
  const auto feats = smooth_all(raw, estimate_confusion_model(raw), {});
  const auto one = serialize_hits(search_corpus(corpus.lexicon, feats, {}, 1).hits);
  EXPECT_FALSE(one.empty());
  for (unsigned jobs : {2u, 4u, 7u}) EXPECT_EQ(serialize_hits(search_corpus(corpus.lexicon, feats, {}, jobs).hits), one);
}
