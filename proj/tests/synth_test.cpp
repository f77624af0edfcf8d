#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ppbkws/ppbkws.hpp"

using namespace ppbkws;

TEST(Rng, KnownSequenceAndRanges) {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.uniform_int(-3, 9);
    EXPECT_EQ(x, b.uniform_int(-3, 9));
    EXPECT_GE(x, -3);
    EXPECT_LE(x, 9);
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Generator, SameSeedSameBytes) {
  GenConfig g;
  g.num_utterances = 5;
  g.frames_per_utterance = 600;
  g.num_keywords = 4;
  const auto x = generate_corpus(g), y = generate_corpus(g);
  EXPECT_EQ(serialize_lattices(x.lattices), serialize_lattices(y.lattices));
  EXPECT_EQ(serialize_refs(x.refs), serialize_refs(y.refs));
  EXPECT_EQ(serialize_keywords(x.lexicon, x.phones), serialize_keywords(y.lexicon, y.phones));
  g.seed = 8;
  EXPECT_NE(serialize_lattices(generate_corpus(g).lattices), serialize_lattices(x.lattices));
}

TEST(Generator, ShapeMatchesConfig) {
  GenConfig g;
  const auto c = generate_corpus(g);
  EXPECT_EQ(c.phones.size(), 30u);
  EXPECT_EQ(c.phones.label(0), "SIL");
  EXPECT_EQ(c.lattices.size(), 50u);
  EXPECT_EQ(c.lexicon.size(), 20u);
  EXPECT_EQ(c.refs.size(), 60u);
  EXPECT_DOUBLE_EQ(c.speech_seconds, 500.0);
  for (const auto& lat : c.lattices) {
    EXPECT_EQ(lat.num_frames(), 1000);
    EXPECT_EQ(lat.nodes().front().frame, 0);
    EXPECT_EQ(lat.nodes().back().frame, 1000);
  }
  // Lattices survive a trip through the text format.
  EXPECT_EQ(parse_lattices(serialize_lattices(c.lattices), &c.phones), c.lattices);
}

TEST(Generator, NoiseFreeCorpusIsOneHotOnPlants) {
  GenConfig g;
  g.num_utterances = 10;
  g.confusion_noise = 0.0;
  const auto c = generate_corpus(g);
  for (const auto& lat : c.lattices) {
    const auto m = compute_ppb(lat, {g.lambda}, c.phones);
    for (std::size_t t = 0; t < m.frames(); ++t) {
      int ones = 0;
      for (double v : m.row(t)) {
        EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0) < 1e-12);
        ones += v > 0.5;
      }
      EXPECT_EQ(ones, 1);
    }
  }
  // Planted spans carry the keyword's phones.
  for (const auto& r : c.refs) {
    const auto& lat = *std::find_if(c.lattices.begin(), c.lattices.end(), [&](const Lattice& l) { return l.utt_id() == r.utt_id; });
    const auto m = compute_ppb(lat, {g.lambda}, c.phones);
    const auto first = static_cast<std::size_t>(std::lround(r.tbeg / 0.01));
    const auto& pron = c.lexicon.find(r.kwid)->pronunciations;
    bool starts_with_first_phone = false;
    for (const auto& p : pron) starts_with_first_phone |= m.at(first, static_cast<std::size_t>(p.front())) == 1.0;
    EXPECT_TRUE(starts_with_first_phone) << r.kwid << " " << r.utt_id;
  }
}

TEST(Generator, TrueArcsCarryOneMinusNoise) {
  GenConfig g;
  g.num_utterances = 3;
  g.confusion_noise = 0.3;
  const auto c = generate_corpus(g);
  for (const auto& lat : c.lattices) {
    const auto post = arc_posteriors(lat, {g.lambda});
    for (std::size_t a = 0; a < post.size(); ++a)
      if (lat.arcs()[a].word.find("_alt") == std::string::npos) {
        EXPECT_NEAR(post[a], 0.7, 1e-9);
      }
  }
}

TEST(Generator, Errors) {
  GenConfig g;
  g.plants = {{"KW", 1, {1, 2, 99}}};
  EXPECT_THROW(generate_corpus(g), ValidationError);
  g = {};
  g.confusion_noise = 1.0;
  EXPECT_THROW(generate_corpus(g), ValidationError);
  g = {};
  g.branching = 0;
  EXPECT_THROW(generate_corpus(g), ValidationError);
  g = {};
  g.num_utterances = 1;
  g.frames_per_utterance = 30;
  EXPECT_THROW(generate_corpus(g), ValidationError);
}

TEST(Pipeline, SweepProducesOnePointPerValue) {
  GenConfig g;
  g.num_utterances = 8;
  g.num_keywords = 6;
  g.occurrences = 2;
  const auto c = generate_corpus(g);
  const auto values = linspace(0.2, 0.8, 4);
  const auto pts = sweep(c.lattices, c.phones, c.lexicon, c.refs, {}, SweepParam::kThetaHit, values);
  ASSERT_EQ(pts.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(pts[i].value, values[i]);
    EXPECT_LE(pts[i].mtwv, 1.0);
  }
  const auto alphas = sweep(c.lattices, c.phones, c.lexicon, c.refs, {}, SweepParam::kAlpha, linspace(0.0, 1.0, 3));
  EXPECT_EQ(alphas.size(), 3u);
  EXPECT_FALSE(parse_sweep_param("gamma"));
  EXPECT_EQ(parse_sweep_param("theta-hit"), SweepParam::kThetaHit);
  EXPECT_THROW(linspace(0, 1, 0), ValidationError);
}
