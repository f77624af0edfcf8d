#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "ppbkws/ppbkws.hpp"

using namespace ppbkws;

namespace {

PhoneSet abc_phones() { return PhoneSet({"SIL", "a", "b", "c"}, 0); }

// Every arc lies on an initial->final path: checked by plain reachability.
bool all_arcs_on_complete_paths(const Lattice& lat) {
  const auto& nodes = lat.nodes();
  std::vector<bool> fwd(nodes.size(), false), bwd(nodes.size(), false);
  for (auto i : lat.initial_nodes()) fwd[i] = true;
  for (auto i : lat.final_nodes()) bwd[i] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < lat.arcs().size(); ++a) {
      const auto s = lat.src_index(a), d = lat.dst_index(a);
      if (fwd[s] && !fwd[d]) fwd[d] = changed = true;
      if (bwd[d] && !bwd[s]) bwd[s] = changed = true;
    }
  }
  for (std::size_t a = 0; a < lat.arcs().size(); ++a)
    if (!fwd[lat.src_index(a)] || !bwd[lat.dst_index(a)]) return false;
  return true;
}

}  // namespace

TEST(LatticeIo, OneArcLattice) {
  const auto lat = parse_lattice("UTT u 0.01 3\nNODE 0 0\nNODE 1 3\nARC 0 1 w 0.0 -1.5 0:2,1:1\n");
  EXPECT_EQ(lat.utt_id(), "u");
  EXPECT_EQ(lat.num_frames(), 3);
  ASSERT_EQ(lat.arcs().size(), 1u);
  const std::vector<PhoneSegment> want{{0, 2}, {1, 1}};
  EXPECT_EQ(lat.arcs()[0].alignment, want);
  EXPECT_DOUBLE_EQ(lat.arcs()[0].ac_loglik, -1.5);
}

TEST(LatticeIo, DurationMismatchIsValidationError) {
  EXPECT_THROW(parse_lattice("UTT u 0.01 3\nNODE 0 0\nNODE 1 3\nARC 0 1 w 0.0 -1.5 0:2,1:2\n"), ValidationError);
}

TEST(LatticeIo, MalformedLineReportsLineNumber) {
  try {
    parse_lattice("UTT u 0.01 3\n# comment\nNODE 0 0\nNODE 1 x\n");
    FAIL() << "no exception";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(LatticeIo, CycleIsValidationError) {
  try {
    parse_lattice("UTT u 0.01 4\nNODE 0 0\nNODE 1 2\nNODE 2 4\n"
                  "ARC 0 1 w 0 0 0:2\nARC 1 2 w 0 0 0:2\nARC 2 1 w 0 0 0:2\n");
    FAIL() << "no exception";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("cycl"), std::string::npos) << e.what();
  }
}

TEST(LatticeIo, UnknownNodeAndBadPhone) {
  EXPECT_THROW(parse_lattice("UTT u 0.01 2\nNODE 0 0\nARC 0 9 w 0 0 0:2\n"), ValidationError);
  const auto phones = abc_phones();
  EXPECT_THROW(parse_lattice("UTT u 0.01 2\nNODE 0 0\nNODE 1 2\nARC 0 1 w 0 0 7:2\n", &phones), ValidationError);
  try {
    parse_lattice("UTT u 0.01 2\nNODE 0 0\nNODE 1 2\nARC 0 1 w 0 0 zz:2\n", &phones);
    FAIL() << "no exception";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown phone zz"), std::string::npos);
  }
}

TEST(LatticeIo, LabelsAndIdsMix) {
  const auto phones = abc_phones();
  const auto lat = parse_lattice("UTT u 0.01 3\nNODE 0 0\nNODE 1 3\nARC 0 1 w 0 0 a:1,3:2\n", &phones);
  const std::vector<PhoneSegment> want{{1, 1}, {3, 2}};
  EXPECT_EQ(lat.arcs()[0].alignment, want);
}

TEST(LatticeIo, TrimsDeadEnds) {
  // Arc 0->2 ends at a node that reaches no final node.
  const auto lat = parse_lattice("UTT u 0.01 4\nNODE 0 0\nNODE 1 4\nNODE 2 2\n"
                                 "ARC 0 1 w 0 0 0:4\nARC 0 2 x 0 0 0:2\n");
  ASSERT_EQ(lat.arcs().size(), 1u);
  EXPECT_EQ(lat.arcs()[0].word, "w");
  EXPECT_EQ(lat.nodes().size(), 2u);
}

TEST(LatticeIo, MultipleLattices) {
  const auto all = parse_lattices("UTT a 0.01 2\nNODE 0 0\nNODE 1 2\nARC 0 1 w 0 0 0:2\n"
                                  "UTT b 0.02 1\nNODE 5 0\nNODE 6 1\nARC 5 6 v 0 0 1:1\n");
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].utt_id(), "b");
  EXPECT_DOUBLE_EQ(all[1].frame_shift(), 0.02);
  EXPECT_THROW(parse_lattice("UTT a 0.01 2\nNODE 0 0\nNODE 1 2\nARC 0 1 w 0 0 0:2\n"
                             "UTT b 0.01 2\nNODE 0 0\nNODE 1 2\nARC 0 1 w 0 0 0:2\n"),
               ValidationError);
}

TEST(LatticeIo, RandomRoundTripAndInvariants) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    RandomLatticeOptions opt;
    opt.num_arcs = 20;
    opt.max_nodes = 9;
    const auto lat = random_lattice(rng, opt);
    const auto text = serialize_lattice(lat);
    const auto back = parse_lattice(text);
    ASSERT_EQ(back, lat) << text;
    EXPECT_EQ(serialize_lattice(back), text);
    for (std::size_t a = 0; a < lat.arcs().size(); ++a) {
      int sum = 0;
      for (const auto& seg : lat.arcs()[a].alignment) sum += seg.frames;
      EXPECT_EQ(sum, lat.arc_end_frame(a) - lat.arc_start_frame(a));
      EXPECT_GT(sum, 0);
    }
    EXPECT_TRUE(all_arcs_on_complete_paths(lat));
  }
}

TEST(PhoneSetIo, ParseAndRoundTrip) {
  const auto phones = parse_phone_set("# phones\nSIL\na\nb\n");
  EXPECT_EQ(phones.size(), 3u);
  EXPECT_EQ(phones.silence_id(), 0);
  EXPECT_EQ(parse_phone_set(serialize_phone_set(phones)), phones);
  EXPECT_THROW(parse_phone_set("a\nb\n"), Error);
  EXPECT_THROW(parse_phone_set("SIL\na\nSIL\n"), Error);
  EXPECT_THROW(parse_phone_set("SIL\na\na\n"), Error);
}

TEST(KeywordIo, SinglePronunciation) {
  const auto phones = PhoneSet({"SIL", "s", "a", "k", "r", "t", "v", "e", "l", "o"}, 0);
  const auto lex = parse_keywords("KW1 sakartvelo s a k a r t v e l o\n", phones);
  ASSERT_EQ(lex.size(), 1u);
  const auto* e = lex.find("KW1");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->word, "sakartvelo");
  ASSERT_EQ(e->pronunciations.size(), 1u);
  EXPECT_EQ(e->pronunciations[0].size(), 10u);
}

TEST(KeywordIo, VariantsDuplicatesAndErrors) {
  const auto phones = abc_phones();
  std::vector<std::string> warnings;
  const auto lex = parse_keywords("K1 ab a b\nK1 ab a c\nK1 ab a b\n", phones, &warnings);
  EXPECT_EQ(lex.size(), 1u);
  EXPECT_EQ(lex.find("K1")->pronunciations.size(), 2u);
  EXPECT_EQ(warnings.size(), 1u);
  try {
    parse_keywords("K1 ab a zz\n", phones);
    FAIL() << "no exception";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unknown phone zz"), std::string::npos);
  }
  EXPECT_EQ(serialize_keywords(parse_keywords(serialize_keywords(lex, phones), phones), phones),
            serialize_keywords(lex, phones));
}

TEST(HitIo, RoundTrip) {
  Rng rng(3);
  std::vector<Hit> hits;
  std::vector<ReferenceOccurrence> refs;
  for (int i = 0; i < 100; ++i) {
    const double tbeg = rng.uniform() * 100.0;
    const double dur = 0.01 + rng.uniform();
    hits.push_back({"KW" + std::to_string(rng.uniform_int(0, 5)), "u" + std::to_string(rng.uniform_int(0, 3)), tbeg,
                    dur, std::log(rng.uniform() + 1e-9), rng.bernoulli(0.5) ? Decision::kYes : Decision::kNo});
    refs.push_back({hits.back().kwid, hits.back().utt_id, tbeg, dur});
  }
  EXPECT_EQ(parse_hits(serialize_hits(hits)), hits);
  EXPECT_EQ(parse_refs(serialize_refs(refs)), refs);
  EXPECT_THROW(parse_hits("K u -1 1 0 YES\n"), Error);
  EXPECT_THROW(parse_hits("K u 0 0 0 YES\n"), Error);
  EXPECT_THROW(parse_hits("K u 0 1 0 MAYBE\n"), Error);
  EXPECT_THROW(parse_refs("K u 0 1 0\n"), Error);
}
