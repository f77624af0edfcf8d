#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/decoder.hpp"
#include "ppbkws/error.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/lattice.hpp"
#include "ppbkws/lexicon.hpp"
#include "ppbkws/posteriors.hpp"
#include "ppbkws/scoring.hpp"
#include "ppbkws/search.hpp"
#include "ppbkws/smoothing.hpp"

namespace ppbkws {

struct RunConfig {
  PosteriorConfig posterior;
  SmoothingConfig smoothing;
  DecoderConfig decoder;
  ScoringConfig scoring;  // total_speech_seconds <= 0 means: sum of the feature durations
  double sto_gamma = 1.0;
  unsigned jobs = 1;
};

inline std::vector<PosteriorMatrix> compute_raw_posteriors(std::span<const Lattice> lattices, const PhoneSet& phones,
                                                           const PosteriorConfig& cfg, unsigned jobs = 1) {
  std::vector<PosteriorMatrix> out(lattices.size());
  detail::parallel_for(lattices.size(), jobs, [&](std::size_t i) { out[i] = compute_ppb(lattices[i], cfg, phones); });
  return out;
}

inline std::vector<PosteriorMatrix> smooth_all(std::span<const PosteriorMatrix> raw, const ConfusionModel& cm,
                                               const SmoothingConfig& cfg) {
  std::vector<PosteriorMatrix> out;
  out.reserve(raw.size());
  for (const auto& m : raw) out.push_back(smooth(m, cm, cfg));
  return out;
}

inline double total_duration(std::span<const PosteriorMatrix> ms) {
  double s = 0.0;
  for (const auto& m : ms) s += m.duration_seconds();
  return s;
}

struct Evaluation {
  std::vector<Hit> hits;  // STO-normalized
  TwvReport report;
};

// search -> STO -> align -> MTWV on already smoothed features.
inline Evaluation evaluate(const KeywordLexicon& lexicon, std::span<const PosteriorMatrix> smoothed,
                           std::span<const ReferenceOccurrence> refs, const RunConfig& cfg) {
  auto scoring = cfg.scoring;
  if (!(scoring.total_speech_seconds > 0.0)) scoring.total_speech_seconds = total_duration(smoothed);
  Evaluation ev;
  ev.hits = sto_normalize(search_corpus(lexicon, smoothed, cfg.decoder, cfg.jobs).hits, cfg.sto_gamma);
  ev.report = compute_mtwv(align_hits(ev.hits, refs, scoring), refs, scoring);
  return ev;
}

enum class SweepParam { kThetaHit, kThetaBeam, kThetaStart, kAlpha, kLambda };

inline std::optional<SweepParam> parse_sweep_param(std::string_view s) {
  if (s == "theta_hit" || s == "theta-hit") return SweepParam::kThetaHit;
  if (s == "theta_beam" || s == "theta-beam") return SweepParam::kThetaBeam;
  if (s == "theta_start" || s == "theta-start") return SweepParam::kThetaStart;
  if (s == "alpha") return SweepParam::kAlpha;
  if (s == "lambda") return SweepParam::kLambda;
  return std::nullopt;
}

struct SweepPoint {
  double value = 0.0;
  double mtwv = 0.0;
  double theta = 0.0;  // decision threshold at the MTWV point
};

// `steps` evenly spaced values from `from` to `to` inclusive.
inline std::vector<double> linspace(double from, double to, int steps) {
  if (steps < 1) throw ValidationError("sweep needs at least one step");
  std::vector<double> v;
  for (int i = 0; i < steps; ++i)
    v.push_back(steps == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1));
  return v;
}

// Runs the whole lattice -> MTWV pipeline once per parameter value. Only the
// stages downstream of the swept parameter are recomputed. The confusion model
// is estimated on the same lattices.
inline std::vector<SweepPoint> sweep(std::span<const Lattice> lattices, const PhoneSet& phones,
                                     const KeywordLexicon& lexicon, std::span<const ReferenceOccurrence> refs,
                                     const RunConfig& base, SweepParam param, std::span<const double> values) {
  std::vector<SweepPoint> out;
  std::optional<std::vector<PosteriorMatrix>> raw;
  std::optional<ConfusionModel> cm;
  std::optional<std::vector<PosteriorMatrix>> smoothed;
  for (double v : values) {
    RunConfig cfg = base;
    switch (param) {
      case SweepParam::kThetaHit: cfg.decoder.theta_hit = v; break;
      case SweepParam::kThetaBeam: cfg.decoder.theta_beam = v; break;
      case SweepParam::kThetaStart: cfg.decoder.theta_start = v; break;
      case SweepParam::kAlpha: cfg.smoothing.alpha = v; break;
      case SweepParam::kLambda: cfg.posterior.lambda = v; break;
    }
    if (param == SweepParam::kThetaHit && cfg.decoder.theta_beam > v) cfg.decoder.theta_beam = v;
    if (param == SweepParam::kLambda || !raw) {
      raw = compute_raw_posteriors(lattices, phones, cfg.posterior, cfg.jobs);
      cm = estimate_confusion_model(*raw);
      smoothed.reset();
    }
    if (param == SweepParam::kAlpha || !smoothed) smoothed = smooth_all(*raw, *cm, cfg.smoothing);
    const auto ev = evaluate(lexicon, *smoothed, refs, cfg);
    out.push_back({v, ev.report.mtwv, ev.report.theta});
  }
  return out;
}

}  // namespace ppbkws
