#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ppbkws/decoder.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/keyword_fsa.hpp"
#include "ppbkws/lexicon.hpp"
#include "ppbkws/posteriors.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

struct KeywordTiming {
  std::string kwid;
  double seconds_audio = 0.0;
  double wall_seconds = 0.0;
  double rtf = 0.0;
};

struct SearchResult {
  std::vector<Hit> hits;  // ordered by (kwid, utt_id, tbeg)
  std::vector<KeywordTiming> timings;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first exception
// is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Decodes every keyword of the lexicon over every utterance. Work is split per
// keyword; each keyword's wall time covers all utterances, so rtf is
// wall_seconds / total audio seconds.
inline SearchResult search_corpus(const KeywordLexicon& lexicon, std::span<const PosteriorMatrix> matrices,
                                  const DecoderConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  double audio = 0.0;
  for (const auto& m : matrices) {
    if (m.kind() == MatrixKind::kRaw)
      throw ValidationError("search needs smoothed features; '" + m.utt_id() + "' is raw");
    audio += m.duration_seconds();
  }

  std::vector<const std::string*> kwids;
  std::vector<KeywordFsa> fsas;
  for (const auto& [kwid, entry] : lexicon.entries()) {
    kwids.push_back(&kwid);
    fsas.push_back(build_keyword_fsa(kwid, entry));
  }

  std::vector<std::vector<Hit>> per_keyword(fsas.size());
  SearchResult result;
  result.timings.resize(fsas.size());
  detail::parallel_for(fsas.size(), jobs, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& m : matrices) {
      auto hits = decode_keyword(fsas[k], m, cfg);
      per_keyword[k].insert(per_keyword[k].end(), std::make_move_iterator(hits.begin()),
                            std::make_move_iterator(hits.end()));
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.timings[k] = {*kwids[k], audio, wall, audio > 0.0 ? wall / audio : 0.0};
  });

  for (auto& hits : per_keyword)
    result.hits.insert(result.hits.end(), std::make_move_iterator(hits.begin()), std::make_move_iterator(hits.end()));
  sort_hits(result.hits);
  return result;
}

// TSV: kwid seconds_audio wall_seconds rtf.
inline std::string serialize_rtf_report(std::span<const KeywordTiming> timings) {
  std::string out;
  for (const auto& t : timings) {
    out += t.kwid + '\t' + detail::format_double(t.seconds_audio) + '\t' + detail::format_double(t.wall_seconds) +
           '\t' + detail::format_double(t.rtf) + '\n';
  }
  return out;
}

}  // namespace ppbkws
