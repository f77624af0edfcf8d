#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/lexicon.hpp"

namespace ppbkws {

using StateId = std::int32_t;

struct FsaTransition {
  PhoneId phone = 0;
  StateId target = 0;
};

// Loop-free phone automaton holding every pronunciation of one keyword, built
// as a prefix-sharing trie. There are no filler or background states: each
// start-to-final path spells exactly one pronunciation. Every state except the
// start has a single incoming transition, so a state also names the phone
// that leads into it.
class KeywordFsa {
 public:
  static constexpr StateId kStart = 0;

  const std::string& kwid() const { return kwid_; }
  std::size_t num_states() const { return states_.size(); }
  std::size_t num_transitions() const { return states_.size() - 1; }

  std::span<const FsaTransition> transitions(StateId s) const { return states_[static_cast<std::size_t>(s)].out; }
  bool is_final(StateId s) const { return states_[static_cast<std::size_t>(s)].final; }
  // Phone on the transition into `s` (not defined for the start state).
  PhoneId incoming_phone(StateId s) const { return states_[static_cast<std::size_t>(s)].phone; }
  // Number of phones from the start state to `s`.
  std::int32_t depth(StateId s) const { return states_[static_cast<std::size_t>(s)].depth; }

  // True when the automaton is a single chain (one pronunciation).
  bool is_linear() const {
    for (const auto& st : states_)
      if (st.out.size() > 1) return false;
    return true;
  }

  // All start-to-final phone sequences, in depth-first transition order.
  std::vector<Pronunciation> pronunciations() const {
    std::vector<Pronunciation> out;
    Pronunciation prefix;
    auto walk = [&](auto&& self, StateId s) -> void {
      if (is_final(s)) out.push_back(prefix);
      for (const auto& tr : transitions(s)) {
        prefix.push_back(tr.phone);
        self(self, tr.target);
        prefix.pop_back();
      }
    };
    walk(walk, kStart);
    return out;
  }

  friend KeywordFsa build_keyword_fsa(std::string kwid, std::span<const Pronunciation> prons);

 private:
  struct State {
    std::vector<FsaTransition> out;
    bool final = false;
    PhoneId phone = -1;
    std::int32_t depth = 0;
  };

  std::string kwid_;
  std::vector<State> states_;
};

inline KeywordFsa build_keyword_fsa(std::string kwid, std::span<const Pronunciation> prons) {
  if (prons.empty()) throw ValidationError("keyword " + kwid + " has no pronunciations");
  KeywordFsa fsa;
  fsa.kwid_ = std::move(kwid);
  fsa.states_.emplace_back();
  for (const auto& pron : prons) {
    if (pron.empty()) throw ValidationError("keyword " + fsa.kwid_ + " has an empty pronunciation");
    StateId s = KeywordFsa::kStart;
    for (auto phone : pron) {
      StateId next = -1;
      for (const auto& tr : fsa.states_[static_cast<std::size_t>(s)].out)
        if (tr.phone == phone) next = tr.target;
      if (next < 0) {
        next = static_cast<StateId>(fsa.states_.size());
        KeywordFsa::State st;
        st.phone = phone;
        st.depth = fsa.states_[static_cast<std::size_t>(s)].depth + 1;
        fsa.states_.push_back(std::move(st));
        fsa.states_[static_cast<std::size_t>(s)].out.push_back({phone, next});
      }
      s = next;
    }
    fsa.states_[static_cast<std::size_t>(s)].final = true;
  }
  return fsa;
}

inline KeywordFsa build_keyword_fsa(const std::string& kwid, const KeywordEntry& entry) {
  return build_keyword_fsa(kwid, std::span<const Pronunciation>(entry.pronunciations));
}

}  // namespace ppbkws
