#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/phone_set.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

using Pronunciation = std::vector<PhoneId>;

struct KeywordEntry {
  std::string word;
  std::vector<Pronunciation> pronunciations;

  friend bool operator==(const KeywordEntry&, const KeywordEntry&) = default;
};

// kwid -> pronunciation variants, ordered by kwid.
class KeywordLexicon {
 public:
  // Returns false (and keeps the lexicon unchanged) for a duplicate
  // kwid+pronunciation pair.
  bool add(const std::string& kwid, const std::string& word, Pronunciation pron) {
    if (kwid.empty() || detail::has_whitespace(kwid)) throw ValidationError("invalid kwid '" + kwid + "'");
    if (pron.empty()) throw ValidationError("empty pronunciation for " + kwid);
    auto& entry = entries_[kwid];
    if (entry.word.empty()) entry.word = word;
    if (std::find(entry.pronunciations.begin(), entry.pronunciations.end(), pron) != entry.pronunciations.end())
      return false;
    entry.pronunciations.push_back(std::move(pron));
    return true;
  }

  const std::map<std::string, KeywordEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const KeywordEntry* find(const std::string& kwid) const {
    const auto it = entries_.find(kwid);
    return it == entries_.end() ? nullptr : &it->second;
  }

  friend bool operator==(const KeywordLexicon&, const KeywordLexicon&) = default;

 private:
  std::map<std::string, KeywordEntry> entries_;
};

// One pronunciation per line: "<kwid> <word-form> <phone> <phone> ...".
// Duplicate kwid+pronunciation lines are dropped with a warning.
inline KeywordLexicon parse_keywords(std::string_view text, const PhoneSet& phones,
                                     std::vector<std::string>* warnings = nullptr) {
  KeywordLexicon lex;
  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto ln = reader.line_number();
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ParseError(ln, "expected '<kwid> <word-form> <phone> ...'");
    Pronunciation pron;
    for (std::size_t i = 2; i < tok.size(); ++i) {
      const auto id = phones.find(tok[i]);
      if (!id) throw ParseError(ln, "unknown phone " + std::string(tok[i]));
      pron.push_back(*id);
    }
    if (!lex.add(std::string(tok[0]), std::string(tok[1]), std::move(pron)) && warnings)
      warnings->push_back("line " + std::to_string(ln) + ": duplicate pronunciation for " + std::string(tok[0]));
  }
  return lex;
}

inline std::string serialize_keywords(const KeywordLexicon& lex, const PhoneSet& phones) {
  std::string out;
  for (const auto& [kwid, entry] : lex.entries()) {
    for (const auto& pron : entry.pronunciations) {
      out += kwid + ' ' + entry.word;
      for (auto p : pron) out += ' ' + phones.label(p);
      out += '\n';
    }
  }
  return out;
}

}  // namespace ppbkws
