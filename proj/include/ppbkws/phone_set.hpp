#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

using PhoneId = std::int32_t;

inline constexpr std::string_view kSilenceLabel = "SIL";

// Ordered phone inventory; a phone's id is its position. Silence is an ordinary
// member of the set.
class PhoneSet {
 public:
  PhoneSet(std::vector<std::string> labels, PhoneId silence_id)
      : labels_(std::move(labels)), silence_id_(silence_id) {
    if (labels_.size() < 2) throw ValidationError("phone set needs at least 2 phones");
    if (silence_id_ < 0 || static_cast<std::size_t>(silence_id_) >= labels_.size())
      throw ValidationError("silence id out of range");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const auto& label = labels_[i];
      if (label.empty() || detail::has_whitespace(label))
        throw ValidationError("invalid phone label '" + label + "'");
      if (!index_.emplace(label, static_cast<PhoneId>(i)).second)
        throw ValidationError("duplicate phone label '" + label + "'");
    }
  }

  std::size_t size() const { return labels_.size(); }
  PhoneId silence_id() const { return silence_id_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(PhoneId id) const { return labels_.at(static_cast<std::size_t>(id)); }
  bool contains(PhoneId id) const { return id >= 0 && static_cast<std::size_t>(id) < labels_.size(); }

  std::optional<PhoneId> find(std::string_view label) const {
    const auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const PhoneSet& a, const PhoneSet& b) {
    return a.labels_ == b.labels_ && a.silence_id_ == b.silence_id_;
  }

 private:
  std::vector<std::string> labels_;
  PhoneId silence_id_;
  std::unordered_map<std::string, PhoneId> index_;
};

// One label per line; the line "SIL" marks silence and must appear exactly once.
inline PhoneSet parse_phone_set(std::string_view text) {
  std::vector<std::string> labels;
  std::optional<PhoneId> silence;
  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto body = detail::trim(detail::strip_comment(line));
    if (body.empty()) continue;
    if (detail::has_whitespace(body))
      throw ParseError(reader.line_number(), "phone label contains whitespace");
    if (body == kSilenceLabel) {
      if (silence) throw ParseError(reader.line_number(), "SIL appears more than once");
      silence = static_cast<PhoneId>(labels.size());
    }
    labels.emplace_back(body);
  }
  if (!silence) throw ValidationError("phone set has no SIL line");
  return PhoneSet(std::move(labels), *silence);
}

inline std::string serialize_phone_set(const PhoneSet& phones) {
  if (phones.label(phones.silence_id()) != kSilenceLabel)
    throw ValidationError("silence phone must be labelled SIL to serialize");
  std::string out;
  for (const auto& label : phones.labels()) {
    out += label;
    out += '\n';
  }
  return out;
}

}  // namespace ppbkws
