#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/phone_set.hpp"
#include "ppbkws/text.hpp"

namespace ppbkws {

using FrameIndex = std::int32_t;
using NodeId = std::int64_t;

inline constexpr double kDefaultFrameShift = 0.01;

struct PhoneSegment {
  PhoneId phone = 0;
  FrameIndex frames = 0;

  friend bool operator==(const PhoneSegment&, const PhoneSegment&) = default;
};

struct LatticeNode {
  NodeId id = 0;
  FrameIndex frame = 0;

  friend bool operator==(const LatticeNode&, const LatticeNode&) = default;
};

// Word arc. Scores are natural logs; the alignment tiles [frame(src), frame(dst)).
struct LatticeArc {
  NodeId src = 0;
  NodeId dst = 0;
  std::string word;
  double lm_logprob = 0.0;
  double ac_loglik = 0.0;
  std::vector<PhoneSegment> alignment;

  friend bool operator==(const LatticeArc&, const LatticeArc&) = default;
};

// Validated, trimmed, topologically ordered word lattice.
//
// Initial nodes are the nodes at the earliest frame, final nodes those at the
// latest frame. Frames outside that span (or every frame, for an empty
// lattice) are not covered by any arc.
class Lattice {
 public:
  Lattice() = default;

  // Validates the graph, drops arcs that are not on a complete initial->final
  // path, then orders nodes by (frame, id) and arcs stably by source position.
  // When `phones` is given every alignment phone id must be inside it.
  static Lattice create(std::string utt_id, double frame_shift, FrameIndex num_frames,
                        std::vector<LatticeNode> nodes, std::vector<LatticeArc> arcs,
                        const PhoneSet* phones = nullptr);

  const std::string& utt_id() const { return utt_id_; }
  double frame_shift() const { return frame_shift_; }
  FrameIndex num_frames() const { return num_frames_; }
  const std::vector<LatticeNode>& nodes() const { return nodes_; }
  const std::vector<LatticeArc>& arcs() const { return arcs_; }
  bool empty() const { return arcs_.empty(); }

  std::size_t src_index(std::size_t arc) const { return arc_src_[arc]; }
  std::size_t dst_index(std::size_t arc) const { return arc_dst_[arc]; }
  FrameIndex arc_start_frame(std::size_t arc) const { return nodes_[arc_src_[arc]].frame; }
  FrameIndex arc_end_frame(std::size_t arc) const { return nodes_[arc_dst_[arc]].frame; }

  // Node indices (into nodes()) at the first / last frame.
  std::vector<std::size_t> initial_nodes() const;
  std::vector<std::size_t> final_nodes() const;

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.utt_id_ == b.utt_id_ && a.frame_shift_ == b.frame_shift_ &&
           a.num_frames_ == b.num_frames_ && a.nodes_ == b.nodes_ && a.arcs_ == b.arcs_;
  }

 private:
  std::string utt_id_;
  double frame_shift_ = kDefaultFrameShift;
  FrameIndex num_frames_ = 0;
  std::vector<LatticeNode> nodes_;
  std::vector<LatticeArc> arcs_;
  std::vector<std::size_t> arc_src_;
  std::vector<std::size_t> arc_dst_;
};

inline Lattice Lattice::create(std::string utt_id, double frame_shift, FrameIndex num_frames,
                               std::vector<LatticeNode> nodes, std::vector<LatticeArc> arcs,
                               const PhoneSet* phones) {
  const std::string ctx = "utterance '" + utt_id + "': ";
  if (utt_id.empty() || detail::has_whitespace(utt_id))
    throw ValidationError("invalid utterance id '" + utt_id + "'");
  if (!(frame_shift > 0.0)) throw ValidationError(ctx + "frame shift must be positive");
  if (num_frames <= 0) throw ValidationError(ctx + "number of frames must be positive");

  std::unordered_map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.frame < 0 || n.frame > num_frames)
      throw ValidationError(ctx + "node " + std::to_string(n.id) + " frame out of range");
    if (!index.emplace(n.id, i).second)
      throw ValidationError(ctx + "duplicate node id " + std::to_string(n.id));
  }

  const std::size_t num_nodes = nodes.size();
  std::vector<std::size_t> src(arcs.size()), dst(arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const auto& arc = arcs[a];
    const auto s = index.find(arc.src);
    const auto d = index.find(arc.dst);
    if (s == index.end() || d == index.end())
      throw ValidationError(ctx + "arc " + std::to_string(a) + " references an unknown node");
    src[a] = s->second;
    dst[a] = d->second;
    if (arc.word.empty() || detail::has_whitespace(arc.word))
      throw ValidationError(ctx + "arc " + std::to_string(a) + " has an invalid word label");
    if (arc.alignment.empty())
      throw ValidationError(ctx + "arc " + std::to_string(a) + " has an empty phone alignment");
    for (const auto& seg : arc.alignment) {
      if (seg.frames < 1)
        throw ValidationError(ctx + "arc " + std::to_string(a) + " has a phone duration < 1");
      if (seg.phone < 0 || (phones && !phones->contains(seg.phone)))
        throw ValidationError(ctx + "arc " + std::to_string(a) + " has phone id " +
                              std::to_string(seg.phone) + " outside the phone set");
    }
  }

  // Kahn's algorithm; anything left unvisited lies on a cycle.
  {
    std::vector<std::size_t> indegree(num_nodes, 0);
    std::vector<std::vector<std::size_t>> out(num_nodes);
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      out[src[a]].push_back(dst[a]);
      ++indegree[dst[a]];
    }
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < num_nodes; ++i)
      if (indegree[i] == 0) stack.push_back(i);
    std::size_t visited = 0;
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      ++visited;
      for (auto m : out[n])
        if (--indegree[m] == 0) stack.push_back(m);
    }
    if (visited != num_nodes) throw ValidationError(ctx + "lattice contains a cycle");
  }

  for (std::size_t a = 0; a < arcs.size(); ++a) {
    FrameIndex total = 0;
    for (const auto& seg : arcs[a].alignment) total += seg.frames;
    const FrameIndex span = nodes[dst[a]].frame - nodes[src[a]].frame;
    if (span <= 0 || total != span)
      throw ValidationError(ctx + "arc " + std::to_string(a) + " alignment durations sum to " +
                            std::to_string(total) + " but the arc spans " +
                            std::to_string(span) + " frames");
  }

  // Trim to arcs on a complete path. Since every arc moves strictly forward in
  // time, sorting by frame is a topological order.
  std::vector<std::size_t> order(num_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return nodes[x].frame != nodes[y].frame ? nodes[x].frame < nodes[y].frame
                                            : nodes[x].id < nodes[y].id;
  });
  std::vector<std::size_t> position(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) position[order[i]] = i;

  std::vector<bool> forward(num_nodes, false), backward(num_nodes, false);
  if (num_nodes > 0) {
    const FrameIndex first = nodes[order.front()].frame;
    const FrameIndex last = nodes[order.back()].frame;
    for (std::size_t i = 0; i < num_nodes; ++i) {
      if (nodes[i].frame == first) forward[i] = true;
      if (nodes[i].frame == last) backward[i] = true;
    }
    std::vector<std::size_t> by_src(arcs.size());
    std::iota(by_src.begin(), by_src.end(), std::size_t{0});
    std::stable_sort(by_src.begin(), by_src.end(),
                     [&](std::size_t x, std::size_t y) { return position[src[x]] < position[src[y]]; });
    for (auto a : by_src)
      if (forward[src[a]]) forward[dst[a]] = true;
    for (auto it = by_src.rbegin(); it != by_src.rend(); ++it)
      if (backward[dst[*it]]) backward[src[*it]] = true;
  }

  Lattice lat;
  lat.utt_id_ = std::move(utt_id);
  lat.frame_shift_ = frame_shift;
  lat.num_frames_ = num_frames;

  std::vector<std::size_t> new_index(num_nodes, SIZE_MAX);
  for (auto i : order) {
    if (!(forward[i] && backward[i])) continue;
    new_index[i] = lat.nodes_.size();
    lat.nodes_.push_back(nodes[i]);
  }

  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < arcs.size(); ++a)
    if (new_index[src[a]] != SIZE_MAX && new_index[dst[a]] != SIZE_MAX) kept.push_back(a);
  // Without a surviving arc there is no complete path.
  if (kept.empty()) lat.nodes_.clear();
  std::stable_sort(kept.begin(), kept.end(),
                   [&](std::size_t x, std::size_t y) { return new_index[src[x]] < new_index[src[y]]; });
  for (auto a : kept) {
    lat.arc_src_.push_back(new_index[src[a]]);
    lat.arc_dst_.push_back(new_index[dst[a]]);
    lat.arcs_.push_back(std::move(arcs[a]));
  }
  return lat;
}

inline std::vector<std::size_t> Lattice::initial_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size() && nodes_[i].frame == nodes_.front().frame; ++i)
    out.push_back(i);
  return out;
}

inline std::vector<std::size_t> Lattice::final_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].frame == nodes_.back().frame) out.push_back(i);
  return out;
}

namespace detail {

inline std::vector<PhoneSegment> parse_alignment(std::string_view field, const PhoneSet* phones,
                                                 std::size_t line) {
  std::vector<PhoneSegment> out;
  for (auto item : split(field, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string_view::npos)
      throw ParseError(line, "alignment item '" + std::string(item) + "' is not phone:duration");
    const auto phone_tok = item.substr(0, colon);
    PhoneSegment seg;
    if (phones) {
      if (auto id = phones->find(phone_tok)) {
        seg.phone = *id;
      } else if (auto num = parse_number<PhoneId>(phone_tok)) {
        seg.phone = *num;
      } else {
        throw ParseError(line, "unknown phone " + std::string(phone_tok));
      }
    } else {
      seg.phone = parse_number_or_throw<PhoneId>(phone_tok, line, "phone id");
    }
    seg.frames = parse_number_or_throw<FrameIndex>(item.substr(colon + 1), line, "duration");
    out.push_back(seg);
  }
  return out;
}

}  // namespace detail

// Parses one or more concatenated lattices. Alignment phones may be ids or,
// when `phones` is given, labels (labels take precedence).
inline std::vector<Lattice> parse_lattices(std::string_view text, const PhoneSet* phones = nullptr) {
  struct Pending {
    std::string utt_id;
    double frame_shift = kDefaultFrameShift;
    FrameIndex num_frames = 0;
    std::vector<LatticeNode> nodes;
    std::vector<LatticeArc> arcs;
  };
  std::vector<Lattice> out;
  std::optional<Pending> cur;
  auto flush = [&] {
    if (!cur) return;
    out.push_back(Lattice::create(std::move(cur->utt_id), cur->frame_shift, cur->num_frames,
                                  std::move(cur->nodes), std::move(cur->arcs), phones));
    cur.reset();
  };

  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto ln = reader.line_number();
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok[0] == "UTT") {
      if (tok.size() != 4) throw ParseError(ln, "expected 'UTT <utt_id> <frame_shift> <num_frames>'");
      flush();
      cur.emplace();
      cur->utt_id = std::string(tok[1]);
      cur->frame_shift = detail::parse_number_or_throw<double>(tok[2], ln, "frame shift");
      cur->num_frames = detail::parse_number_or_throw<FrameIndex>(tok[3], ln, "frame count");
    } else if (tok[0] == "NODE") {
      if (!cur) throw ParseError(ln, "NODE before UTT");
      if (tok.size() != 3) throw ParseError(ln, "expected 'NODE <id> <frame>'");
      cur->nodes.push_back({detail::parse_number_or_throw<NodeId>(tok[1], ln, "node id"),
                            detail::parse_number_or_throw<FrameIndex>(tok[2], ln, "frame")});
    } else if (tok[0] == "ARC") {
      if (!cur) throw ParseError(ln, "ARC before UTT");
      if (tok.size() != 7)
        throw ParseError(ln, "expected 'ARC <src> <dst> <word> <lm_logprob> <ac_loglik> <alignment>'");
      LatticeArc arc;
      arc.src = detail::parse_number_or_throw<NodeId>(tok[1], ln, "node id");
      arc.dst = detail::parse_number_or_throw<NodeId>(tok[2], ln, "node id");
      arc.word = std::string(tok[3]);
      arc.lm_logprob = detail::parse_number_or_throw<double>(tok[4], ln, "lm_logprob");
      arc.ac_loglik = detail::parse_number_or_throw<double>(tok[5], ln, "ac_loglik");
      arc.alignment = detail::parse_alignment(tok[6], phones, ln);
      cur->arcs.push_back(std::move(arc));
    } else {
      throw ParseError(ln, "unknown record '" + std::string(tok[0]) + "'");
    }
  }
  flush();
  return out;
}

inline Lattice parse_lattice(std::string_view text, const PhoneSet* phones = nullptr) {
  auto all = parse_lattices(text, phones);
  if (all.size() != 1)
    throw ValidationError("expected exactly one lattice, found " + std::to_string(all.size()));
  return std::move(all.front());
}

// Phones are written as ids.
inline std::string serialize_lattice(const Lattice& lat) {
  std::string out = "UTT " + lat.utt_id() + " " + detail::format_double(lat.frame_shift()) + " " +
                    std::to_string(lat.num_frames()) + "\n";
  for (const auto& n : lat.nodes())
    out += "NODE " + std::to_string(n.id) + " " + std::to_string(n.frame) + "\n";
  for (const auto& a : lat.arcs()) {
    out += "ARC " + std::to_string(a.src) + " " + std::to_string(a.dst) + " " + a.word + " " +
           detail::format_double(a.lm_logprob) + " " + detail::format_double(a.ac_loglik) + " ";
    for (std::size_t i = 0; i < a.alignment.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(a.alignment[i].phone) + ":" + std::to_string(a.alignment[i].frames);
    }
    out += '\n';
  }
  return out;
}

inline std::string serialize_lattices(std::span<const Lattice> lattices) {
  std::string out;
  for (const auto& lat : lattices) out += serialize_lattice(lat);
  return out;
}

}  // namespace ppbkws
