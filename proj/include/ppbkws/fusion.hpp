#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ppbkws/error.hpp"
#include "ppbkws/hits.hpp"

namespace ppbkws {

// One system's STO-normalized hit list.
struct SystemHits {
  std::string name;
  double weight = 1.0;
  std::vector<Hit> hits;
};

// Divides each keyword's scores by their sum.
inline void normalize_shares(std::vector<Hit>& hits) {
  std::map<std::string, double> sums;
  for (const auto& h : hits) sums[h.kwid] += h.score;
  for (auto& h : hits) h.score /= sums[h.kwid];
}

// List-level fusion. Within each (kwid, utt_id), hits of different systems
// whose midpoints lie within `tolerance` of a cluster's first hit form one
// cluster, with at most one hit per system. A cluster scores
// sum_i w_i s_i / sum_i w_i over all systems (absent ones count as 0) and takes
// its times from the highest-weighted contributor. Clusters that end up with
// score 0 are dropped and the result is re-normalized per keyword unless
// `renormalize` is false.
inline std::vector<Hit> fuse_lists(std::span<const SystemHits> systems, double tolerance = 0.5,
                                   bool renormalize = true) {
  if (systems.empty()) throw Error("fusion needs at least one hit list");
  if (!(tolerance > 0.0)) throw ValidationError("fusion tolerance must be positive");
  double weight_sum = 0.0;
  for (const auto& s : systems) {
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight))
      throw ValidationError("weight of '" + s.name + "' must be a finite value >= 0");
    weight_sum += s.weight;
  }
  if (!(weight_sum > 0.0)) throw ValidationError("fusion weights are all zero");

  struct Entry {
    std::size_t system;
    const Hit* hit;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Entry>> groups;
  for (std::size_t s = 0; s < systems.size(); ++s)
    for (const auto& h : systems[s].hits) groups[{h.kwid, h.utt_id}].push_back({s, &h});

  struct Cluster {
    double anchor;
    std::vector<const Hit*> members;  // indexed by system
  };

  std::vector<Hit> out;
  for (auto& [key, entries] : groups) {
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.hit->tbeg, a.system) < std::tie(b.hit->tbeg, b.system);
    });
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.hit->midpoint() < b.hit->midpoint();
    });
    std::vector<Cluster> clusters;
    for (const auto& e : entries) {
      const double mid = e.hit->midpoint();
      std::optional<std::size_t> best;
      for (std::size_t c = clusters.size(); c-- > 0;) {
        if (mid - clusters[c].anchor > tolerance) break;
        if (clusters[c].members[e.system]) continue;
        if (!best || std::abs(mid - clusters[c].anchor) <= std::abs(mid - clusters[*best].anchor)) best = c;
      }
      if (!best) {
        clusters.push_back({mid, std::vector<const Hit*>(systems.size(), nullptr)});
        best = clusters.size() - 1;
      }
      clusters[*best].members[e.system] = e.hit;
    }

    for (const auto& c : clusters) {
      double score = 0.0;
      std::optional<std::size_t> lead;
      bool any_yes = false;
      for (std::size_t s = 0; s < systems.size(); ++s) {
        const Hit* h = c.members[s];
        if (!h) continue;
        score += systems[s].weight * h->score;
        any_yes = any_yes || h->decision == Decision::kYes;
        if (!lead || systems[s].weight > systems[*lead].weight ||
            (systems[s].weight == systems[*lead].weight && h->score > c.members[*lead]->score))
          lead = s;
      }
      score /= weight_sum;
      if (!(score > 0.0)) continue;
      Hit fused = *c.members[*lead];
      fused.score = score;
      fused.decision = any_yes ? Decision::kYes : Decision::kNo;
      out.push_back(std::move(fused));
    }
  }
  if (renormalize) normalize_shares(out);
  sort_hits(out);
  return out;
}

}  // namespace ppbkws
