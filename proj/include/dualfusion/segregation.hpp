#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dualfusion/geometry.hpp"
#include "dualfusion/model.hpp"

namespace dualfusion {

// Three-way partition of the union of both proposal lists. valid_base /
// valid_novel hold indices into the respective input list, in input
// order; overlapping covers every remaining proposal as (source, index).
struct SegregationResult {
  std::vector<std::size_t> valid_base;
  std::vector<std::size_t> valid_novel;
  std::vector<std::pair<Source, std::size_t>> overlapping;
};

// A base proposal is valid iff its IoA with every novel proposal stays
// below tau (vacuously valid when the novel side is empty), and
// symmetrically for novel proposals; everything else is overlapping.
// The IoA is taken with the tested proposal's own area as denominator,
// so the question is "how much of THIS proposal is covered". Ties at tau
// go to overlapping. Objectness plays no role; the rule is purely
// geometric, and each side is tested against the full opposing set.
inline SegregationResult segregate(const std::vector<Proposal>& base_proposals,
                                   const std::vector<Proposal>& novel_proposals,
                                   double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("segregation threshold tau must be in [0,1]");
  }
  SegregationResult result;
  for (std::size_t i = 0; i < base_proposals.size(); ++i) {
    double max_ioa = 0.0;
    for (const Proposal& q : novel_proposals) {
      max_ioa = std::max(max_ioa, ioa(base_proposals[i].box, q.box));
    }
    if (max_ioa < tau || novel_proposals.empty()) {
      result.valid_base.push_back(i);
    } else {
      result.overlapping.emplace_back(Source::kBase, i);
    }
  }
  for (std::size_t j = 0; j < novel_proposals.size(); ++j) {
    double max_ioa = 0.0;
    for (const Proposal& p : base_proposals) {
      max_ioa = std::max(max_ioa, ioa(novel_proposals[j].box, p.box));
    }
    if (max_ioa < tau || base_proposals.empty()) {
      result.valid_novel.push_back(j);
    } else {
      result.overlapping.emplace_back(Source::kNovel, j);
    }
  }
  return result;
}

}  // namespace dualfusion
