#pragma once

#include "json.hpp"

#include "docparse/idtp.hpp"
#include "docparse/reward.hpp"
#include "docparse/table_merge.hpp"

// JSON views of result types, used for sidecar reports and CLI output.
namespace docparse {

inline nlohmann::json to_json(const HeaderMatch& m) {
  return {{"kind", to_string(m.kind)},
          {"similarity", m.similarity},
          {"header_rows", m.header_rows},
          {"column_count_mismatch", m.column_count_mismatch}};
}

inline nlohmann::json to_json(const ContinuationDecision& d) {
  nlohmann::json j = {{"is_row_split", d.is_row_split}, {"score", d.score}, {"source", to_string(d.source)}};
  if (!d.fallback_reason.empty()) j["fallback_reason"] = d.fallback_reason;
  return j;
}

inline nlohmann::json to_json(const MergePlan& p) {
  nlohmann::json j = {{"pattern", to_string(p.pattern)},
                      {"header_rows_to_drop", p.header_rows_to_drop},
                      {"column_map", p.column_map},
                      {"header", to_json(p.header)}};
  if (p.boundary_join) {
    nlohmann::json joins = nlohmann::json::array();
    for (const BoundaryJoin& b : *p.boundary_join)
      joins.push_back({{"b_col", b.b_col}, {"a_col", b.a_col}, {"separator", b.separator}});
    j["boundary_join"] = joins;
  }
  if (p.continuation) j["continuation"] = to_json(*p.continuation);
  if (!p.reason.empty()) j["reason"] = p.reason;
  return j;
}

inline nlohmann::json to_json(const RuleReport& r) {
  return {{"well_formed", r.well_formed},
          {"rectangular", r.rectangular},
          {"placeholder_ok", r.placeholder_ok},
          {"non_empty", r.non_empty},
          {"score", r.score}};
}

inline nlohmann::json to_json(const VerificationReport& r) {
  return {{"residual_placeholders", r.residual_placeholders},
          {"unused_entries", r.unused_entries},
          {"duplicate_srcs", r.duplicate_srcs},
          {"foreign_srcs", r.foreign_srcs},
          {"ok", r.empty()}};
}

inline nlohmann::json to_json(const RestoreResult& r) {
  nlohmann::json j = {{"rewrites", r.rewrites}, {"unused_entries", r.unused_entries}, {"issues", r.issues}};
  if (r.count_mismatch)
    j["count_mismatch"] = {{"found", r.count_mismatch->found}, {"expected", r.count_mismatch->expected}};
  return j;
}

inline nlohmann::json to_json(const PrefPair& p) {
  return {{"positive", p.positive},
          {"negative", p.negative},
          {"perturbation", to_string(p.perturbation)},
          {"seed", p.seed}};
}

}  // namespace docparse
