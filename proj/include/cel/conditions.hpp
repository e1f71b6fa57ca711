#ifndef CEL_CONDITIONS_HPP
#define CEL_CONDITIONS_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cel/dag.hpp"
#include "cel/model.hpp"

namespace cel {

enum class ConditionId { t1_cond, t1_uncond, t2_cond, t2_uncond, t3_cond, t3_uncond, irrel };

inline std::string_view to_string(ConditionId c) {
  switch (c) {
    case ConditionId::t1_cond: return "T1.Cond";
    case ConditionId::t1_uncond: return "T1.Uncond";
    case ConditionId::t2_cond: return "T2.Cond";
    case ConditionId::t2_uncond: return "T2.Uncond";
    case ConditionId::t3_cond: return "T3.Cond";
    case ConditionId::t3_uncond: return "T3.Uncond";
    case ConditionId::irrel: return "Irrel";
  }
  return "?";
}

inline std::optional<ConditionId> parse_condition(std::string_view s) {
  for (auto c : {ConditionId::t1_cond, ConditionId::t1_uncond, ConditionId::t2_cond, ConditionId::t2_uncond,
                 ConditionId::t3_cond, ConditionId::t3_uncond, ConditionId::irrel})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct ConditionReport {
  ConditionId id = ConditionId::t1_uncond;
  bool holds_graphically = false;
  std::vector<std::string> witness;  // adjustment set, by node name
  std::string explanation;
};

/// Every directed path from an exposure node to y passes through `summary`.
inline bool versions_irrelevant(const Dag& g, const NodeSet& exposures, NodeId summary, NodeId y) {
  g.check(summary);
  g.check(y);
  // Remove the summary and ask whether y is still reachable.
  Dag pruned = detail::rebuild_without(g, [&](NodeId p, NodeId c) { return p == summary || c == summary; });
  NodeSet from;
  for (NodeId x : exposures)
    if (x != summary) from.push_back(x);
  return !descendants_mask(pruned, from)[y.index];
}

inline bool versions_irrelevant(const ScmModel& m) {
  auto xs = m.summary_of(Role::exposure);
  if (!xs) throw DomainError("model declares no exposure summary");
  return versions_irrelevant(m.dag(), m.exposures(), *xs, m.outcome());
}

namespace detail {

struct ConditionRoles {
  // Names of the treatment in the simplified and true graphs.
  std::vector<std::string> simplified_treatment;
  std::vector<std::string> true_treatment;
  bool conditional = false;
};

inline std::vector<std::string> names_of(const ScmModel& m, const NodeSet& s) {
  std::vector<std::string> out;
  for (NodeId v : s) out.push_back(m.name(v));
  return out;
}

// Back-door reasons carry their own verdict suffix; the report states it once.
inline std::string bare_reason(std::string r) {
  const std::string suffix = "; not established graphically";
  if (r.size() >= suffix.size() && r.compare(r.size() - suffix.size(), suffix.size(), suffix) == 0)
    r.erase(r.size() - suffix.size());
  return r;
}

inline std::string join(const std::vector<std::string>& xs) {
  std::string s = "{";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + xs[i];
  return s + "}";
}

inline ConditionRoles roles_for(ConditionId id, const ScmModel& truth, const ScmModel& simple) {
  ConditionRoles r;
  const NodeId xt0 = truth.current_exposure();
  switch (id) {
    case ConditionId::t1_cond:
    case ConditionId::t1_uncond:
      r.simplified_treatment = {truth.name(xt0)};
      r.true_treatment = {truth.name(xt0)};
      break;
    case ConditionId::t2_cond:
    case ConditionId::t2_uncond:
      r.simplified_treatment = {truth.name(xt0)};
      r.true_treatment = names_of(truth, truth.exposures());
      break;
    case ConditionId::t3_cond:
    case ConditionId::t3_uncond: {
      auto xs = truth.summary_of(Role::exposure);
      if (!xs) throw DomainError("true model declares no exposure summary");
      r.simplified_treatment = {truth.name(*xs)};
      r.true_treatment = names_of(truth, truth.exposures());
      break;
    }
    case ConditionId::irrel: break;
  }
  r.conditional = id == ConditionId::t1_cond || id == ConditionId::t2_cond || id == ConditionId::t3_cond;
  for (const auto& n : r.simplified_treatment)
    if (!simple.find(n)) throw DomainError("node name mismatch: treatment '" + n + "' is absent from the simplified model");
  if (!simple.find(truth.name(truth.outcome())) || simple.name(simple.outcome()) != truth.name(truth.outcome()))
    throw DomainError("node name mismatch: the models disagree on the outcome");
  return r;
}

}  // namespace detail

/// Default candidate adjustment sets: subsets (size <= 3) of the observed
/// nodes of the simplified model that are neither the treatment, the outcome
/// nor descendants of the treatment there; by size, then declaration order.
inline std::vector<std::vector<std::string>> default_candidates(const ScmModel& truth, const ScmModel& simple,
                                                                ConditionId id) {
  auto roles = detail::roles_for(id, truth, simple);
  NodeSet treat = simple.ids(roles.simplified_treatment);
  auto desc = descendants_mask(simple.dag(), treat);
  std::vector<std::string> pool;
  for (NodeId v : simple.dag().all_nodes())
    if (!desc[v.index] && v != simple.outcome()) pool.push_back(simple.name(v));
  std::vector<std::vector<std::string>> out{{}};
  const std::size_t k = pool.size();
  for (std::size_t a = 0; a < k; ++a) out.push_back({pool[a]});
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) out.push_back({pool[a], pool[b]});
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      for (std::size_t c = b + 1; c < k; ++c) out.push_back({pool[a], pool[b], pool[c]});
  return out;
}

/// Graphical, sufficient-only check of a theorem condition. The simplified
/// model's statement is checked on its own graph and the longitudinal one on
/// the true graph, both by the back-door criterion. Summary nodes are treated
/// as ordinary nodes; determinism can only add independences.
inline ConditionReport check_condition(const ScmModel& truth, const ScmModel& simple, ConditionId id,
                                       std::optional<std::vector<std::vector<std::string>>> candidates = std::nullopt) {
  ConditionReport rep;
  rep.id = id;
  if (id == ConditionId::irrel) {
    rep.holds_graphically = versions_irrelevant(truth);
    rep.explanation = rep.holds_graphically
                          ? "every directed path from the exposures to the outcome passes through the exposure summary"
                          : "some directed path from the exposures reaches the outcome avoiding the exposure summary; "
                            "irrelevance of versions not established graphically";
    return rep;
  }
  auto roles = detail::roles_for(id, truth, simple);
  std::vector<std::vector<std::string>> sets;
  if (!roles.conditional) sets = {{}};
  else sets = candidates ? *candidates : default_candidates(truth, simple, id);

  const NodeSet st = simple.ids(roles.simplified_treatment);
  const NodeSet tt = truth.ids(roles.true_treatment);
  std::string last_reason = "no candidate adjustment set was supplied";
  std::size_t skipped = 0;
  for (const auto& w : sets) {
    bool in_both = true;
    for (const auto& n : w)
      if (!simple.find(n) || !truth.find(n)) in_both = false;
    if (!in_both) {
      ++skipped;
      continue;
    }
    auto s_res = backdoor_check(simple.dag(), st, simple.outcome(), simple.ids(w));
    if (!s_res.admissible) {
      last_reason = "simplified model, adjustment " + detail::join(w) + ": " + detail::bare_reason(s_res.reason);
      continue;
    }
    auto t_res = backdoor_check(truth.dag(), tt, truth.outcome(), truth.ids(w));
    if (!t_res.admissible) {
      last_reason = "true model, treatment " + detail::join(roles.true_treatment) + ", adjustment " +
                    detail::join(w) + ": " + detail::bare_reason(t_res.reason);
      continue;
    }
    rep.holds_graphically = true;
    rep.witness = w;
    rep.explanation = "back-door criterion holds in both graphs with adjustment set " + detail::join(w) +
                      " (graphical check is sufficient only; summary nodes treated as ordinary nodes)";
    return rep;
  }
  rep.explanation = "not established graphically: " + last_reason;
  if (skipped) rep.explanation += " (" + std::to_string(skipped) + " candidate set(s) skipped: nodes absent from one model)";
  rep.explanation += "; the check is sufficient only, so the distributional condition may still hold";
  return rep;
}

}  // namespace cel

#endif  // CEL_CONDITIONS_HPP
