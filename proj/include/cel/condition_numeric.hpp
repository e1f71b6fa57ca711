#ifndef CEL_CONDITION_NUMERIC_HPP
#define CEL_CONDITION_NUMERIC_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "cel/conditions.hpp"
#include "cel/estimands.hpp"

namespace cel {

/// Twin-network verification of the true model's side of a condition: the
/// counterfactual outcome mean must not depend on the factual exposures
/// within strata of the adjustment set. Only mean-independence is checked.
struct NumericVerdict {
  bool holds = false;
  double max_gap = 0.0;
  std::string what;
};

inline NumericVerdict verify_condition_numerically(const ScmModel& truth, const ConditionReport& rep,
                                                   const std::vector<std::string>& adjust, double tol = 1e-9) {
  NumericVerdict v;
  const std::size_t len = truth.exposures().size();
  if (rep.id == ConditionId::irrel) {
    auto xs = truth.summary_of(Role::exposure);
    if (!xs) throw DomainError("model declares no exposure summary");
    std::map<double, std::pair<double, double>> range;  // summary level -> (min, max) of E[Y^x]
    for (int k = 0; k < (1 << len); ++k) {
      Profile p = detail::profile_of_index(k, len);
      auto dj = do_joint(truth, profile_event(truth, p));
      // Under a full exposure intervention the summary is fixed.
      double level = 0.0;
      dj.for_each_state([&](StateBits, double, const double* val) { level = val[xs->index]; });
      double mu = expected_outcome(dj);
      auto it = range.find(level);
      if (it == range.end()) range.emplace(level, std::pair(mu, mu));
      else it->second = {std::min(it->second.first, mu), std::max(it->second.second, mu)};
    }
    for (const auto& [l, mm] : range) v.max_gap = std::max(v.max_gap, mm.second - mm.first);
    v.holds = v.max_gap <= tol;
    v.what = "E[Y^x] constant over exposure profiles sharing a summary level";
    return v;
  }
  const NodeSet w = truth.ids(adjust);
  const bool single = rep.id == ConditionId::t1_cond || rep.id == ConditionId::t1_uncond;
  const std::size_t plen = single ? 1 : len;
  for (int k = 0; k < (1 << plen); ++k) {
    auto r = counterfactual_independent(truth, profile_event(truth, detail::profile_of_index(k, plen)), w, tol);
    v.max_gap = std::max(v.max_gap, r.max_gap);
  }
  v.holds = v.max_gap <= tol;
  v.what = std::string(single ? "Y^{x_t0}" : "Y^{x}") + " mean-independent of the factual " +
           (single ? "current exposure" : "exposure profile") + " given " + detail::join(adjust);
  return v;
}

}  // namespace cel

#endif  // CEL_CONDITION_NUMERIC_HPP
