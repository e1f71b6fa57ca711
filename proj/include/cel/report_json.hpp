#ifndef CEL_REPORT_JSON_HPP
#define CEL_REPORT_JSON_HPP

// JSON views of the report types. Needs nlohmann/json (vendor/json.hpp).

#include <cmath>
#include <string>

#include "cel/conditions.hpp"
#include "cel/estimands.hpp"
#include "cel/validation.hpp"
#include "json.hpp"

namespace cel {

namespace detail {
// JSON has no NaN; failed values become null.
inline nlohmann::json real(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json to_json(const EstimandReport& r) {
  nlohmann::json j;
  j["estimand"] = std::string(to_string(r.id));
  j["value"] = detail::real(r.value);
  auto& d = j["decomposition"] = nlohmann::json::array();
  for (const auto& t : r.decomposition) {
    d.push_back({{"x_profile", t.x_profile},
                 {"x_star_profile", t.x_star_profile},
                 {"stratum", t.stratum ? nlohmann::json(*t.stratum) : nlohmann::json(nullptr)},
                 {"pair_ate", detail::real(t.pair_ate)},
                 {"weight", detail::real(t.weight)}});
  }
  auto& g = j["gaps"] = nlohmann::json::object();
  for (const auto& [k, v] : r.gaps) g[k] = detail::real(v);
  return j;
}

inline nlohmann::json to_json(const ConditionReport& r) {
  return {{"condition", std::string(to_string(r.id))},
          {"holds_graphically", r.holds_graphically},
          {"witness_adjustment_set", r.witness},
          {"explanation", r.explanation}};
}

inline nlohmann::json to_json(const McCheck& c) {
  nlohmann::json j{{"name", c.name},
                   {"exact", detail::real(c.exact)},
                   {"estimate", detail::real(c.estimate)},
                   {"se", detail::real(c.se)},
                   {"pass", c.pass}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline nlohmann::json to_json(const McReport& r) {
  nlohmann::json j{{"n", r.n}, {"seed", r.seed}, {"k_se", r.k_se}, {"pass", r.passed()}};
  auto& e = j["estimands"] = nlohmann::json::array();
  for (const auto& c : r.estimands) e.push_back(to_json(c));
  j["states_checked"] = r.states_checked;
  j["k_state"] = r.k_state;
  j["states_outside_k_se"] = r.states_outside_k;
  j["max_state_z"] = r.max_state_z;
  auto& f = j["state_failures"] = nlohmann::json::array();
  for (const auto& c : r.state_failures) f.push_back(to_json(c));
  return j;
}

}  // namespace cel

#endif  // CEL_REPORT_JSON_HPP
