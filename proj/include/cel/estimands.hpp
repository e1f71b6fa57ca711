#ifndef CEL_ESTIMANDS_HPP
#define CEL_ESTIMANDS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cel/engine.hpp"

namespace cel {

/// Exposure profile, oldest time first, over model.exposures().
using Profile = std::vector<int>;

inline std::string profile_string(const Profile& p) {
  std::string s;
  for (int v : p) s += v ? '1' : '0';
  return s;
}

inline Profile parse_profile(std::string_view s) {
  Profile p;
  for (char c : s) {
    if (c != '0' && c != '1') throw DomainError("profile must be a 0/1 string, got '" + std::string(s) + "'");
    p.push_back(c - '0');
  }
  return p;
}

inline Profile constant_profile(std::size_t len, int v) { return Profile(len, v); }

/// (0_i, 1_{len-i}).
inline Profile onset_profile(std::size_t len, std::size_t zeros) {
  Profile p(len, 1);
  for (std::size_t i = 0; i < zeros && i < len; ++i) p[i] = 0;
  return p;
}

/// do(X_s = x_s) over the trailing exposures covered by the profile. A full
/// profile fixes the whole exposure process; a length-1 profile fixes X_{t0}
/// alone and leaves earlier exposures to their mechanisms.
inline Event profile_event(const ScmModel& m, const Profile& p) {
  NodeSet xs = m.exposures();
  if (p.size() > xs.size())
    throw DomainError("profile '" + profile_string(p) + "' is longer than the exposure process (" +
                      std::to_string(xs.size()) + ")");
  Event e;
  const std::size_t off = xs.size() - p.size();
  for (std::size_t i = 0; i < p.size(); ++i) e.add(m, xs[off + i], p[i]);
  return e;
}

enum class EstimandId {
  ate_l, ate_l_stratum, ate_cs_cond, ate_cs_uncond, ate_cs_stable,
  ate_sv_conf, ate_sv_med, wavg_t2, wavg_eq5, wavg_t3
};

inline constexpr EstimandId all_estimands[] = {
    EstimandId::ate_l, EstimandId::ate_l_stratum, EstimandId::ate_cs_cond, EstimandId::ate_cs_uncond,
    EstimandId::ate_cs_stable, EstimandId::ate_sv_conf, EstimandId::ate_sv_med, EstimandId::wavg_t2,
    EstimandId::wavg_eq5, EstimandId::wavg_t3};

inline std::string_view to_string(EstimandId id) {
  switch (id) {
    case EstimandId::ate_l: return "ATE_L";
    case EstimandId::ate_l_stratum: return "ATE_L_stratum";
    case EstimandId::ate_cs_cond: return "ATE_CS_cond";
    case EstimandId::ate_cs_uncond: return "ATE_CS_uncond";
    case EstimandId::ate_cs_stable: return "ATE_CS_stable";
    case EstimandId::ate_sv_conf: return "ATE_SV_conf";
    case EstimandId::ate_sv_med: return "ATE_SV_med";
    case EstimandId::wavg_t2: return "WAVG_T2";
    case EstimandId::wavg_eq5: return "WAVG_EQ5";
    case EstimandId::wavg_t3: return "WAVG_T3";
  }
  return "?";
}

inline std::optional<EstimandId> parse_estimand(std::string_view s) {
  for (EstimandId id : all_estimands)
    if (to_string(id) == s) return id;
  return std::nullopt;
}

struct PairTerm {
  std::string x_profile;
  std::string x_star_profile;
  std::optional<std::string> stratum;
  double pair_ate = 0.0;
  double weight = 0.0;
};

struct EstimandReport {
  EstimandId id = EstimandId::ate_l;
  double value = 0.0;
  std::vector<PairTerm> decomposition;
  std::map<std::string, double> gaps;

  double weight_sum() const {
    double s = 0.0;
    for (const auto& t : decomposition) s += t.weight;
    return s;
  }
  double weighted_sum() const {
    double s = 0.0;
    for (const auto& t : decomposition) s += t.weight * t.pair_ate;
    return s;
  }
  /// Decomposition sorted by decreasing weight (ties keep enumeration order).
  std::vector<PairTerm> by_weight() const {
    auto out = decomposition;
    std::stable_sort(out.begin(), out.end(), [](const PairTerm& a, const PairTerm& b) { return a.weight > b.weight; });
    return out;
  }
};

/// E[Y^{do(intervention)}] by truncated factorization.
inline double interventional_mean(const ScmModel& m, const Event& intervention) {
  detail::check_cap(m, default_state_cap);
  auto forced = detail::forced_values(m, intervention);
  const int y = m.outcome().index;
  double total = 0.0;
  detail::enumerate_states(m, forced, true, [&](StateBits, double p, const double* values) { total += p * values[y]; });
  return total;
}

inline double interventional_mean(const ScmModel& m, const Profile& x) {
  return interventional_mean(m, profile_event(m, x));
}

/// ATE_L(x; x*) = E[Y^x] - E[Y^x*].
inline double ate_longitudinal(const ScmModel& m, const Profile& x, const Profile& xs) {
  if (x.size() != xs.size()) throw DomainError("profiles must have equal length");
  if (x == xs) return 0.0;
  return interventional_mean(m, x) - interventional_mean(m, xs);
}

/// E[Y^{X_t0=1}] - E[Y^{X_t0=0}] with earlier exposures left to their mechanisms.
inline double ate_current_exposure(const ScmModel& m) { return ate_longitudinal(m, {1}, {0}); }

/// E[Y^x - Y^x* | stratum] with the stratum read in the factual world.
inline double ate_stratum(const ScmModel& m, const Profile& x, const Profile& xs, const Event& stratum) {
  if (stratum.empty()) return ate_longitudinal(m, x, xs);
  auto obs = exact_joint(m);
  if (!(probability(obs, stratum) > 0.0)) throw PositivityError(stratum.to_string(m));
  if (x == xs) return 0.0;
  return counterfactual_mean(twin_joint(m, profile_event(m, x)), stratum) -
         counterfactual_mean(twin_joint(m, profile_event(m, xs)), stratum);
}

namespace detail {

inline std::string stratum_label(const ScmModel& m, const NodeSet& w, const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + m.name(w[i]) + "=" + format_exact(v[i]);
  return s;
}

inline std::vector<double> read(const NodeSet& nodes, const double* values) {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) out.push_back(values[v.index]);
  return out;
}

inline int profile_index(const NodeSet& xs, const double* values) {
  int k = 0;
  for (NodeId x : xs) k = 2 * k + (values[x.index] != 0.0 ? 1 : 0);
  return k;
}

inline Profile profile_of_index(int k, std::size_t len) {
  Profile p(len);
  for (std::size_t i = len; i-- > 0;) {
    p[i] = k & 1;
    k >>= 1;
  }
  return p;
}

/// sum_w [E(Y | w, T=a) - E(Y | w, T=b)] P(w) on a joint table.
inline EstimandReport standardized_contrast(EstimandId id, const JointTable& j, NodeId treatment, double a, double b,
                                            const NodeSet& w) {
  const ScmModel& m = j.model();
  const int y = m.outcome().index;
  struct Cell { double mass = 0, ma = 0, mb = 0, ya = 0, yb = 0; };
  std::map<std::vector<double>, Cell> cells;
  j.for_each_state([&](StateBits, double p, const double* values) {
    Cell& c = cells[read(w, values)];
    c.mass += p;
    double t = values[treatment.index];
    if (t == a) { c.ma += p; c.ya += p * values[y]; }
    else if (t == b) { c.mb += p; c.yb += p * values[y]; }
  });
  EstimandReport r;
  r.id = id;
  for (const auto& [key, c] : cells) {
    if (!(c.mass > 0.0)) continue;
    const std::string label = stratum_label(m, w, key);
    auto cond = [&](double level) {
      return (label.empty() ? "" : label + ",") + m.name(treatment) + "=" + format_exact(level);
    };
    if (!(c.ma > 0.0)) throw PositivityError(cond(a));
    if (!(c.mb > 0.0)) throw PositivityError(cond(b));
    double contrast = c.ya / c.ma - c.yb / c.mb;
    r.value += contrast * c.mass;
    r.decomposition.push_back({format_exact(a), format_exact(b),
                               w.empty() ? std::nullopt : std::optional<std::string>(label), contrast, c.mass});
  }
  return r;
}

inline NodeId require_summary(const ScmModel& m, Role r, std::string_view what) {
  auto s = m.summary_of(r);
  if (!s) throw DomainError("model declares no " + std::string(what) + " summary");
  return *s;
}

/// Stratified counterfactual means E[Y^x | W = w] for every stratum w, from
/// one twin table (W empty: a single interventional mean).
inline std::map<std::vector<double>, double> stratified_means(const ScmModel& m, const Profile& x, const NodeSet& w) {
  std::map<std::vector<double>, double> out;
  if (w.empty()) {
    out[{}] = interventional_mean(m, x);
    return out;
  }
  auto twin = twin_joint(m, profile_event(m, x));
  const int y = m.outcome().index;
  std::vector<double> fv(m.size()), cv(m.size());
  std::map<std::vector<double>, std::pair<double, double>> acc;
  for (const auto& e : twin.entries()) {
    evaluate_state(m, e.factual, fv.data());
    evaluate_state(m, e.counterfactual, cv.data());
    auto& a = acc[read(w, fv.data())];
    a.first += e.probability;
    a.second += e.probability * cv[y];
  }
  for (const auto& [k, a] : acc)
    if (a.first > 0.0) out[k] = a.second / a.first;
  return out;
}

/// Shared engine of the weighted averages: within each stratum w of W,
/// sum over (profile in A, profile in B) of stratum ATE x P(profile | A, w)
/// x P(profile* | B, w) x P(w). `group` maps a state to a mask: bit 0 for A,
/// bit 1 for B (both when the two levels coincide).
template <class Group>
EstimandReport weighted_average(EstimandId id, const ScmModel& m, const NodeSet& w, Group&& group,
                                const std::string& group_a, const std::string& group_b) {
  auto obs = exact_joint(m);
  const NodeSet xs = m.exposures();
  const std::size_t len = xs.size();
  struct Cell {
    double mass = 0.0;
    double ga = 0.0, gb = 0.0;
    std::map<int, double> pa, pb;
  };
  std::map<std::vector<double>, Cell> cells;
  obs.for_each_state([&](StateBits, double p, const double* values) {
    Cell& c = cells[read(w, values)];
    c.mass += p;
    const int g = group(values);
    const int k = profile_index(xs, values);
    if (g & 1) { c.ga += p; c.pa[k] += p; }
    if (g & 2) { c.gb += p; c.pb[k] += p; }
  });
  std::map<int, std::map<std::vector<double>, double>> means;
  auto mean_of = [&](int k, const std::vector<double>& key) {
    auto it = means.find(k);
    if (it == means.end()) it = means.emplace(k, stratified_means(m, profile_of_index(k, len), w)).first;
    return it->second.at(key);
  };
  EstimandReport r;
  r.id = id;
  for (const auto& [key, c] : cells) {
    if (!(c.mass > 0.0)) continue;
    const std::string label = stratum_label(m, w, key);
    auto cond = [&](const std::string& g) { return label.empty() ? g : label + "," + g; };
    if (!(c.ga > 0.0)) throw PositivityError(cond(group_a));
    if (!(c.gb > 0.0)) throw PositivityError(cond(group_b));
    for (const auto& [ka, ma] : c.pa) {
      if (!(ma > 0.0)) continue;
      for (const auto& [kb, mb] : c.pb) {
        if (!(mb > 0.0)) continue;
        double weight = (ma / c.ga) * (mb / c.gb) * c.mass;
        double ate = ka == kb ? 0.0 : mean_of(ka, key) - mean_of(kb, key);
        r.decomposition.push_back({profile_string(profile_of_index(ka, len)), profile_string(profile_of_index(kb, len)),
                                   w.empty() ? std::nullopt : std::optional<std::string>(label), ate, weight});
        r.value += weight * ate;
      }
    }
  }
  return r;
}

}  // namespace detail

/// Quantity estimated in practice under a cross-sectional model adjusting for
/// W: sum_w [E(Y|w,X_t0=1) - E(Y|w,X_t0=0)] P(w), on the true observational joint.
inline EstimandReport ate_cs_conditional(const JointTable& obs, const NodeSet& w) {
  return detail::standardized_contrast(w.empty() ? EstimandId::ate_cs_uncond : EstimandId::ate_cs_cond, obs,
                                       obs.model().current_exposure(), 1.0, 0.0, w);
}

inline EstimandReport ate_cs_conditional(const ScmModel& m, const NodeSet& w) {
  return ate_cs_conditional(exact_joint(m), w);
}

inline EstimandReport ate_cs_unconditional(const JointTable& obs) { return ate_cs_conditional(obs, {}); }
inline EstimandReport ate_cs_unconditional(const ScmModel& m) { return ate_cs_conditional(m, {}); }

/// Weighted average of stratum effects ((x,1); (x*,0)) over past exposure
/// profiles, weights P(x|X_t0=1,w) P(x*|X_t0=0,w) P(w).
inline EstimandReport wavg_theorem2(const ScmModel& m, const NodeSet& w) {
  const NodeId xt0 = m.current_exposure();
  const std::string name = m.name(xt0);
  return detail::weighted_average(
      EstimandId::wavg_t2, m, w,
      [&](const double* v) { return v[xt0.index] == 1.0 ? 1 : 2; }, name + "=1", name + "=0");
}

/// Reduction under stability: sum_i ATE_L((0_i,1_{t0-i}); 0_t0) P(past = (0_i,1_{t0-i-1}) | X_t0 = 1).
inline EstimandReport ate_cs_stable(const ScmModel& m) {
  const NodeSet xs = m.exposures();
  if (xs.empty()) throw DomainError("model declares no exposure process");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!std::holds_alternative<PersistOr>(m.mechanism(xs[i])))
      throw DomainError("exposure mechanism of '" + m.name(xs[i]) +
                        "' is not persist_or; ATE_CS_stable requires a stable exposure process");
  }
  const std::size_t len = xs.size();
  auto obs = exact_joint(m);
  Event exposed, unexposed;
  exposed.add(m, xs.back(), 1.0);
  unexposed.add(m, xs.back(), 0.0);
  // Both arms of the cross-sectional contrast must be populated.
  (void)conditional(obs, Event{}, unexposed);
  EstimandReport r;
  r.id = EstimandId::ate_cs_stable;
  const Profile never = constant_profile(len, 0);
  for (std::size_t i = 0; i < len; ++i) {
    Profile x = onset_profile(len, i);
    Event past;
    for (std::size_t t = 0; t + 1 < len; ++t) past.add(m, xs[t], x[t]);
    double weight = conditional(obs, past, exposed);
    if (!(weight > 0.0)) continue;
    double ate = ate_longitudinal(m, x, never);
    r.decomposition.push_back({profile_string(x), profile_string(never), std::nullopt, ate, weight});
    r.value += weight * ate;
  }
  return r;
}

enum class SvFlavor { conf, med };

/// ATE_SV.Conf = sum_w [E(Y|W=w,X=x) - E(Y|W=w,X=x*)] P(W=w) over the
/// confounder summary; ATE_SV.Med = E(Y|X=x) - E(Y|X=x*).
inline EstimandReport ate_sv(const JointTable& obs, SvFlavor flavor, double x = 1.0, double xs = 0.0) {
  const ScmModel& m = obs.model();
  NodeId summary = detail::require_summary(m, Role::exposure, "exposure");
  NodeSet w;
  if (flavor == SvFlavor::conf) w.push_back(detail::require_summary(m, Role::confounder, "confounder"));
  return detail::standardized_contrast(flavor == SvFlavor::conf ? EstimandId::ate_sv_conf : EstimandId::ate_sv_med,
                                       obs, summary, x, xs, w);
}

inline EstimandReport ate_sv(const ScmModel& m, SvFlavor flavor, double x = 1.0, double xs = 0.0) {
  return ate_sv(exact_joint(m), flavor, x, xs);
}

/// sum over profiles of ATE_L(x; x*) P(X = x | S = s) P(X = x* | S = s*),
/// S the exposure summary.
inline EstimandReport wavg_eq5(const ScmModel& m, double s = 1.0, double ss = 0.0) {
  NodeId summary = detail::require_summary(m, Role::exposure, "exposure");
  const std::string name = m.name(summary);
  return detail::weighted_average(
      EstimandId::wavg_eq5, m, {},
      [&](const double* v) { return (v[summary.index] == s ? 1 : 0) | (v[summary.index] == ss ? 2 : 0); },
      name + "=" + format_exact(s), name + "=" + format_exact(ss));
}

/// Stratum-weighted average over W (typically the confounder summary):
/// sum_w sum ATE_{L|W=w}(x; x*) P(x | S=s, w) P(x* | S=s*, w) P(w).
inline EstimandReport wavg_theorem3(const ScmModel& m, const NodeSet& w, double s = 1.0, double ss = 0.0) {
  NodeId summary = detail::require_summary(m, Role::exposure, "exposure");
  const std::string name = m.name(summary);
  return detail::weighted_average(
      EstimandId::wavg_t3, m, w,
      [&](const double* v) { return (v[summary.index] == s ? 1 : 0) | (v[summary.index] == ss ? 2 : 0); },
      name + "=" + format_exact(s), name + "=" + format_exact(ss));
}

/// Everything needed to compute one estimand by id.
struct EstimandRequest {
  EstimandId id = EstimandId::ate_l;
  std::optional<Profile> x;        // default 1_t0
  std::optional<Profile> x_star;   // default 0_t0
  std::optional<std::vector<std::string>> adjust;
  std::string stratum;             // Event text
  double level = 1.0;              // summary levels for SV / EQ5 / T3
  double level_star = 0.0;
};

namespace detail {

/// Default adjustment: confounders measured at t0 (cross-sectional) or the
/// confounder summary (summary-variable analyses), when present.
inline NodeSet default_adjustment(const ScmModel& m, EstimandId id) {
  NodeSet w;
  if (id == EstimandId::wavg_t3) {
    if (auto s = m.summary_of(Role::confounder)) w.push_back(*s);
    return w;
  }
  const NodeId xt0 = m.current_exposure();
  for (NodeId v : m.process(Role::confounder))
    if (m.time(v) && m.time(v) == m.time(xt0)) w.push_back(v);
  return w;
}

}  // namespace detail

inline EstimandReport compute(const ScmModel& m, const EstimandRequest& req) {
  const std::size_t len = m.exposures().size();
  const Profile x = req.x.value_or(constant_profile(len, 1));
  const Profile xs = req.x_star.value_or(constant_profile(len, 0));
  const NodeSet w = req.adjust ? m.ids(*req.adjust) : detail::default_adjustment(m, req.id);
  EstimandReport r;
  r.id = req.id;
  switch (req.id) {
    case EstimandId::ate_l:
      r.value = ate_longitudinal(m, x, xs);
      r.decomposition.push_back({profile_string(x), profile_string(xs), std::nullopt, r.value, 1.0});
      return r;
    case EstimandId::ate_l_stratum: {
      Event st = Event::parse(m, req.stratum);
      r.value = ate_stratum(m, x, xs, st);
      r.decomposition.push_back({profile_string(x), profile_string(xs),
                                 st.empty() ? std::nullopt : std::optional<std::string>(st.to_string(m)), r.value, 1.0});
      return r;
    }
    case EstimandId::ate_cs_cond: {
      auto rep = ate_cs_conditional(m, w);
      rep.id = EstimandId::ate_cs_cond;
      return rep;
    }
    case EstimandId::ate_cs_uncond: return ate_cs_unconditional(m);
    case EstimandId::ate_cs_stable: return ate_cs_stable(m);
    case EstimandId::ate_sv_conf: return ate_sv(m, SvFlavor::conf, req.level, req.level_star);
    case EstimandId::ate_sv_med: return ate_sv(m, SvFlavor::med, req.level, req.level_star);
    case EstimandId::wavg_t2: return wavg_theorem2(m, w);
    case EstimandId::wavg_eq5: return wavg_eq5(m, req.level, req.level_star);
    case EstimandId::wavg_t3: return wavg_theorem3(m, w, req.level, req.level_star);
  }
  throw DomainError("unknown estimand");
}

/// Practice value minus reference value.
inline double gap_report(const ScmModel& m, const EstimandRequest& practice, const EstimandRequest& reference) {
  return compute(m, practice).value - compute(m, reference).value;
}

inline double gap_report(const ScmModel& m, EstimandId practice, EstimandId reference) {
  EstimandRequest p, r;
  p.id = practice;
  r.id = reference;
  return gap_report(m, p, r);
}

}  // namespace cel

#endif  // CEL_ESTIMANDS_HPP
