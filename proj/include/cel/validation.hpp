#ifndef CEL_VALIDATION_HPP
#define CEL_VALIDATION_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cel/estimands.hpp"

namespace cel {

/// One exact-vs-sampled comparison. The standard error is that of the Monte
/// Carlo estimator, evaluated at the exact distribution.
struct McCheck {
  std::string name;
  double exact = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  bool pass = false;
  std::string note;

  double z() const { return se > 0.0 ? (estimate - exact) / se : 0.0; }
};

struct McReport {
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  double k_se = 3.0;
  std::vector<McCheck> estimands;
  std::size_t states_checked = 0;
  double k_state = 3.0;             // family-wise threshold for the state table
  std::size_t states_outside_k = 0; // states beyond k_se, reported only
  std::vector<McCheck> state_failures;
  double max_state_z = 0.0;

  bool estimands_pass() const {
    for (const auto& c : estimands)
      if (!c.pass) return false;
    return true;
  }
  bool states_pass() const { return state_failures.empty(); }
  bool passed() const { return estimands_pass() && states_pass(); }
};

namespace detail {

// 1e-12 absorbs round-off when the estimator has (near) zero variance.
inline bool within(double est, double exact, double se, double k) {
  if (!std::isfinite(est)) return false;
  return std::fabs(est - exact) <= k * se + 1e-12;
}

/// z such that a two-sided normal tail at z has probability `tail`.
inline double normal_quantile_two_sided(double tail) {
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Variance of sqrt(n) * (standardized contrast estimator - psi) from its
/// influence function, at the exact joint:
/// 1{T=a}(Y-m_a(w))/P(T=a|w) - 1{T=b}(Y-m_b(w))/P(T=b|w) + m_a(w)-m_b(w) - psi,
/// with Y replaced by its conditional mean given the state.
inline double contrast_variance(const JointTable& j, NodeId t, double a, double b, const NodeSet& w) {
  const int y = j.model().outcome().index;
  struct Cell { double mass = 0, pa = 0, pb = 0, ya = 0, yb = 0; };
  std::map<std::vector<double>, Cell> cells;
  j.for_each_state([&](StateBits, double p, const double* v) {
    Cell& c = cells[read(w, v)];
    c.mass += p;
    if (v[t.index] == a) { c.pa += p; c.ya += p * v[y]; }
    else if (v[t.index] == b) { c.pb += p; c.yb += p * v[y]; }
  });
  double psi = 0.0;
  for (const auto& [k, c] : cells) {
    if (!(c.pa > 0.0) || !(c.pb > 0.0)) throw PositivityError("stratum without both treatment levels");
    psi += (c.ya / c.pa - c.yb / c.pb) * c.mass;
  }
  double var = 0.0;
  j.for_each_state([&](StateBits, double p, const double* v) {
    const Cell& c = cells.at(read(w, v));
    const double ma = c.ya / c.pa, mb = c.yb / c.pb;
    double f = ma - mb - psi;
    if (v[t.index] == a) f += (v[y] - ma) / (c.pa / c.mass);
    else if (v[t.index] == b) f -= (v[y] - mb) / (c.pb / c.mass);
    var += p * f * f;
  });
  return var;
}

/// Mean and variance of a state function under a joint table.
inline std::pair<double, double> moments(const JointTable& j, const std::function<double(const double*)>& g) {
  double m1 = 0.0, m2 = 0.0;
  j.for_each_state([&](StateBits, double p, const double* v) {
    double x = g(v);
    m1 += p * x;
    m2 += p * x * x;
  });
  return {m1, std::max(0.0, m2 - m1 * m1)};
}

}  // namespace detail

/// Compares the exact engine with forward sampling. Observational quantities
/// come from one sample of size n (seed); every interventional mean comes
/// from its own run of size n on derived_seed(seed, k). Tolerance: 3 standard
/// errors, 4 when n < 10^4, per estimand; the state table uses the
/// family-wise version of the same rule. A state with exact probability 0
/// fails if it is ever sampled.
inline McReport mc_validate(const ScmModel& m, std::uint64_t n, std::uint64_t seed) {
  if (n < 1000) throw DomainError("Monte Carlo validation needs n >= 1000");
  McReport rep;
  rep.n = n;
  rep.seed = seed;
  rep.k_se = n < 10000 ? 4.0 : 3.0;
  const double k = rep.k_se;
  const double dn = static_cast<double>(n);
  const JointTable exact = exact_joint(m);
  const JointTable mc = monte_carlo_joint(m, n, seed);
  const int y = m.outcome().index;

  // Testing every cell at k SE would raise false alarms in proportion to the
  // table size, so the state table as a whole is held to the error rate a
  // single k-SE test has (Bonferroni). Zero-probability states must stay
  // unsampled.
  std::size_t support = 0;
  for (double p : exact.probabilities()) support += p > 0.0 ? 1 : 0;
  rep.k_state = std::max(k, detail::normal_quantile_two_sided(std::erfc(k / std::sqrt(2.0)) / std::max<std::size_t>(support, 1)));
  for (std::size_t s = 0; s < exact.size(); ++s) {
    const StateBits b = static_cast<StateBits>(s);
    const double p = exact[b], f = mc[b];
    McCheck c{"P(" + state_string(m, b) + ")", p, f, std::sqrt(p * (1.0 - p) / dn), false, {}};
    c.pass = p > 0.0 ? detail::within(f, p, c.se, rep.k_state) : f == 0.0;
    if (!detail::within(f, p, c.se, k)) ++rep.states_outside_k;
    ++rep.states_checked;
    rep.max_state_z = std::max(rep.max_state_z, std::fabs(c.z()));
    if (!c.pass) rep.state_failures.push_back(c);
  }

  auto add = [&](std::string name, const std::function<double(const JointTable&)>& value, double var) {
    McCheck c;
    c.name = std::move(name);
    c.exact = value(exact);
    c.se = std::sqrt(var / dn);
    try {
      c.estimate = value(mc);
      c.pass = detail::within(c.estimate, c.exact, c.se, k);
    } catch (const Error& e) {
      c.estimate = std::nan("");
      c.note = e.what();
    }
    rep.estimands.push_back(c);
  };

  for (NodeId v : m.summaries()) {
    auto g = [v](const double* x) { return x[v.index]; };
    add("E[" + m.name(v) + "]", [&](const JointTable& j) { return detail::moments(j, g).first; },
        detail::moments(exact, g).second);
  }
  auto gy = [y](const double* x) { return x[y]; };
  add("E[Y]", [&](const JointTable& j) { return expected_outcome(j); }, detail::moments(exact, gy).second);

  if (m.exposures().empty()) return rep;
  const NodeId xt0 = m.current_exposure();
  {
    Event given;
    given.add(m, xt0, 1.0);
    const double pa = probability(exact, given);
    if (pa > 0.0) {
      const double ma = expected_outcome(exact, given);
      double var = 0.0;
      exact.for_each_state([&](StateBits, double p, const double* v) {
        if (v[xt0.index] == 1.0) var += p * (v[y] - ma) * (v[y] - ma) / (pa * pa);
      });
      add("E[Y | " + m.name(xt0) + "=1]", [&](const JointTable& j) { return expected_outcome(j, given); }, var);
    }
  }
  add("ATE_CS_uncond", [&](const JointTable& j) { return ate_cs_unconditional(j).value; },
      detail::contrast_variance(exact, xt0, 1.0, 0.0, {}));

  const auto xs = m.summary_of(Role::exposure);
  const auto ws = m.summary_of(Role::confounder);
  if (xs) {
    add("ATE_SV_med", [&](const JointTable& j) { return ate_sv(j, SvFlavor::med).value; },
        detail::contrast_variance(exact, *xs, 1.0, 0.0, {}));
    if (ws)
      add("ATE_SV_conf", [&](const JointTable& j) { return ate_sv(j, SvFlavor::conf).value; },
          detail::contrast_variance(exact, *xs, 1.0, 0.0, {*ws}));
  }

  // Interventional means, one independent run per exposure profile.
  const NodeSet ex = m.exposures();
  const std::size_t len = ex.size();
  if (len > 12) return rep;
  const std::size_t profiles = std::size_t{1} << len;
  std::vector<double> mu(profiles), mu_hat(profiles), sigma2(profiles);
  for (std::size_t kx = 0; kx < profiles; ++kx) {
    Profile pr = detail::profile_of_index(static_cast<int>(kx), len);
    Event ev = profile_event(m, pr);
    auto dj = do_joint(m, ev);
    auto [mean, var] = detail::moments(dj, gy);
    mu[kx] = mean;
    sigma2[kx] = var;
    mu_hat[kx] = expected_outcome(monte_carlo_joint(m, n, derived_seed(seed, kx), ev));
  }
  const std::size_t ones = profiles - 1;
  {
    McCheck c;
    c.name = "ATE_L(" + profile_string(constant_profile(len, 1)) + ";" + profile_string(constant_profile(len, 0)) + ")";
    c.exact = mu[ones] - mu[0];
    c.estimate = mu_hat[ones] - mu_hat[0];
    c.se = std::sqrt((sigma2[ones] + sigma2[0]) / dn);
    c.pass = detail::within(c.estimate, c.exact, c.se, k);
    rep.estimands.push_back(c);
  }
  if (xs) {
    // WAVG_EQ5 = sum_x [P(x | S=1) - P(x | S=0)] E[Y^x]. Its sampling error has
    // an observational part (the profile weights) and one part per profile run.
    auto weights = [&](const JointTable& j, double& p1, double& p0) {
      std::vector<double> q1(profiles, 0.0), q0(profiles, 0.0);
      p1 = p0 = 0.0;
      j.for_each_state([&](StateBits, double p, const double* v) {
        int kx = detail::profile_index(ex, v);
        if (v[xs->index] == 1.0) { q1[kx] += p; p1 += p; }
        else if (v[xs->index] == 0.0) { q0[kx] += p; p0 += p; }
      });
      std::vector<double> w(profiles, 0.0);
      if (!(p1 > 0.0) || !(p0 > 0.0)) throw PositivityError(m.name(*xs) + " takes only one level");
      for (std::size_t i = 0; i < profiles; ++i) w[i] = q1[i] / p1 - q0[i] / p0;
      return w;
    };
    McCheck c;
    c.name = "WAVG_EQ5";
    double p1 = 0, p0 = 0;
    const auto w = weights(exact, p1, p0);
    double m1 = 0.0, m0 = 0.0, var = 0.0;
    exact.for_each_state([&](StateBits, double p, const double* v) {
      int kx = detail::profile_index(ex, v);
      if (v[xs->index] == 1.0) m1 += p * mu[kx] / p1;
      else if (v[xs->index] == 0.0) m0 += p * mu[kx] / p0;
    });
    exact.for_each_state([&](StateBits, double p, const double* v) {
      int kx = detail::profile_index(ex, v);
      double f = 0.0;
      if (v[xs->index] == 1.0) f = (mu[kx] - m1) / p1;
      else if (v[xs->index] == 0.0) f = -(mu[kx] - m0) / p0;
      var += p * f * f;
    });
    for (std::size_t i = 0; i < profiles; ++i) var += w[i] * w[i] * sigma2[i];
    for (std::size_t i = 0; i < profiles; ++i) c.exact += w[i] * mu[i];
    c.se = std::sqrt(var / dn);
    try {
      double q1 = 0, q0 = 0;
      const auto wh = weights(mc, q1, q0);
      for (std::size_t i = 0; i < profiles; ++i) c.estimate += wh[i] * mu_hat[i];
      c.pass = detail::within(c.estimate, c.exact, c.se, k);
    } catch (const Error& e) {
      c.estimate = std::nan("");
      c.note = e.what();
    }
    rep.estimands.push_back(c);
  }
  return rep;
}

}  // namespace cel

#endif  // CEL_VALIDATION_HPP
