#ifndef CEL_TEST_SUITES_HPP
#define CEL_TEST_SUITES_HPP

// Randomized checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cel/cel.hpp"

namespace cel::suites {

inline double unif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline std::string coef_text(double c) { return format_17(c); }

inline std::string logistic_text(double c0, const std::vector<std::pair<std::string, double>>& terms) {
  std::string s = "logistic(" + coef_text(c0);
  for (const auto& [p, b] : terms) s += ", " + coef_text(b) + "*" + p;
  return s + ")";
}

// " + c*ref" or " - |c|*ref", as the outcome grammar wants.
inline std::string plus_term(double c, const std::string& ref) {
  return (std::signbit(c) ? " - " : " + ") + coef_text(std::fabs(c)) + "*" + ref;
}

inline std::string name(const char* base, int t) { return std::string(base) + "[" + std::to_string(t) + "]"; }

// L.ex1 family: exposures only, each earlier exposure feeding later ones and Y;
// each edge dropped with probability `drop`.
inline ScmModel random_l_ex1(int t0, double drop, std::mt19937_64& g) {
  std::ostringstream s;
  s << "t0 = " << t0 << "\n";
  std::bernoulli_distribution keep(1.0 - drop);
  for (int t = 1; t <= t0; ++t) {
    std::vector<std::pair<std::string, double>> terms;
    for (int u = 1; u < t; ++u)
      if (keep(g)) terms.emplace_back(name("X", u), unif(g, -2, 2));
    s << "exposure " << name("X", t) << " = " << logistic_text(unif(g, -2, 2), terms) << "\n";
  }
  s << "outcome Y = " << coef_text(unif(g, -2, 2));
  for (int t = 1; t <= t0; ++t)
    if (t == t0 || keep(g)) s << plus_term(unif(g, -2, 2), name("X", t));
  s << "\n";
  return parse_model_or_throw(s.str());
}

inline ScmModel cs_for(int t0) {
  return parse_model_or_throw("t0 = " + std::to_string(t0) + "\nexposure " + name("X", t0) +
                              " = logistic(0)\noutcome Y = 0 + " + name("X", t0) + "\n");
}

inline std::string threshold(const char* base, int t0, int tau) {
  std::string s = "threshold_sum(";
  for (int t = 1; t <= t0; ++t) s += name(base, t) + ", ";
  return s + std::to_string(tau) + ")";
}

// LS.ex1 family: time-varying confounders, Y reads only the two summaries.
inline ScmModel random_ls_ex1(int t0, std::mt19937_64& g) {
  std::ostringstream s;
  s << "t0 = " << t0 << "\n";
  for (int t = 1; t <= t0; ++t) {
    std::vector<std::pair<std::string, double>> w, x;
    for (int u = 1; u < t; ++u) w.emplace_back(name("W", u), unif(g, -2, 2));
    for (int u = 1; u <= t; ++u) x.emplace_back(name("W", u), unif(g, -2, 2));
    for (int u = 1; u < t; ++u) x.emplace_back(name("X", u), unif(g, -2, 2));
    s << "confounder " << name("W", t) << " = " << logistic_text(unif(g, -2, 2), w) << "\n";
    s << "exposure " << name("X", t) << " = " << logistic_text(unif(g, -2, 2), x) << "\n";
  }
  const int tau = 1 + static_cast<int>(g() % static_cast<std::uint64_t>(t0));
  s << "summary Xs = " << threshold("X", t0, tau) << "\n";
  s << "summary Ws = " << threshold("W", t0, tau) << "\n";
  s << "outcome Y = " << coef_text(unif(g, -2, 2)) << plus_term(unif(g, -2, 2), "Xs") << plus_term(unif(g, -2, 2), "Ws")
    << "\n";
  return parse_model_or_throw(s.str());
}

inline ScmModel sv1_for(int t0) {
  return parse_model_or_throw("t0 = " + std::to_string(t0) +
                              "\nconfounder Ws = logistic(0)\nexposure Xs = logistic(0, Ws)\noutcome Y = 0 + Xs + Ws\n");
}

// LS.ex2 family: exposures and mediators, no confounding.
inline ScmModel random_ls_ex2(int t0, std::mt19937_64& g) {
  std::ostringstream s;
  s << "t0 = " << t0 << "\n";
  for (int t = 1; t <= t0; ++t) {
    std::vector<std::pair<std::string, double>> x, m;
    for (int u = 1; u < t; ++u) x.emplace_back(name("X", u), unif(g, -2, 2));
    for (int u = 1; u <= t; ++u) m.emplace_back(name("X", u), unif(g, -2, 2));
    for (int u = 1; u < t; ++u) m.emplace_back(name("M", u), unif(g, -2, 2));
    s << "exposure " << name("X", t) << " = " << logistic_text(unif(g, -2, 2), x) << "\n";
    s << "mediator " << name("M", t) << " = " << logistic_text(unif(g, -2, 2), m) << "\n";
  }
  const int tau = 1 + static_cast<int>(g() % static_cast<std::uint64_t>(t0));
  s << "summary Xs = " << threshold("X", t0, tau) << "\n";
  s << "summary Ms = " << threshold("M", t0, tau) << "\n";
  s << "outcome Y = " << coef_text(unif(g, -2, 2)) << plus_term(unif(g, -2, 2), "Xs") << plus_term(unif(g, -2, 2), "Ms")
    << "\n";
  return parse_model_or_throw(s.str());
}

inline ScmModel sv2_for(int t0) {
  return parse_model_or_throw("t0 = " + std::to_string(t0) +
                              "\nexposure Xs = logistic(0)\nmediator Ms = logistic(0, Xs)\noutcome Y = 0 + Xs + Ms\n");
}

struct IdentityCount {
  std::string name;
  int instances = 0;
  int applicable = 0;   // condition held graphically
  int violations = 0;
  double max_error = 0.0;
  std::string first_violation;

  void record(bool holds, double lhs, double rhs, const std::string& what, double tol = 1e-9) {
    ++instances;
    if (!holds) return;
    ++applicable;
    const double e = std::fabs(lhs - rhs);
    max_error = std::max(max_error, e);
    if (!(e <= tol)) {
      if (violations == 0) first_violation = what + ": " + format_17(lhs) + " vs " + format_17(rhs);
      ++violations;
    }
  }
};

struct IdentityResult {
  std::vector<IdentityCount> identities;
  bool passed() const {
    for (const auto& c : identities)
      if (c.violations != 0 || c.applicable == 0) return false;
    return true;
  }
};

inline IdentityResult theorem_identities(std::uint64_t seed = 20240611, int per_family = 200) {
  std::mt19937_64 g(seed);
  IdentityCount t1, t2, t3c, t4, t3u;
  t1.name = "T1 identity (L.ex1, T1.Uncond)";
  t2.name = "T2 identity (L.ex1, T2.Uncond)";
  t3c.name = "T3 identity (LS.ex1, T3.Cond)";
  t4.name = "T4 identity (LS.ex1, Irrel + T3.Cond)";
  t3u.name = "T3 identity (LS.ex2, T3.Uncond)";
  for (int i = 0; i < per_family; ++i) {
    const int t0 = 2 + i % 2;
    const std::string tag = "instance " + std::to_string(i) + " t0=" + std::to_string(t0);
    {
      auto m = random_l_ex1(t0, 0.3, g);
      auto cs = cs_for(t0);
      const double ate = ate_cs_unconditional(m).value;
      auto r1 = check_condition(m, cs, ConditionId::t1_uncond);
      t1.record(r1.holds_graphically, ate, ate_current_exposure(m), tag);
      auto r2 = check_condition(m, cs, ConditionId::t2_uncond);
      t2.record(r2.holds_graphically, ate, wavg_theorem2(m, {}).value, tag);
    }
    {
      auto m = random_ls_ex1(t0, g);
      auto sv = sv1_for(t0);
      auto r = check_condition(m, sv, ConditionId::t3_cond, std::vector<std::vector<std::string>>{{"Ws"}});
      const double conf = ate_sv(m, SvFlavor::conf).value;
      t3c.record(r.holds_graphically, conf, wavg_theorem3(m, {m.id("Ws")}).value, tag);
      const bool both = r.holds_graphically && versions_irrelevant(m);
      double worst = 0.0;
      const std::size_t len = m.exposures().size();
      const NodeId xs = m.id("Xs");
      const auto& th = std::get<ThresholdSum>(m.mechanism(xs));
      for (int a = 0; a < (1 << len); ++a)
        for (int b = 0; b < (1 << len); ++b) {
          Profile pa = detail::profile_of_index(a, len), pb = detail::profile_of_index(b, len);
          const int sa = std::count(pa.begin(), pa.end(), 1), sb = std::count(pb.begin(), pb.end(), 1);
          if (!(sa >= th.tau) || sb >= th.tau) continue;
          const double d = std::fabs(ate_longitudinal(m, pa, pb) - conf);
          worst = std::max(worst, d);
        }
      t4.record(both, worst, 0.0, tag);
    }
    {
      auto m = random_ls_ex2(t0, g);
      auto r = check_condition(m, sv2_for(t0), ConditionId::t3_uncond);
      t3u.record(r.holds_graphically, ate_sv(m, SvFlavor::med).value, wavg_theorem3(m, {}).value, tag);
    }
  }
  return {{t1, t2, t3c, t4, t3u}};
}

struct NegativeResult {
  int instances = 0;
  int nonzero = 0;
  double min_gap = INFINITY;
  int failed = 0;
  bool passed() const { return instances == 50 && nonzero >= 45; }
};

// Feedback scenario with confounder-exposure coupling: the summary-variable
// contrast and WAVG_EQ5 are not expected to agree.
inline NegativeResult negative_suite(std::uint64_t seed = 7, int n = 50) {
  std::mt19937_64 g(seed);
  NegativeResult r;
  for (int i = 0; i < n; ++i) {
    ScenarioParams p;
    p.alpha = unif(g, 0.25, 3.0) * (g() % 2 ? 1.0 : -1.0);
    p.rho = unif(g, 0.25, 10.0);
    p.mu_w = unif(g, 0.5, 2.0);
    ++r.instances;
    try {
      auto m = build_scenario(p, calibrate_intercepts(p));
      const double gap = std::fabs(gap_report(m, EstimandId::ate_sv_conf, EstimandId::wavg_eq5));
      r.min_gap = std::min(r.min_gap, gap);
      if (gap > 1e-6) ++r.nonzero;
    } catch (const Error&) {
      ++r.failed;
    }
  }
  return r;
}

// Every DAG on 5 labelled nodes whose edges respect the labelling.
inline std::vector<std::vector<std::pair<int, int>>> five_node_dags() {
  std::vector<std::pair<int, int>> all;
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b) all.emplace_back(a, b);
  std::vector<std::vector<std::pair<int, int>>> out;
  for (int mask = 0; mask < (1 << all.size()); ++mask) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (mask >> i & 1) e.push_back(all[i]);
    out.push_back(std::move(e));
  }
  return out;
}

inline ScmModel random_dag_model(int n, const std::vector<std::pair<int, int>>& edges, std::mt19937_64& g) {
  ModelSpec spec;
  spec.t0 = 1;
  for (int j = 0; j < n; ++j) {
    NodeSpec ns;
    ns.base = "V" + std::to_string(j);
    BasicLogistic<std::string> l{unif(g, -2, 2), {}};
    for (auto [a, b] : edges)
      if (b == j) l.terms.push_back({"V" + std::to_string(a), unif(g, -2, 2)});
    ns.mechanism = l;
    spec.nodes.push_back(ns);
  }
  BasicLinearOutcome<std::string> y{0.0, {}, 0.0};
  for (int j = 0; j < n; ++j) y.terms.push_back({"V" + std::to_string(j), 1.0});
  spec.nodes.push_back(NodeSpec{"Y", std::nullopt, Role::none, y, {}, {}});
  return build_model_or_throw(spec);
}

struct DsepResult {
  long triples = 0;       // d-separated (pair, conditioning set) combinations
  long checks = 0;        // times parameterizations
  double max_gap = 0.0;
  bool passed() const { return triples > 0 && max_gap <= 1e-9; }
};

// Largest |P(a,b|c) - P(a|c)P(b|c)| over all values, from a 32-entry joint
// indexed by node bits.
inline double dependence_gap(const std::vector<double>& p, int a, int b, int cmask) {
  double worst = 0.0;
  for (int cv = 0; cv < 32; ++cv) {
    if ((cv & ~cmask) != 0) continue;
    double pc = 0, pa = 0, pb = 0, pab = 0;
    for (int s = 0; s < 32; ++s) {
      if ((s & cmask) != cv) continue;
      pc += p[s];
      if (s >> a & 1) pa += p[s];
      if (s >> b & 1) pb += p[s];
      if ((s >> a & 1) && (s >> b & 1)) pab += p[s];
    }
    if (pc <= 0.0) continue;
    worst = std::max(worst, std::fabs(pab / pc - (pa / pc) * (pb / pc)));
  }
  return worst;
}

inline DsepResult dsep_soundness(std::uint64_t seed = 11, int per_dag = 20) {
  std::mt19937_64 g(seed);
  DsepResult r;
  for (const auto& edges : five_node_dags()) {
    Dag d;
    for (int i = 0; i < 5; ++i) d.add_node({"V" + std::to_string(i), NodeKind::binary, Role::none, std::nullopt});
    for (auto [a, b] : edges) d.add_edge(NodeId{a}, NodeId{b});
    std::vector<std::tuple<int, int, int>> sep;
    for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b)
        for (int c = 0; c < 32; ++c) {
          if (c >> a & 1 || c >> b & 1) continue;
          NodeSet cs;
          for (int v = 0; v < 5; ++v)
            if (c >> v & 1) cs.push_back(NodeId{v});
          if (d_separated(d, {NodeId{a}}, {NodeId{b}}, cs)) sep.emplace_back(a, b, c);
        }
    r.triples += static_cast<long>(sep.size());
    for (int k = 0; k < per_dag; ++k) {
      auto m = random_dag_model(5, edges, g);
      auto j = exact_joint(m);
      std::vector<double> p(32, 0.0);
      j.for_each_state([&](StateBits, double pr, const double* v) {
        int s = 0;
        for (int i = 0; i < 5; ++i) s |= (v[i] == 1.0 ? 1 : 0) << i;
        p[s] += pr;
      });
      for (auto [a, b, c] : sep) {
        r.max_gap = std::max(r.max_gap, dependence_gap(p, a, b, c));
        ++r.checks;
      }
    }
  }
  return r;
}

struct BackdoorResult2 {
  long admissible = 0;
  double max_gap = 0.0;
  bool passed() const { return admissible > 0 && max_gap <= 1e-9; }
};

// Back-door admissible W: sum_w P(w)[P(y|x=1,w) - P(y|x=0,w)] equals the
// interventional contrast on y.
inline BackdoorResult2 backdoor_soundness(std::uint64_t seed = 13, int per_dag = 2) {
  std::mt19937_64 g(seed);
  BackdoorResult2 r;
  for (const auto& edges : five_node_dags()) {
    for (int k = 0; k < per_dag; ++k) {
      auto m = random_dag_model(5, edges, g);
      auto obs = exact_joint(m);
      std::vector<double> p(32, 0.0);
      obs.for_each_state([&](StateBits, double pr, const double* v) {
        int s = 0;
        for (int i = 0; i < 5; ++i) s |= (v[i] == 1.0 ? 1 : 0) << i;
        p[s] += pr;
      });
      for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y) {
          if (x == y) continue;
          double truth[2];
          for (int a = 0; a < 2; ++a) {
            Event ev;
            ev.add(m, NodeId{x}, a);
            Event yv;
            yv.add(m, NodeId{y}, 1.0);
            truth[a] = probability(do_joint(m, ev), yv);
          }
          for (int w = 0; w < 32; ++w) {
            if (w >> x & 1 || w >> y & 1) continue;
            NodeSet ws;
            for (int v = 0; v < 5; ++v)
              if (w >> v & 1) ws.push_back(NodeId{v});
            if (!backdoor_admissible(m.dag(), {NodeId{x}}, NodeId{y}, ws)) continue;
            double adj = 0.0;
            for (int wv = 0; wv < 32; ++wv) {
              if ((wv & ~w) != 0) continue;
              double pw = 0, n1 = 0, d1 = 0, n0 = 0, d0 = 0;
              for (int s = 0; s < 32; ++s) {
                if ((s & w) != wv) continue;
                pw += p[s];
                const bool xs = s >> x & 1, ys = s >> y & 1;
                (xs ? d1 : d0) += p[s];
                if (ys) (xs ? n1 : n0) += p[s];
              }
              if (pw > 0.0) adj += pw * (n1 / d1 - n0 / d0);
            }
            ++r.admissible;
            r.max_gap = std::max(r.max_gap, std::fabs(adj - (truth[1] - truth[0])));
          }
        }
    }
  }
  return r;
}

struct FuzzResult {
  long inputs = 0;
  long accepted = 0;
  long escaped = 0;   // exceptions thrown out of parse_model
  bool passed() const { return escaped == 0; }
};

// Random byte strings, DSL fragments, and shuffled whole declarations, so
// inputs reach every stage of parsing and validation.
inline FuzzResult fuzz_parser(std::uint64_t seed = 99, long n = 100000) {
  static const char* frags[] = {"t0 = 2\n", "exposure ", "confounder ", "summary ", "outcome ", "X[1]", "W[2]",
                                " = ", "logistic(", "persist_or(", "threshold_sum(", "const(", "noise(", ")",
                                ", ", "*", "+", "-", "0.5", "1e308", "\n", "#", "Y", "mediator ", "variable ",
                                "t0 = 1\n", "exposure X[1] = logistic(0.5)\n", "outcome Y = 1 + X[1]\n",
                                "confounder W[1] = const(0.2)\n", "outcome Y = 2 - 0.5*X[1] + W[1]\n"};
  std::mt19937_64 g(seed);
  FuzzResult r;
  for (long i = 0; i < n; ++i) {
    std::string s;
    const int len = static_cast<int>(g() % 200);
    static const char* lines[] = {"t0 = 1\n", "t0 = 1\n", "exposure X[1] = logistic(0.5, W[1])\n",
                                  "confounder W[1] = const(0.2)\n", "outcome Y = 2 - 0.5*X[1] + W[1]\n",
                                  "summary Xs = threshold_sum(X[1], 1)\n", "outcome Y = 1 + Xs\n", "# c\n"};
    if (i % 4 == 3) {
      // Whole declarations in random order and multiplicity.
      for (int k = 0; k < 2 + len % 5; ++k) s += lines[g() % (sizeof(lines) / sizeof(lines[0]))];
    } else if (i % 2 == 0) {
      for (int k = 0; k < len; ++k) s.push_back(static_cast<char>(g() & 0xff));
    } else {
      for (int k = 0; k < len / 16; ++k) {
        if (g() % 16 == 0) s.push_back(static_cast<char>(g() & 0xff));
        else s += frags[g() % (sizeof(frags) / sizeof(frags[0]))];
      }
    }
    ++r.inputs;
    try {
      auto res = parse_model(s);
      if (res.model) ++r.accepted;
    } catch (...) {
      ++r.escaped;
    }
  }
  return r;
}

struct EngineResult {
  int models = 0;
  long profiles = 0;
  long unreachable = 0;   // profiles of probability 0, where the g-formula is undefined
  double max_gformula_gap = 0.0;
  double max_twin_gap = 0.0;
  std::string worst;
  bool passed() const { return models > 0 && max_gformula_gap <= 1e-10 && max_twin_gap <= 1e-12; }
};

// g-formula against truncated factorization, and twin marginals against the
// observational and interventional joints, for every exposure profile.
inline EngineResult engine_consistency(const std::vector<std::pair<std::string, ScmModel>>& models) {
  EngineResult r;
  for (const auto& [label, m] : models) {
    ++r.models;
    auto obs = exact_joint(m);
    const auto xs = m.exposures();
    for (int k = 0; k < (1 << xs.size()); ++k) {
      Event e = profile_event(m, detail::profile_of_index(k, xs.size()));
      auto inter = do_joint(m, e);
      ++r.profiles;
      if (probability(obs, e) == 0.0) {
        ++r.unreachable;
        continue;
      }
      const double g = std::fabs(expected_outcome(inter) - gformula_expectation(obs, e));
      if (g > r.max_gformula_gap) {
        r.max_gformula_gap = g;
        r.worst = label;
      }
      if (m.binary_count() > default_twin_cap) continue;
      auto t = twin_joint(m, e);
      auto f = t.factual_marginal(), c = t.counterfactual_marginal();
      for (std::size_t s = 0; s < f.size(); ++s) {
        r.max_twin_gap = std::max(r.max_twin_gap, std::fabs(f[s] - obs.probabilities()[s]));
        r.max_twin_gap = std::max(r.max_twin_gap, std::fabs(c[s] - inter.probabilities()[s]));
      }
    }
  }
  return r;
}

}  // namespace cel::suites

#endif  // CEL_TEST_SUITES_HPP
