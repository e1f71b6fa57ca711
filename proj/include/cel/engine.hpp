#ifndef CEL_ENGINE_HPP
#define CEL_ENGINE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cel/model.hpp"
#include "cel/numeric.hpp"

namespace cel {

/// Binary state packed one bit per binary node. Bit i belongs to
/// model.binary_nodes()[i], i.e. bits follow the topological order.
using StateBits = std::uint32_t;

inline constexpr std::size_t default_state_cap = 24;

inline bool bit(StateBits s, int i) { return ((s >> i) & 1u) != 0; }

/// Fixed-width 0/1 rendering; character i is bit i (topological order).
inline std::string state_string(const ScmModel& m, StateBits s) {
  std::string out(m.binary_count(), '0');
  for (std::size_t i = 0; i < out.size(); ++i)
    if (bit(s, static_cast<int>(i))) out[i] = '1';
  return out;
}

struct Literal {
  NodeId node;
  double value = 0.0;
  friend bool operator==(const Literal&, const Literal&) = default;
};

/// Conjunction of node = value literals over binary or summary nodes.
class Event {
 public:
  Event() = default;

  Event& add(const ScmModel& m, NodeId node, double value) {
    m.dag().check(node);
    if (m.kind(node) == NodeKind::outcome)
      throw DomainError("events cannot constrain the outcome '" + m.name(node) + "'");
    if (m.kind(node) == NodeKind::binary && value != 0.0 && value != 1.0)
      throw DomainError("binary node '" + m.name(node) + "' cannot take value " + format_exact(value));
    for (const auto& l : lits_) {
      if (l.node == node) {
        if (l.value != value)
          throw DomainError("contradictory literals on '" + m.name(node) + "'");
        return *this;
      }
    }
    lits_.push_back({node, value});
    return *this;
  }

  Event& add(const Event& other, const ScmModel& m) {
    for (const auto& l : other.lits_) add(m, l.node, l.value);
    return *this;
  }

  /// Parses "X[1]=1, W[2]=0". The empty string is the sure event.
  static Event parse(const ScmModel& m, std::string_view text) {
    Event e;
    std::size_t pos = 0;
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
      return s;
    };
    if (trim(text).empty()) return e;
    while (pos <= text.size()) {
      std::size_t comma = text.find(',', pos);
      if (comma == std::string_view::npos) comma = text.size();
      std::string_view lit = trim(text.substr(pos, comma - pos));
      std::size_t eq = lit.find('=');
      if (eq == std::string_view::npos) throw DomainError("malformed literal '" + std::string(lit) + "'");
      std::string_view name = trim(lit.substr(0, eq));
      std::string_view val = trim(lit.substr(eq + 1));
      bool neg = !val.empty() && val.front() == '-';
      if (neg) val.remove_prefix(1);
      auto v = parse_real(val);
      if (!v) throw DomainError("malformed value in literal '" + std::string(lit) + "'");
      e.add(m, m.id(name), neg ? -*v : *v);
      if (comma == text.size()) break;
      pos = comma + 1;
    }
    return e;
  }

  const std::vector<Literal>& literals() const { return lits_; }
  bool empty() const { return lits_.empty(); }

  bool matches(const double* values) const {
    for (const auto& l : lits_)
      if (values[l.node.index] != l.value) return false;
    return true;
  }

  std::string to_string(const ScmModel& m) const {
    if (lits_.empty()) return "<sure event>";
    std::string s;
    for (std::size_t i = 0; i < lits_.size(); ++i) {
      if (i) s += ",";
      s += m.name(lits_[i].node) + "=" + format_exact(lits_[i].value);
    }
    return s;
  }

 private:
  std::vector<Literal> lits_;
};

namespace detail {

inline double linear_predictor(const Logistic& l, const double* values) {
  double eta = l.intercept;
  for (const auto& t : l.terms) eta += t.coef * values[t.parent.index];
  return eta;
}

}  // namespace detail

/// P(node = 1 | values of its parents) for a binary node.
inline double success_probability(const ScmModel& m, NodeId node, const double* values) {
  const Mechanism& mech = m.mechanism(node);
  switch (mech.index()) {
    case 0: return expit(detail::linear_predictor(std::get<Logistic>(mech), values));
    case 1: {
      const auto& po = std::get<PersistOr>(mech);
      if (values[po.previous.index] == 1.0) return 1.0;
      return expit(detail::linear_predictor(po.base, values));
    }
    case 2: return std::get<ConstantProb>(mech).p;
    default: throw DomainError("'" + m.name(node) + "' is not a binary node");
  }
}

/// Value of a summary node, or the conditional mean of the outcome.
inline double deterministic_value(const ScmModel& m, NodeId node, const double* values) {
  const Mechanism& mech = m.mechanism(node);
  switch (mech.index()) {
    case 3: {
      const auto& s = std::get<ThresholdSum>(mech);
      double total = 0.0;
      for (NodeId in : s.inputs) total += values[in.index];
      return total >= s.tau ? 1.0 : 0.0;
    }
    case 4: {
      double total = 0.0;
      for (NodeId in : std::get<SumOf>(mech).inputs) total += values[in.index];
      return total;
    }
    case 5: return values[std::get<CopyOf>(mech).input.index];
    case 6: {
      const auto& o = std::get<LinearOutcome>(mech);
      double mean = o.mu0;
      for (const auto& t : o.terms) mean += t.coef * values[t.parent.index];
      return mean;
    }
    default: throw DomainError("'" + m.name(node) + "' is not deterministic");
  }
}

/// Fills `values` (one slot per node) for a full binary state.
inline void evaluate_state(const ScmModel& m, StateBits s, double* values) {
  for (NodeId v : m.order()) {
    int b = m.bit_of(v);
    values[v.index] = b >= 0 ? (bit(s, b) ? 1.0 : 0.0) : deterministic_value(m, v, values);
  }
}

inline std::vector<double> state_values(const ScmModel& m, StateBits s) {
  std::vector<double> values(m.size());
  evaluate_state(m, s, values.data());
  return values;
}

namespace detail {

/// Per-node forced value from an intervention, -1 when free.
inline std::vector<signed char> forced_values(const ScmModel& m, const Event& intervention) {
  std::vector<signed char> forced(m.size(), -1);
  for (const auto& l : intervention.literals()) {
    if (m.kind(l.node) != NodeKind::binary)
      throw DomainError("cannot intervene on " + std::string(to_string(m.kind(l.node))) + " node '" +
                        m.name(l.node) + "'; interventions target binary process nodes");
    forced[l.node.index] = static_cast<signed char>(l.value);
  }
  return forced;
}

inline void check_cap(const ScmModel& m, std::size_t cap) {
  if (m.binary_count() > cap)
    throw CapacityError("model has " + std::to_string(m.binary_count()) + " binary nodes, above the exact-enumeration cap of " +
                        std::to_string(cap) + "; use the Monte Carlo path (monte_carlo_joint / mc-validate)");
}

/// Depth-first walk over the topological order. Calls leaf(bits, prob,
/// values) for every complete state of positive probability. When `weights`
/// is false every state is visited with probability 1 (values only).
template <class Leaf>
void enumerate_states(const ScmModel& m, const std::vector<signed char>& forced, bool weights, Leaf&& leaf) {
  const NodeSet& order = m.order();
  std::vector<double> values(m.size(), 0.0);
  auto rec = [&](auto&& self, std::size_t k, StateBits bits, double p) -> void {
    if (k == order.size()) {
      leaf(bits, p, values.data());
      return;
    }
    NodeId v = order[k];
    int b = m.bit_of(v);
    if (b < 0) {
      values[v.index] = deterministic_value(m, v, values.data());
      self(self, k + 1, bits, p);
      return;
    }
    if (!weights) {
      for (int x = 0; x < 2; ++x) {
        values[v.index] = x;
        self(self, k + 1, x ? bits | (StateBits{1} << b) : bits, p);
      }
      return;
    }
    double p1;
    if (forced[v.index] >= 0) p1 = forced[v.index];
    else p1 = success_probability(m, v, values.data());
    if (p1 < 1.0) {
      values[v.index] = 0.0;
      self(self, k + 1, bits, p * (1.0 - p1));
    }
    if (p1 > 0.0) {
      values[v.index] = 1.0;
      self(self, k + 1, bits | (StateBits{1} << b), p * p1);
    }
  };
  rec(rec, 0, 0, 1.0);
}

}  // namespace detail

/// Probability table over the binary states of a model. The outcome is not a
/// coordinate: its conditional mean is a function of the state.
class JointTable {
 public:
  JointTable(ScmModel m, std::vector<double> p, std::uint64_t samples = 0)
      : model_(std::move(m)), p_(std::move(p)), samples_(samples) {
    if (p_.size() != (std::size_t{1} << model_.binary_count()))
      throw DomainError("joint table size does not match the model's state space");
  }

  const ScmModel& model() const { return model_; }
  const std::vector<double>& probabilities() const { return p_; }
  double operator[](StateBits s) const { return p_.at(s); }
  std::size_t size() const { return p_.size(); }
  /// Number of Monte Carlo draws behind the table; 0 for exact tables.
  std::uint64_t samples() const { return samples_; }

  double total() const {
    double t = 0.0;
    for (double x : p_) t += x;
    return t;
  }

  /// f(bits, probability, node values) for each state with probability > 0.
  template <class F>
  void for_each_state(F&& f) const {
    detail::enumerate_states(model_, {}, false, [&](StateBits s, double, const double* values) {
      double p = p_[s];
      if (p > 0.0) f(s, p, values);
    });
  }

 private:
  ScmModel model_;
  std::vector<double> p_;
  std::uint64_t samples_;
};

/// Joint under do(intervention) by truncated factorization; the empty
/// intervention gives the observational joint.
inline JointTable do_joint(const ScmModel& m, const Event& intervention, std::size_t cap = default_state_cap) {
  detail::check_cap(m, cap);
  auto forced = detail::forced_values(m, intervention);
  std::vector<double> p(std::size_t{1} << m.binary_count(), 0.0);
  detail::enumerate_states(m, forced, true, [&](StateBits s, double q, const double*) { p[s] = q; });
  return JointTable(m, std::move(p));
}

inline JointTable exact_joint(const ScmModel& m, std::size_t cap = default_state_cap) {
  return do_joint(m, Event{}, cap);
}

inline double probability(const JointTable& j, const Event& e) {
  double total = 0.0;
  j.for_each_state([&](StateBits, double p, const double* values) {
    if (e.matches(values)) total += p;
  });
  return total;
}

/// P(event | given); throws PositivityError when P(given) = 0.
inline double conditional(const JointTable& j, const Event& e, const Event& given) {
  double joint = 0.0, marginal = 0.0;
  j.for_each_state([&](StateBits, double p, const double* values) {
    if (!given.matches(values)) return;
    marginal += p;
    if (e.matches(values)) joint += p;
  });
  if (!(marginal > 0.0)) throw PositivityError(given.to_string(j.model()));
  return joint / marginal;
}

/// E[Y | given] from the linear outcome mean; noise has mean zero.
inline double expected_outcome(const JointTable& j, const Event& given = {}) {
  const NodeId y = j.model().outcome();
  double num = 0.0, den = 0.0;
  j.for_each_state([&](StateBits, double p, const double* values) {
    if (!given.matches(values)) return;
    den += p;
    num += p * values[y.index];
  });
  if (!(den > 0.0)) throw PositivityError(given.to_string(j.model()));
  return num / den;
}

inline double expected_outcome(const ScmModel& m, const JointTable& j, const Event& given = {}) {
  (void)m;
  return expected_outcome(j, given);
}

/// E[Y^{do(x)}] through the sequential g-formula: every non-intervened binary
/// node is drawn from its observational conditional given the full history
/// of earlier nodes (topological order), with intervened nodes held at their
/// values. Only the observational joint is consulted.
inline double gformula_expectation(const JointTable& obs, const Event& intervention) {
  const ScmModel& m = obs.model();
  auto forced = detail::forced_values(m, intervention);
  const std::size_t n = m.binary_count();
  // prefix[k][h] = P(first k bits = h).
  std::vector<std::vector<double>> prefix(n + 1);
  prefix[n] = obs.probabilities();
  for (std::size_t k = n; k-- > 0;) {
    prefix[k].assign(std::size_t{1} << k, 0.0);
    const StateBits hi = StateBits{1} << k;
    for (StateBits h = 0; h < hi; ++h) prefix[k][h] = prefix[k + 1][h] + prefix[k + 1][h | hi];
  }
  const NodeSet& bin = m.binary_nodes();
  const NodeId y = m.outcome();
  std::vector<double> values(m.size());
  auto history = [&](std::size_t k, StateBits h) {
    Event e;
    for (std::size_t i = 0; i < k; ++i) e.add(m, bin[i], bit(h, static_cast<int>(i)) ? 1.0 : 0.0);
    return e.to_string(m);
  };
  double total = 0.0;
  auto rec = [&](auto&& self, std::size_t k, StateBits h, double w) -> void {
    if (k == n) {
      if (!(prefix[n][h] > 0.0)) throw PositivityError(history(n, h));
      evaluate_state(m, h, values.data());
      total += w * values[y.index];
      return;
    }
    NodeId v = bin[k];
    if (forced[v.index] >= 0) {
      self(self, k + 1, forced[v.index] ? h | (StateBits{1} << k) : h, w);
      return;
    }
    const double den = prefix[k][h];
    if (!(den > 0.0)) throw PositivityError(history(k, h));
    for (int x = 0; x < 2; ++x) {
      StateBits next = x ? h | (StateBits{1} << k) : h;
      double f = prefix[k + 1][next] / den;
      if (f > 0.0) self(self, k + 1, next, w * f);
    }
  };
  rec(rec, 0, 0, 1.0);
  return total;
}

inline double gformula_expectation(const ScmModel& m, const Event& intervention) {
  return gformula_expectation(exact_joint(m), intervention);
}

struct TwinEntry {
  StateBits factual = 0;
  StateBits counterfactual = 0;
  double probability = 0.0;
};

/// Joint law of a factual world and its counterfactual under an intervention,
/// stored sparsely (only pairs with positive probability).
class TwinJointTable {
 public:
  TwinJointTable(ScmModel m, Event intervention, std::vector<TwinEntry> entries)
      : model_(std::move(m)), intervention_(std::move(intervention)), entries_(std::move(entries)) {}

  const ScmModel& model() const { return model_; }
  const Event& intervention() const { return intervention_; }
  const std::vector<TwinEntry>& entries() const { return entries_; }

  std::vector<double> factual_marginal() const {
    std::vector<double> p(std::size_t{1} << model_.binary_count(), 0.0);
    for (const auto& e : entries_) p[e.factual] += e.probability;
    return p;
  }

  std::vector<double> counterfactual_marginal() const {
    std::vector<double> p(std::size_t{1} << model_.binary_count(), 0.0);
    for (const auto& e : entries_) p[e.counterfactual] += e.probability;
    return p;
  }

 private:
  ScmModel model_;
  Event intervention_;
  std::vector<TwinEntry> entries_;
};

inline constexpr std::size_t default_twin_cap = 16;

/// Couples each binary node's factual and counterfactual copies through one
/// shared uniform: the pair is (1{u <= p_f}, 1{u <= p_c}).
inline TwinJointTable twin_joint(const ScmModel& m, const Event& intervention, std::size_t cap = default_twin_cap) {
  detail::check_cap(m, cap);
  auto forced = detail::forced_values(m, intervention);
  const NodeSet& order = m.order();
  std::vector<double> fv(m.size(), 0.0), cv(m.size(), 0.0);
  std::vector<TwinEntry> entries;
  auto rec = [&](auto&& self, std::size_t k, StateBits fb, StateBits cb, double p) -> void {
    if (k == order.size()) {
      entries.push_back({fb, cb, p});
      return;
    }
    NodeId v = order[k];
    int b = m.bit_of(v);
    if (b < 0) {
      fv[v.index] = deterministic_value(m, v, fv.data());
      cv[v.index] = deterministic_value(m, v, cv.data());
      self(self, k + 1, fb, cb, p);
      return;
    }
    const double pf = success_probability(m, v, fv.data());
    const double pc = forced[v.index] >= 0 ? forced[v.index] : success_probability(m, v, cv.data());
    const double hi = std::max(pf, pc), lo = std::min(pf, pc);
    const StateBits mask = StateBits{1} << b;
    const double cells[4] = {1.0 - hi, std::max(pc - pf, 0.0), std::max(pf - pc, 0.0), lo};
    for (int c = 0; c < 4; ++c) {
      if (!(cells[c] > 0.0)) continue;
      const int f = c >> 1, x = c & 1;
      fv[v.index] = f;
      cv[v.index] = x;
      self(self, k + 1, f ? fb | mask : fb, x ? cb | mask : cb, p * cells[c]);
    }
  };
  rec(rec, 0, 0, 0, 1.0);
  return TwinJointTable(m, intervention, std::move(entries));
}

/// E[Y^{do(x)} | factual stratum], from the twin table.
inline double counterfactual_mean(const TwinJointTable& t, const Event& stratum = {}) {
  const ScmModel& m = t.model();
  const NodeId y = m.outcome();
  std::vector<double> fvals(m.size()), cvals(m.size());
  double num = 0.0, den = 0.0;
  for (const auto& e : t.entries()) {
    if (!stratum.empty()) {
      evaluate_state(m, e.factual, fvals.data());
      if (!stratum.matches(fvals.data())) continue;
    }
    evaluate_state(m, e.counterfactual, cvals.data());
    den += e.probability;
    num += e.probability * cvals[y.index];
  }
  if (!(den > 0.0)) throw PositivityError(stratum.to_string(m));
  return num / den;
}

struct IndependenceResult {
  bool independent = true;
  double max_gap = 0.0;
};

/// Mean-independence of Y^{do(x)} from the factual values of the intervened
/// nodes within each stratum of `given`: max over strata of the spread of
/// E[Y^{x} | X = a, C = c] across a. Cells of probability 0 carry no
/// constraint and are skipped.
inline IndependenceResult counterfactual_independent(const ScmModel& m, const Event& intervention,
                                                     const NodeSet& given, double tol = 1e-9) {
  auto twin = twin_joint(m, intervention);
  const NodeId y = m.outcome();
  std::vector<double> fvals(m.size()), cvals(m.size());
  // key: (values of C, factual values of intervened nodes) -> (mass, mass * Y^x)
  std::map<std::pair<std::vector<double>, std::vector<double>>, std::pair<double, double>> cells;
  for (const auto& e : twin.entries()) {
    evaluate_state(m, e.factual, fvals.data());
    evaluate_state(m, e.counterfactual, cvals.data());
    std::vector<double> c, a;
    for (NodeId v : given) c.push_back(fvals[v.index]);
    for (const auto& l : intervention.literals()) a.push_back(fvals[l.node.index]);
    auto& cell = cells[{std::move(c), std::move(a)}];
    cell.first += e.probability;
    cell.second += e.probability * cvals[y.index];
  }
  std::map<std::vector<double>, std::pair<double, double>> range;  // c -> (min, max)
  for (const auto& [key, cell] : cells) {
    if (!(cell.first > 0.0)) continue;
    double mean = cell.second / cell.first;
    auto it = range.find(key.first);
    if (it == range.end()) range.emplace(key.first, std::pair(mean, mean));
    else it->second = {std::min(it->second.first, mean), std::max(it->second.second, mean)};
  }
  IndependenceResult r;
  for (const auto& [c, mm] : range) r.max_gap = std::max(r.max_gap, mm.second - mm.first);
  r.independent = r.max_gap <= tol;
  return r;
}

namespace detail {

inline double unit_uniform(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Seed of the k-th auxiliary stream derived from a base seed (splitmix64).
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Empirical joint from n forward samples. PRNG: std::mt19937_64 seeded with
/// `seed`; one draw per binary node in topological order, u = (x >> 11) * 2^-53,
/// node = 1 iff u < P(node = 1 | parents). Intervened nodes still consume
/// their draw so streams stay aligned across interventions.
inline JointTable monte_carlo_joint(const ScmModel& m, std::uint64_t n, std::uint64_t seed,
                                    const Event& intervention = {}, std::size_t cap = default_state_cap) {
  if (n == 0) throw DomainError("Monte Carlo sample size must be positive");
  detail::check_cap(m, cap);
  auto forced = detail::forced_values(m, intervention);
  std::mt19937_64 gen(seed);
  std::vector<std::uint64_t> counts(std::size_t{1} << m.binary_count(), 0);
  std::vector<double> values(m.size(), 0.0);
  const NodeSet& order = m.order();
  for (std::uint64_t i = 0; i < n; ++i) {
    StateBits s = 0;
    for (NodeId v : order) {
      int b = m.bit_of(v);
      if (b < 0) {
        if (m.kind(v) == NodeKind::summary) values[v.index] = deterministic_value(m, v, values.data());
        continue;
      }
      double u = detail::unit_uniform(gen);
      double p = forced[v.index] >= 0 ? forced[v.index] : success_probability(m, v, values.data());
      bool one = u < p;
      values[v.index] = one ? 1.0 : 0.0;
      if (one) s |= StateBits{1} << b;
    }
    ++counts[s];
  }
  std::vector<double> p(counts.size());
  for (std::size_t s = 0; s < p.size(); ++s) p[s] = static_cast<double>(counts[s]) / static_cast<double>(n);
  return JointTable(m, std::move(p), n);
}

/// CSV export: header `state_bits,probability`; state_bits as from
/// state_string (topological bit order); states of probability 0 omitted.
inline void write_joint_csv(std::ostream& out, const JointTable& j) {
  out << "state_bits,probability\n";
  for (std::size_t s = 0; s < j.size(); ++s) {
    if (j[static_cast<StateBits>(s)] > 0.0)
      out << state_string(j.model(), static_cast<StateBits>(s)) << "," << format_17(j[static_cast<StateBits>(s)]) << "\n";
  }
}

}  // namespace cel

#endif  // CEL_ENGINE_HPP
