#ifndef CEL_MODEL_HPP
#define CEL_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cel/dag.hpp"
#include "cel/error.hpp"

namespace cel {

struct SourceLocation {
  int line = 0;    // 1-based; 0 = not from a file
  int column = 0;  // 1-based
};

struct Diagnostic {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string message;
  int line = 0;
  int column = 0;

  bool is_error() const noexcept { return severity == Severity::error; }
};

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  return std::any_of(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.is_error(); });
}

inline std::string to_string(const Diagnostic& d) {
  return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " +
         (d.is_error() ? "error" : "warning") + ": " + d.message;
}

// Mechanisms are templated on how they refer to other nodes: by name while a
// model is being described, by NodeId once it has been validated.

template <class Ref>
struct BasicTerm {
  Ref parent;
  double coef = 0.0;
  friend bool operator==(const BasicTerm&, const BasicTerm&) = default;
};

/// P(V = 1 | parents) = expit(intercept + sum coef * parent).
template <class Ref>
struct BasicLogistic {
  double intercept = 0.0;
  std::vector<BasicTerm<Ref>> terms;
  friend bool operator==(const BasicLogistic&, const BasicLogistic&) = default;
};

/// V = 1 whenever the node's own previous-time value is 1, otherwise logistic.
template <class Ref>
struct BasicPersistOr {
  BasicLogistic<Ref> base;
  Ref previous{};
  friend bool operator==(const BasicPersistOr&, const BasicPersistOr&) = default;
};

struct ConstantProb {
  double p = 0.5;
  friend bool operator==(const ConstantProb&, const ConstantProb&) = default;
};

/// Indicator that the sum of the inputs reaches `tau`.
template <class Ref>
struct BasicThresholdSum {
  std::vector<Ref> inputs;
  double tau = 0.0;
  friend bool operator==(const BasicThresholdSum&, const BasicThresholdSum&) = default;
};

template <class Ref>
struct BasicSumOf {
  std::vector<Ref> inputs;
  friend bool operator==(const BasicSumOf&, const BasicSumOf&) = default;
};

template <class Ref>
struct BasicCopyOf {
  Ref input{};
  friend bool operator==(const BasicCopyOf&, const BasicCopyOf&) = default;
};

/// Mean of the outcome: mu0 + sum coef * parent. Noise is additive, zero-mean.
template <class Ref>
struct BasicLinearOutcome {
  double mu0 = 0.0;
  std::vector<BasicTerm<Ref>> terms;
  double sigma = 0.0;
  friend bool operator==(const BasicLinearOutcome&, const BasicLinearOutcome&) = default;
};

template <class Ref>
using BasicMechanism =
    std::variant<BasicLogistic<Ref>, BasicPersistOr<Ref>, ConstantProb, BasicThresholdSum<Ref>,
                 BasicSumOf<Ref>, BasicCopyOf<Ref>, BasicLinearOutcome<Ref>>;

using Term = BasicTerm<NodeId>;
using Logistic = BasicLogistic<NodeId>;
using PersistOr = BasicPersistOr<NodeId>;
using ThresholdSum = BasicThresholdSum<NodeId>;
using SumOf = BasicSumOf<NodeId>;
using CopyOf = BasicCopyOf<NodeId>;
using LinearOutcome = BasicLinearOutcome<NodeId>;
using Mechanism = BasicMechanism<NodeId>;

inline NodeKind kind_of(const Mechanism& m) {
  switch (m.index()) {
    case 0: case 1: case 2: return NodeKind::binary;
    case 6: return NodeKind::outcome;
    default: return NodeKind::summary;
  }
}

/// One node as written by the user: base name, optional time index, role.
struct NodeSpec {
  std::string base;
  std::optional<int> time;
  Role role = Role::none;
  BasicMechanism<std::string> mechanism;
  SourceLocation where;
  /// Location of each parent reference, parallel to the order parents appear.
  std::vector<SourceLocation> ref_locations;

  std::string name() const { return time ? base + "[" + std::to_string(*time) + "]" : base; }
};

struct ModelSpec {
  std::optional<int> t0;
  SourceLocation t0_where;
  std::vector<NodeSpec> nodes;
};

inline std::string display_name(std::string_view base, std::optional<int> time) {
  std::string out(base);
  if (time) out += "[" + std::to_string(*time) + "]";
  return out;
}

namespace detail {

struct ModelData {
  int t0 = 1;
  Dag dag;
  std::vector<std::string> bases;
  std::vector<Mechanism> mechanisms;
  NodeSet order;
  NodeSet binary;               // binary nodes in topological order; bit i <-> binary[i]
  std::vector<int> bit_of;      // per node, -1 for non-binary
  NodeId outcome;
};

}  // namespace detail

/// Validated, immutable structural causal model. Copies share storage.
class ScmModel {
 public:
  int horizon() const { return d_->t0; }
  const Dag& dag() const { return d_->dag; }
  std::size_t size() const { return d_->dag.size(); }

  const Mechanism& mechanism(NodeId id) const {
    d_->dag.check(id);
    return d_->mechanisms[id.index];
  }
  const std::string& name(NodeId id) const { return d_->dag.name(id); }
  const std::string& base(NodeId id) const { d_->dag.check(id); return d_->bases[id.index]; }
  std::optional<int> time(NodeId id) const { return d_->dag.node(id).time; }
  Role role(NodeId id) const { return d_->dag.node(id).role; }
  NodeKind kind(NodeId id) const { return d_->dag.node(id).kind; }
  const NodeSet& parents(NodeId id) const { return d_->dag.parents(id); }

  NodeId id(std::string_view name) const { return d_->dag.id(name); }
  std::optional<NodeId> find(std::string_view name) const { return d_->dag.find(name); }
  NodeSet ids(const std::vector<std::string>& names) const { return d_->dag.ids(names); }

  /// Topological order, ties broken by declaration order.
  const NodeSet& order() const { return d_->order; }
  /// Binary nodes in topological order; this fixes the state bit layout.
  const NodeSet& binary_nodes() const { return d_->binary; }
  std::size_t binary_count() const { return d_->binary.size(); }
  int bit_of(NodeId id) const { d_->dag.check(id); return d_->bit_of[id.index]; }
  NodeId outcome() const { return d_->outcome; }

  /// Binary nodes with the given role, sorted by time then declaration.
  NodeSet process(Role r) const {
    NodeSet out;
    for (NodeId id : d_->dag.all_nodes())
      if (kind(id) == NodeKind::binary && role(id) == r) out.push_back(id);
    std::stable_sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
      return time(a).value_or(0) < time(b).value_or(0);
    });
    return out;
  }
  NodeSet exposures() const { return process(Role::exposure); }

  /// The exposure measured at inclusion: the latest exposure node.
  NodeId current_exposure() const {
    auto xs = exposures();
    if (xs.empty()) throw DomainError("model declares no exposure process");
    return xs.back();
  }

  NodeSet summaries() const {
    NodeSet out;
    for (NodeId id : d_->dag.all_nodes())
      if (kind(id) == NodeKind::summary) out.push_back(id);
    return out;
  }

  /// First summary (declaration order) whose inputs all carry role `r`.
  std::optional<NodeId> summary_of(Role r) const {
    for (NodeId id : summaries())
      if (role(id) == r) return id;
    return std::nullopt;
  }

  bool is_stable_exposure() const {
    auto xs = exposures();
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!std::holds_alternative<PersistOr>(mechanism(xs[i]))) return false;
    return !xs.empty();
  }

  /// Returns a copy with one binary node's mechanism replaced. The parent set
  /// of the new mechanism must be a subset of the old one.
  ScmModel with_mechanism(NodeId id, Mechanism mech) const;

 private:
  friend struct ModelAccess;
  explicit ScmModel(std::shared_ptr<const detail::ModelData> d) : d_(std::move(d)) {}
  std::shared_ptr<const detail::ModelData> d_;
};

struct BuildResult {
  std::optional<ScmModel> model;
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline bool reserved_word(std::string_view s) {
  static const std::set<std::string_view> words{
      "t0", "exposure", "confounder", "mediator", "variable", "summary", "outcome",
      "logistic", "persist_or", "const", "threshold_sum", "sum", "copy", "noise"};
  return words.count(s) != 0;
}

template <class Ref, class F>
void for_each_ref(const BasicMechanism<Ref>& m, F&& f) {
  std::visit(
      [&](const auto& mech) {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, BasicLogistic<Ref>>) {
          for (const auto& t : mech.terms) f(t.parent);
        } else if constexpr (std::is_same_v<T, BasicPersistOr<Ref>>) {
          for (const auto& t : mech.base.terms) f(t.parent);
        } else if constexpr (std::is_same_v<T, BasicThresholdSum<Ref>> ||
                             std::is_same_v<T, BasicSumOf<Ref>>) {
          for (const auto& r : mech.inputs) f(r);
        } else if constexpr (std::is_same_v<T, BasicCopyOf<Ref>>) {
          f(mech.input);
        } else if constexpr (std::is_same_v<T, BasicLinearOutcome<Ref>>) {
          for (const auto& t : mech.terms) f(t.parent);
        }
      },
      m);
}

inline std::vector<double> numbers_of(const BasicMechanism<std::string>& m) {
  std::vector<double> out;
  std::visit(
      [&](const auto& mech) {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, BasicLogistic<std::string>>) {
          out.push_back(mech.intercept);
          for (const auto& t : mech.terms) out.push_back(t.coef);
        } else if constexpr (std::is_same_v<T, BasicPersistOr<std::string>>) {
          out.push_back(mech.base.intercept);
          for (const auto& t : mech.base.terms) out.push_back(t.coef);
        } else if constexpr (std::is_same_v<T, ConstantProb>) {
          out.push_back(mech.p);
        } else if constexpr (std::is_same_v<T, BasicThresholdSum<std::string>>) {
          out.push_back(mech.tau);
        } else if constexpr (std::is_same_v<T, BasicLinearOutcome<std::string>>) {
          out.push_back(mech.mu0);
          out.push_back(mech.sigma);
          for (const auto& t : mech.terms) out.push_back(t.coef);
        }
      },
      m);
  return out;
}

template <class From, class F>
auto map_terms(const std::vector<BasicTerm<From>>& terms, F&& f) {
  std::vector<Term> out;
  for (const auto& t : terms) out.push_back(Term{f(t.parent), t.coef});
  return out;
}

inline Mechanism resolve(const BasicMechanism<std::string>& m, const Dag& dag,
                         const std::string& previous) {
  auto id = [&](const std::string& n) { return dag.id(n); };
  return std::visit(
      [&](const auto& mech) -> Mechanism {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, BasicLogistic<std::string>>) {
          return Logistic{mech.intercept, map_terms(mech.terms, id)};
        } else if constexpr (std::is_same_v<T, BasicPersistOr<std::string>>) {
          return PersistOr{Logistic{mech.base.intercept, map_terms(mech.base.terms, id)},
                           id(previous)};
        } else if constexpr (std::is_same_v<T, ConstantProb>) {
          return mech;
        } else if constexpr (std::is_same_v<T, BasicThresholdSum<std::string>>) {
          ThresholdSum s;
          for (const auto& r : mech.inputs) s.inputs.push_back(id(r));
          s.tau = mech.tau;
          return s;
        } else if constexpr (std::is_same_v<T, BasicSumOf<std::string>>) {
          SumOf s;
          for (const auto& r : mech.inputs) s.inputs.push_back(id(r));
          return s;
        } else if constexpr (std::is_same_v<T, BasicCopyOf<std::string>>) {
          return CopyOf{id(mech.input)};
        } else {
          return LinearOutcome{mech.mu0, map_terms(mech.terms, id), mech.sigma};
        }
      },
      m);
}

inline NodeKind spec_kind(const BasicMechanism<std::string>& m) {
  switch (m.index()) {
    case 0: case 1: case 2: return NodeKind::binary;
    case 6: return NodeKind::outcome;
    default: return NodeKind::summary;
  }
}

}  // namespace detail

struct ModelAccess {
  static ScmModel make(std::shared_ptr<const detail::ModelData> d) { return ScmModel(std::move(d)); }
  static const detail::ModelData& data(const ScmModel& m) { return *m.d_; }
};

/// Validates a model description. Every structural violation yields its own
/// error diagnostic; warnings never block construction.
inline BuildResult build_model(const ModelSpec& spec) {
  BuildResult result;
  auto error = [&](SourceLocation at, std::string msg) {
    result.diagnostics.push_back({Diagnostic::Severity::error, std::move(msg), at.line, at.column});
  };
  auto warning = [&](SourceLocation at, std::string msg) {
    result.diagnostics.push_back({Diagnostic::Severity::warning, std::move(msg), at.line, at.column});
  };

  if (!spec.t0) {
    error({1, 1}, "missing horizon declaration 't0 = <int>'");
  } else if (*spec.t0 < 1) {
    error(spec.t0_where, "horizon t0 must be a positive integer");
  }
  const int t0 = spec.t0.value_or(1);

  auto data = std::make_shared<detail::ModelData>();
  data->t0 = t0;
  Dag& dag = data->dag;
  std::vector<int> spec_of;  // dag index -> spec index
  int outcome_count = 0;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const NodeSpec& n = spec.nodes[i];
    const NodeKind kind = detail::spec_kind(n.mechanism);
    if (detail::reserved_word(n.base)) {
      error(n.where, "'" + n.base + "' is a reserved word and cannot name a node");
      continue;
    }
    if (n.time && (*n.time < 0 || *n.time > t0)) {
      error(n.where, "time index of '" + n.name() + "' outside [0, t0]");
      continue;
    }
    if (kind != NodeKind::binary && n.time) {
      error(n.where, "summary and outcome nodes carry no time index ('" + n.name() + "')");
      continue;
    }
    if (kind == NodeKind::outcome && ++outcome_count > 1) {
      error(n.where, "more than one outcome declared ('" + n.name() + "')");
      continue;
    }
    for (double v : detail::numbers_of(n.mechanism)) {
      if (!std::isfinite(v)) {
        error(n.where, "non-finite parameter in mechanism of '" + n.name() + "'");
        break;
      }
    }
    if (const auto* c = std::get_if<ConstantProb>(&n.mechanism); c && !(c->p >= 0.0 && c->p <= 1.0)) {
      error(n.where, "constant probability of '" + n.name() + "' must lie in [0, 1]");
    }
    if (const auto* o = std::get_if<BasicLinearOutcome<std::string>>(&n.mechanism); o && o->sigma < 0.0) {
      error(n.where, "noise sd of '" + n.name() + "' must be non-negative");
    }
    if (dag.find(n.name())) {
      error(n.where, "duplicate node '" + n.name() + "'");
      continue;
    }
    dag.add_node(DagNode{n.name(), kind, n.role, n.time});
    data->bases.push_back(n.base);
    spec_of.push_back(static_cast<int>(i));
  }
  if (outcome_count == 0) error({1, 1}, "no outcome declared");

  // Resolve references and add edges.
  std::vector<std::string> previous_of(dag.size());
  bool refs_ok = true;
  for (std::size_t k = 0; k < dag.size(); ++k) {
    const NodeSpec& n = spec.nodes[spec_of[k]];
    NodeId self{static_cast<int>(k)};
    const NodeKind kind = dag.node(self).kind;
    std::size_t ref_no = 0;
    std::set<std::string> seen_parents;
    detail::for_each_ref(n.mechanism, [&](const std::string& ref) {
      SourceLocation at = ref_no < n.ref_locations.size() ? n.ref_locations[ref_no] : n.where;
      ++ref_no;
      auto p = dag.find(ref);
      if (!p) {
        error(at, "undeclared variable '" + ref + "' referenced by '" + n.name() + "'");
        refs_ok = false;
        return;
      }
      if (dag.node(*p).kind == NodeKind::outcome) {
        error(at, "outcome '" + ref + "' referenced as a parent of '" + n.name() + "'");
        refs_ok = false;
        return;
      }
      if (!seen_parents.insert(ref).second && kind != NodeKind::summary) {
        error(at, "duplicate parent '" + ref + "' in mechanism of '" + n.name() + "'");
        refs_ok = false;
        return;
      }
      dag.add_edge(*p, self);
    });
    if (std::holds_alternative<BasicPersistOr<std::string>>(n.mechanism)) {
      std::optional<NodeId> prev;
      if (n.time) prev = dag.find(display_name(n.base, *n.time - 1));
      if (!prev || dag.node(*prev).kind != NodeKind::binary) {
        error(n.where, "persist_or on '" + n.name() + "' requires a declared binary node '" +
                           display_name(n.base, n.time.value_or(0) - 1) + "'");
        refs_ok = false;
      } else {
        previous_of[k] = dag.name(*prev);
        dag.add_edge(*prev, self);
      }
    }
    if (kind == NodeKind::summary) {
      bool empty = false;
      std::visit([&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BasicThresholdSum<std::string>> || std::is_same_v<T, BasicSumOf<std::string>>)
          empty = m.inputs.empty();
      }, n.mechanism);
      if (empty) {
        error(n.where, "summary '" + n.name() + "' reads no variables");
        refs_ok = false;
      }
    }
  }

  // Time-respecting edges between timed nodes.
  bool time_ok = true;
  for (auto [p, c] : dag.edges()) {
    auto tp = dag.node(p).time, tc = dag.node(c).time;
    if (tp && tc && *tp > *tc) {
      error(spec.nodes[spec_of[c.index]].where,
            "time-respecting order violated: '" + dag.name(p) + "' (t=" + std::to_string(*tp) +
                ") is a parent of '" + dag.name(c) + "' (t=" + std::to_string(*tc) + ")");
      time_ok = false;
    }
  }

  NodeSet order;
  if (refs_ok && time_ok) {
    try {
      order = topological_order(dag);
    } catch (const CycleError& e) {
      // Report at the first node of the cycle in declaration order.
      std::string msg = e.what();
      SourceLocation at{1, 1};
      std::size_t best = spec.nodes.size();
      for (std::size_t k = 0; k < dag.size(); ++k) {
        const std::string& nm = dag.name(NodeId{static_cast<int>(k)});
        if (msg.find(nm + " ") != std::string::npos && static_cast<std::size_t>(spec_of[k]) < best) {
          best = static_cast<std::size_t>(spec_of[k]);
          at = spec.nodes[best].where;
        }
      }
      error(at, msg);
    }
  }

  if (!order.empty()) {
    // Untimed nodes inherit the latest time they read; a timed child must not
    // precede it.
    std::vector<std::optional<int>> effective(dag.size());
    for (NodeId v : order) {
      effective[v.index] = dag.node(v).time;
      if (!effective[v.index]) {
        for (NodeId p : dag.parents(v))
          if (effective[p.index] && (!effective[v.index] || *effective[p.index] > *effective[v.index]))
            effective[v.index] = effective[p.index];
      }
    }
    for (auto [p, c] : dag.edges()) {
      auto tc = dag.node(c).time;
      if (!dag.node(p).time && tc && effective[p.index] && *effective[p.index] > *tc) {
        error(spec.nodes[spec_of[c.index]].where,
              "time-respecting order violated: '" + dag.name(p) + "' summarises t=" +
                  std::to_string(*effective[p.index]) + " but is a parent of '" + dag.name(c) + "'");
      }
    }
  }

  if (has_errors(result.diagnostics)) {
    std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                     [](const Diagnostic& a, const Diagnostic& b) {
                       return std::pair(a.line, a.column) < std::pair(b.line, b.column);
                     });
    return result;
  }

  // Summary roles: shared role of the inputs, if any.
  Dag typed;
  for (NodeId v : dag.all_nodes()) {
    DagNode node = dag.node(v);
    if (node.kind == NodeKind::summary) {
      std::optional<Role> shared;
      bool mixed = false;
      for (NodeId p : dag.parents(v)) {
        Role r = dag.node(p).role;
        if (!shared) shared = r;
        else if (*shared != r) mixed = true;
      }
      node.role = (shared && !mixed) ? *shared : Role::none;
    }
    typed.add_node(node);
  }
  for (auto [p, c] : dag.edges()) typed.add_edge(p, c);
  data->dag = std::move(typed);
  data->order = std::move(order);

  for (std::size_t k = 0; k < data->dag.size(); ++k)
    data->mechanisms.push_back(detail::resolve(spec.nodes[spec_of[k]].mechanism, data->dag, previous_of[k]));
  data->bit_of.assign(data->dag.size(), -1);
  for (NodeId v : data->order) {
    if (data->dag.node(v).kind == NodeKind::binary) {
      data->bit_of[v.index] = static_cast<int>(data->binary.size());
      data->binary.push_back(v);
    } else if (data->dag.node(v).kind == NodeKind::outcome) {
      data->outcome = v;
    }
  }

  auto feeds_outcome = ancestors_mask(data->dag, {data->outcome});
  for (std::size_t k = 0; k < data->dag.size(); ++k)
    if (!feeds_outcome[k])
      warning(spec.nodes[spec_of[k]].where,
              "'" + data->dag.name(NodeId{static_cast<int>(k)}) + "' does not affect the outcome");

  result.model = ModelAccess::make(std::move(data));
  return result;
}

/// Builds or throws DomainError carrying the first error diagnostic.
inline ScmModel build_model_or_throw(const ModelSpec& spec) {
  auto r = build_model(spec);
  if (!r.model) {
    for (const auto& d : r.diagnostics)
      if (d.is_error()) throw DomainError("invalid model: " + d.message);
  }
  return *r.model;
}

inline ScmModel ScmModel::with_mechanism(NodeId id, Mechanism mech) const {
  if (kind_of(mech) != kind(id)) throw DomainError("mechanism kind mismatch for '" + name(id) + "'");
  auto copy = std::make_shared<detail::ModelData>(*d_);
  copy->mechanisms[id.index] = std::move(mech);
  return ScmModel(std::move(copy));
}

}  // namespace cel

#endif  // CEL_MODEL_HPP
