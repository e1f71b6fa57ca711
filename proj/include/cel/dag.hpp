#ifndef CEL_DAG_HPP
#define CEL_DAG_HPP

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cel/error.hpp"

namespace cel {

struct NodeId {
  int index = -1;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

using NodeSet = std::vector<NodeId>;

enum class NodeKind { binary, summary, outcome };

/// Role tag of a process variable. `none` marks generic nodes.
enum class Role { exposure, confounder, mediator, none };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::exposure: return "exposure";
    case Role::confounder: return "confounder";
    case Role::mediator: return "mediator";
    case Role::none: return "variable";
  }
  return "variable";
}

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::binary: return "binary";
    case NodeKind::summary: return "summary";
    case NodeKind::outcome: return "outcome";
  }
  return "binary";
}

struct DagNode {
  std::string name;
  NodeKind kind = NodeKind::binary;
  Role role = Role::none;
  std::optional<int> time;
};

/// Directed graph over named nodes. Nodes keep their declaration order, which
/// is the tie-break for topological sorting. Cycles are representable so that
/// validation can report them; every analysis routine requires acyclicity.
class Dag {
 public:
  NodeId add_node(DagNode node) {
    if (index_.count(node.name) != 0) throw DomainError("duplicate node '" + node.name + "'");
    NodeId id{static_cast<int>(nodes_.size())};
    index_.emplace(node.name, id.index);
    nodes_.push_back(std::move(node));
    parents_.emplace_back();
    children_.emplace_back();
    return id;
  }

  void add_edge(NodeId parent, NodeId child) {
    check(parent);
    check(child);
    auto& ps = parents_[child.index];
    if (std::find(ps.begin(), ps.end(), parent) != ps.end()) return;
    ps.push_back(parent);
    children_[parent.index].push_back(child);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const DagNode& node(NodeId id) const { check(id); return nodes_[id.index]; }
  const std::string& name(NodeId id) const { return node(id).name; }
  const NodeSet& parents(NodeId id) const { check(id); return parents_[id.index]; }
  const NodeSet& children(NodeId id) const { check(id); return children_[id.index]; }

  std::optional<NodeId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return NodeId{it->second};
  }

  NodeId id(std::string_view name) const {
    if (auto found = find(name)) return *found;
    throw UnknownNodeError(std::string(name));
  }

  NodeSet ids(const std::vector<std::string>& names) const {
    NodeSet out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(id(n));
    return out;
  }

  NodeSet all_nodes() const {
    NodeSet out(nodes_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = NodeId{static_cast<int>(i)};
    return out;
  }

  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (std::size_t c = 0; c < nodes_.size(); ++c)
      for (NodeId p : parents_[c]) out.emplace_back(p, NodeId{static_cast<int>(c)});
    return out;
  }

  bool contains(NodeId id) const noexcept {
    return id.index >= 0 && static_cast<std::size_t>(id.index) < nodes_.size();
  }

  void check(NodeId id) const {
    if (!contains(id)) throw UnknownNodeError("#" + std::to_string(id.index));
  }

 private:
  std::vector<DagNode> nodes_;
  std::vector<NodeSet> parents_;
  std::vector<NodeSet> children_;
  std::unordered_map<std::string, int> index_;
};

namespace detail {

inline std::vector<char> membership(const Dag& g, const NodeSet& s) {
  std::vector<char> in(g.size(), 0);
  for (NodeId id : s) {
    g.check(id);
    in[id.index] = 1;
  }
  return in;
}

inline std::string cycle_message(const Dag& g, const std::vector<int>& remaining_indegree) {
  // Walk parents among the unsorted nodes until a node repeats.
  int start = -1;
  for (std::size_t i = 0; i < remaining_indegree.size(); ++i)
    if (remaining_indegree[i] > 0) { start = static_cast<int>(i); break; }
  std::vector<int> seen_at(g.size(), -1);
  std::vector<int> walk;
  int cur = start;
  while (seen_at[cur] < 0) {
    seen_at[cur] = static_cast<int>(walk.size());
    walk.push_back(cur);
    for (NodeId p : g.parents(NodeId{cur})) {
      if (remaining_indegree[p.index] > 0) { cur = p.index; break; }
    }
  }
  std::vector<int> cycle(walk.begin() + seen_at[cur], walk.end());
  std::reverse(cycle.begin(), cycle.end());
  std::string msg = "cycle detected: ";
  for (int v : cycle) msg += g.name(NodeId{v}) + " -> ";
  msg += g.name(NodeId{cycle.front()});
  return msg;
}

}  // namespace detail

/// Kahn's algorithm; among ready nodes the earliest declared goes first.
inline NodeSet topological_order(const Dag& g) {
  std::vector<int> indegree(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    indegree[i] = static_cast<int>(g.parents(NodeId{static_cast<int>(i)}).size());
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  NodeSet order;
  order.reserve(g.size());
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(NodeId{v});
    for (NodeId c : g.children(NodeId{v}))
      if (--indegree[c.index] == 0) ready.push(c.index);
  }
  if (order.size() != g.size()) throw CycleError(detail::cycle_message(g, indegree));
  return order;
}

inline bool is_acyclic(const Dag& g) {
  try {
    topological_order(g);
    return true;
  } catch (const CycleError&) {
    return false;
  }
}

/// Nodes reachable from `from` along directed edges, including `from` itself.
inline std::vector<char> descendants_mask(const Dag& g, const NodeSet& from) {
  auto mask = detail::membership(g, from);
  std::vector<int> stack;
  for (NodeId id : from) stack.push_back(id.index);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (NodeId c : g.children(NodeId{v}))
      if (!mask[c.index]) { mask[c.index] = 1; stack.push_back(c.index); }
  }
  return mask;
}

inline std::vector<char> ancestors_mask(const Dag& g, const NodeSet& of) {
  auto mask = detail::membership(g, of);
  std::vector<int> stack;
  for (NodeId id : of) stack.push_back(id.index);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (NodeId p : g.parents(NodeId{v}))
      if (!mask[p.index]) { mask[p.index] = 1; stack.push_back(p.index); }
  }
  return mask;
}

/// d-separation of A and B given C, by the reachability ("Bayes-ball")
/// procedure: a trail may pass a collider only if the collider or one of its
/// descendants is in C, and may pass any other node only if it is not in C.
inline bool d_separated(const Dag& g, const NodeSet& a, const NodeSet& b, const NodeSet& c) {
  auto in_a = detail::membership(g, a);
  auto in_b = detail::membership(g, b);
  auto in_c = detail::membership(g, c);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if ((in_a[i] && in_b[i]) || (in_a[i] && in_c[i]) || (in_b[i] && in_c[i]))
      throw DomainError("d_separated: node sets must be pairwise disjoint ('" +
                        g.name(NodeId{static_cast<int>(i)}) + "' repeats)");
  }
  auto anc_c = ancestors_mask(g, c);

  // State: node plus direction of arrival (0 = from a child, travelling up;
  // 1 = from a parent, travelling down).
  std::vector<char> visited(2 * g.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (NodeId s : a) stack.emplace_back(s.index, 0);
  while (!stack.empty()) {
    auto [v, dir] = stack.back();
    stack.pop_back();
    if (visited[2 * v + dir]) continue;
    visited[2 * v + dir] = 1;
    if (!in_c[v] && in_b[v]) return false;
    if (dir == 0 && !in_c[v]) {
      for (NodeId p : g.parents(NodeId{v})) stack.emplace_back(p.index, 0);
      for (NodeId ch : g.children(NodeId{v})) stack.emplace_back(ch.index, 1);
    } else if (dir == 1) {
      if (!in_c[v])
        for (NodeId ch : g.children(NodeId{v})) stack.emplace_back(ch.index, 1);
      if (anc_c[v])
        for (NodeId p : g.parents(NodeId{v})) stack.emplace_back(p.index, 0);
    }
  }
  return true;
}

namespace detail {

inline Dag rebuild_without(const Dag& g, const std::function<bool(NodeId, NodeId)>& drop) {
  Dag out;
  for (NodeId id : g.all_nodes()) out.add_node(g.node(id));
  for (auto [p, c] : g.edges())
    if (!drop(p, c)) out.add_edge(p, c);
  return out;
}

}  // namespace detail

/// Graph surgery for do(S = s): removes every edge into S.
inline Dag cut_incoming(const Dag& g, const NodeSet& s) {
  auto in_s = detail::membership(g, s);
  return detail::rebuild_without(g, [&](NodeId, NodeId c) { return in_s[c.index] != 0; });
}

/// Removes every edge out of S.
inline Dag cut_outgoing(const Dag& g, const NodeSet& s) {
  auto in_s = detail::membership(g, s);
  return detail::rebuild_without(g, [&](NodeId p, NodeId) { return in_s[p.index] != 0; });
}

struct BackdoorResult {
  bool admissible = false;
  std::string reason;
};

/// Back-door criterion with an explanation of the verdict.
inline BackdoorResult backdoor_check(const Dag& g, const NodeSet& x, NodeId y, const NodeSet& w) {
  g.check(y);
  auto desc = descendants_mask(g, x);
  for (NodeId v : w) {
    g.check(v);
    if (desc[v.index])
      return {false, "'" + g.name(v) + "' is a descendant of the treatment; not established graphically"};
  }
  for (NodeId v : x)
    if (v == y) return {false, "outcome is among the treatment nodes"};
  NodeSet target{y};
  if (std::find(w.begin(), w.end(), y) != w.end())
    return {false, "outcome is in the adjustment set"};
  Dag pruned = cut_outgoing(g, x);
  if (d_separated(pruned, x, target, w)) return {true, "adjustment set blocks every back-door path"};
  return {false, "an open back-door path remains; not established graphically"};
}

inline bool backdoor_admissible(const Dag& g, const NodeSet& x, NodeId y, const NodeSet& w) {
  return backdoor_check(g, x, y, w).admissible;
}

}  // namespace cel

#endif  // CEL_DAG_HPP
