#ifndef CEL_TEST_HELPERS_HPP
#define CEL_TEST_HELPERS_HPP

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cel/cel.hpp"

namespace cel::test {

inline std::string models_dir() { return CEL_MODELS_DIR; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScmModel load(const std::string& name) {
  return parse_model_or_throw(read_text(models_dir() + "/" + name + ".scm.txt"));
}

inline const std::vector<std::string>& bundled_models() {
  static const std::vector<std::string> names = {
      "la",     "lb",     "lc",     "l_ex1",  "cs_ex1",      "l_ex2",      "cs_ex2",
      "l_ex3",  "cs_ex3", "l_ex4",  "cs_conf_ex4", "cs_med_ex4", "ls_ex1", "sv_ex1",
      "ls_ex2", "sv_ex2", "ls_ex3", "sv_ex3", "ls_ex4",      "sv_conf_ex4", "sv_med_ex4", "stable_chain"};
  return names;
}

inline Dag make_dag(int n, const std::vector<std::pair<int, int>>& edges) {
  Dag g;
  for (int i = 0; i < n; ++i) g.add_node({"V" + std::to_string(i), NodeKind::binary, Role::none, std::nullopt});
  for (auto [a, b] : edges) g.add_edge(NodeId{a}, NodeId{b});
  return g;
}

inline NodeSet nodes(std::initializer_list<int> ix) {
  NodeSet s;
  for (int i : ix) s.push_back(NodeId{i});
  return s;
}

/// Binary model over V0..V{n-1} with the given edges (i < j), random logistic
/// coefficients, and an outcome reading every node.
inline ScmModel random_binary_model(int n, const std::vector<std::pair<int, int>>& edges, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  ModelSpec spec;
  spec.t0 = 1;
  for (int j = 0; j < n; ++j) {
    NodeSpec ns;
    ns.base = "V" + std::to_string(j);
    BasicLogistic<std::string> l{coef(rng), {}};
    for (auto [a, b] : edges)
      if (b == j) l.terms.push_back({"V" + std::to_string(a), coef(rng)});
    ns.mechanism = l;
    spec.nodes.push_back(ns);
  }
  BasicLinearOutcome<std::string> y{0.0, {}, 0.0};
  for (int j = 0; j < n; ++j) y.terms.push_back({"V" + std::to_string(j), 1.0});
  spec.nodes.push_back(NodeSpec{"Y", std::nullopt, Role::none, y, {}, {}});
  return build_model_or_throw(spec);
}

inline ScenarioParams scenario(double alpha, double rho, double mu_w) {
  ScenarioParams p;
  p.alpha = alpha;
  p.rho = rho;
  p.mu_w = mu_w;
  return p;
}

inline ScmModel calibrated_scenario(const ScenarioParams& p) { return build_scenario(p, calibrate_intercepts(p)); }

}  // namespace cel::test

#endif  // CEL_TEST_HELPERS_HPP
