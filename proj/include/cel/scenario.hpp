#ifndef CEL_SCENARIO_HPP
#define CEL_SCENARIO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "cel/estimands.hpp"

namespace cel {

/// Parameters of the confounder-affected-by-exposure model: W_t confounders,
/// X_t exposures, threshold summaries of both, linear outcome
/// Y = mu0 + muX * Xs - muW * Ws + noise.
struct ScenarioParams {
  double alpha = 0.0;   // W -> X
  double beta = 1.0;    // X_{t-1} -> X_t
  double gamma = 1.0;   // W_{t'} -> W_t, t' < t
  double rho = 0.0;     // X_{t-1} -> W_t coefficient is rho * alpha
  double mu0 = 1.0;
  double mu_x = 1.0;
  double mu_w = 1.0;
  int t0 = 5;
  double target_prevalence = 0.1;
  double tau = 3.0;
  double sigma = 1.0;   // outcome noise sd; never affects a mean
};

inline std::string w_name(int t) { return "W[" + std::to_string(t) + "]"; }
inline std::string x_name(int t) { return "X[" + std::to_string(t) + "]"; }

/// Builds the model. `intercepts` = (c_W1..c_Wt0, c_X1..c_Xt0). Terms with a
/// zero coefficient are left out, so they carry no edge.
inline ScmModel build_scenario(const ScenarioParams& p, const std::vector<double>& intercepts) {
  if (p.t0 < 1) throw DomainError("t0 must be positive");
  if (intercepts.size() != static_cast<std::size_t>(2 * p.t0))
    throw DomainError("expected " + std::to_string(2 * p.t0) + " intercepts, got " + std::to_string(intercepts.size()));
  ModelSpec spec;
  spec.t0 = p.t0;
  auto term = [](std::vector<BasicTerm<std::string>>& terms, const std::string& ref, double coef) {
    if (coef != 0.0) terms.push_back({ref, coef});
  };
  for (int t = 1; t <= p.t0; ++t) {
    NodeSpec w;
    w.base = "W";
    w.time = t;
    w.role = Role::confounder;
    BasicLogistic<std::string> lw{intercepts[t - 1], {}};
    for (int s = 1; s < t; ++s) term(lw.terms, w_name(s), p.gamma);
    if (t > 1) term(lw.terms, x_name(t - 1), p.rho * p.alpha);
    w.mechanism = lw;
    spec.nodes.push_back(w);

    NodeSpec x;
    x.base = "X";
    x.time = t;
    x.role = Role::exposure;
    BasicLogistic<std::string> lx{intercepts[p.t0 + t - 1], {}};
    for (int s = 1; s <= t; ++s) term(lx.terms, w_name(s), p.alpha);
    if (t > 1) term(lx.terms, x_name(t - 1), p.beta);
    x.mechanism = lx;
    spec.nodes.push_back(x);
  }
  BasicThresholdSum<std::string> xs, ws;
  for (int t = 1; t <= p.t0; ++t) {
    xs.inputs.push_back(x_name(t));
    ws.inputs.push_back(w_name(t));
  }
  xs.tau = ws.tau = p.tau;
  NodeSpec nx{"Xs", std::nullopt, Role::none, xs, {}, {}};
  NodeSpec nw{"Ws", std::nullopt, Role::none, ws, {}, {}};
  BasicLinearOutcome<std::string> y{p.mu0, {}, p.sigma};
  term(y.terms, "Xs", p.mu_x);
  term(y.terms, "Ws", -p.mu_w);
  NodeSpec ny{"Y", std::nullopt, Role::none, y, {}, {}};
  spec.nodes.push_back(nx);
  spec.nodes.push_back(nw);
  spec.nodes.push_back(ny);
  return build_model_or_throw(spec);
}

namespace detail {

/// Root of sum_s P(s) expit(c + eta_s) = target by bisection on [lo, hi].
inline double bisect_intercept(const std::vector<double>& mass, const std::vector<double>& eta, double target,
                               double tol, const std::string& node) {
  auto f = [&](double c) {
    double acc = 0.0;
    for (std::size_t s = 0; s < mass.size(); ++s) acc += mass[s] * expit(c + eta[s]);
    return acc;
  };
  double lo = -40.0, hi = 40.0;
  const double flo = f(lo), fhi = f(hi);
  if (!(flo <= target && target <= fhi))
    throw CalibrationError("cannot calibrate " + node + ": prevalence over [-40, 40] spans [" + format_17(flo) + ", " +
                           format_17(fhi) + "], target " + format_17(target));
  // Run down to adjacent doubles: later nodes can be very flat in their
  // intercept, so slack here is amplified downstream.
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < target) lo = mid;
    else hi = mid;
  }
  double c = 0.5 * (lo + hi);
  if (std::fabs(f(c) - target) > tol)
    throw CalibrationError("cannot calibrate " + node + " to within " + format_17(tol) + " of the target");
  return c;
}

}  // namespace detail

/// Sequential calibration in topological order (W1, X1, W2, X2, ...): each
/// intercept is bisected so that the exact marginal of its node, computed
/// from the already calibrated prefix, equals the target prevalence.
/// Returns (c_W1..c_Wt0, c_X1..c_Xt0). With `closed_form_w1`, c_W1 is fixed to
/// logit(target) - 0.1 / alpha instead and the rest are calibrated.
inline std::vector<double> calibrate_intercepts(const ScenarioParams& p, double tol = 1e-10, bool closed_form_w1 = false) {
  if (!(p.target_prevalence > 0.0 && p.target_prevalence < 1.0))
    throw DomainError("target prevalence must lie in (0, 1)");
  if (closed_form_w1 && p.alpha == 0.0) throw DomainError("the closed-form c_W1 = logit(0.1) - 0.1/alpha needs alpha != 0");
  std::vector<double> c(2 * p.t0, 0.0);
  // The structure (and hence the topological order) does not depend on the
  // intercepts, so a placeholder model gives the node order and predictors.
  ScmModel m = build_scenario(p, c);
  const NodeSet& bin = m.binary_nodes();
  std::vector<double> mass{1.0};
  std::vector<double> values(m.size(), 0.0);
  for (std::size_t k = 0; k < bin.size(); ++k) {
    NodeId v = bin[k];
    const auto& lg = std::get<Logistic>(m.mechanism(v));
    std::vector<double> eta(mass.size());
    for (StateBits s = 0; s < mass.size(); ++s) {
      for (std::size_t i = 0; i < k; ++i) values[bin[i].index] = bit(s, static_cast<int>(i)) ? 1.0 : 0.0;
      eta[s] = detail::linear_predictor(lg, values.data()) - lg.intercept;
    }
    const int t = *m.time(v);
    const bool is_w = m.role(v) == Role::confounder;
    const std::size_t slot = is_w ? t - 1 : p.t0 + t - 1;
    double ck;
    if (closed_form_w1 && is_w && t == 1) ck = logit(p.target_prevalence) - 0.1 / p.alpha;
    else ck = detail::bisect_intercept(mass, eta, p.target_prevalence, tol, m.name(v));
    c[slot] = ck;
    std::vector<double> next(mass.size() * 2);
    for (StateBits s = 0; s < mass.size(); ++s) {
      double q = expit(ck + eta[s]);
      next[s] = mass[s] * (1.0 - q);
      next[s | (StateBits{1} << k)] = mass[s] * q;
    }
    mass = std::move(next);
  }
  return c;
}

/// Non-empty lists of parameter values; cells are the Cartesian product.
struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> rhos;
  std::vector<double> mu_ws;

  /// alpha on a 61-point uniform grid over [-3, 3]; the seven rho values and
  /// three muW values of the published figure.
  static SweepGrid default_grid() {
    SweepGrid g;
    for (int i = 0; i <= 60; ++i) g.alphas.push_back(-3.0 + 6.0 * i / 60.0);
    g.rhos = {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    g.mu_ws = {0.5, 1.0, 2.0};
    return g;
  }

  std::size_t cells() const { return alphas.size() * rhos.size() * mu_ws.size(); }
};

struct PairAte {
  std::string x_profile;
  std::string x_star_profile;
  double ate = 0.0;
  double weight = 0.0;
};

struct SweepRow {
  double alpha = 0.0, rho = 0.0, mu_w = 0.0;
  double ate_sv_conf = std::nan("");
  double ate_sv_med = std::nan("");
  double wavg_eq5 = std::nan("");
  std::vector<PairAte> pair_ates;
  std::vector<double> calibration_intercepts;
  bool ok = false;
  std::string error;
};

/// One cell: calibrate, build, and evaluate the three curves plus the pairs.
inline SweepRow evaluate_cell(const ScenarioParams& base, double alpha, double rho, double mu_w,
                              bool closed_form_w1 = false, double tol = 1e-10) {
  SweepRow row;
  row.alpha = alpha;
  row.rho = rho;
  row.mu_w = mu_w;
  try {
    ScenarioParams p = base;
    p.alpha = alpha;
    p.rho = rho;
    p.mu_w = mu_w;
    row.calibration_intercepts = calibrate_intercepts(p, tol, closed_form_w1);
    ScmModel m = build_scenario(p, row.calibration_intercepts);
    auto obs = exact_joint(m);
    row.ate_sv_conf = ate_sv(obs, SvFlavor::conf).value;
    row.ate_sv_med = ate_sv(obs, SvFlavor::med).value;
    auto avg = wavg_eq5(m);
    row.wavg_eq5 = avg.value;
    for (const auto& t : avg.decomposition) row.pair_ates.push_back({t.x_profile, t.x_star_profile, t.pair_ate, t.weight});
    row.ok = true;
  } catch (const Error& e) {
    row.ok = false;
    row.error = e.what();
    row.ate_sv_conf = row.ate_sv_med = row.wavg_eq5 = std::nan("");
    row.pair_ates.clear();
  }
  return row;
}

/// Runs every cell of the grid. Rows come back ordered by (muW, rho, alpha),
/// each list sorted ascending, whatever the number of worker threads.
/// Failed cells are flagged (ok = false) and the sweep continues.
inline std::vector<SweepRow> sweep_figure2(const SweepGrid& grid, const ScenarioParams& base, unsigned jobs = 1,
                                           bool closed_form_w1 = false,
                                           const std::function<void(std::size_t, std::size_t)>& progress = {},
                                           double tol = 1e-10) {
  if (grid.alphas.empty() || grid.rhos.empty() || grid.mu_ws.empty())
    throw DomainError("sweep grid lists must be non-empty");
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto alphas = sorted(grid.alphas), rhos = sorted(grid.rhos), mus = sorted(grid.mu_ws);
  struct Cell { double mu_w, rho, alpha; };
  std::vector<Cell> cells;
  for (double mw : mus)
    for (double r : rhos)
      for (double a : alphas) cells.push_back({mw, r, a});

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      rows[i] = evaluate_cell(base, cells[i].alpha, cells[i].rho, cells[i].mu_w, closed_form_w1, tol);
      std::size_t d = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(d, cells.size());
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

/// figure2.csv: mu_w,rho,alpha,ate_sv_conf,ate_sv_med,wavg_eq5 (17 significant
/// digits; failed cells carry nan).
inline void write_figure2_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "mu_w,rho,alpha,ate_sv_conf,ate_sv_med,wavg_eq5\n";
  for (const auto& r : rows)
    out << format_17(r.mu_w) << "," << format_17(r.rho) << "," << format_17(r.alpha) << ","
        << format_17(r.ate_sv_conf) << "," << format_17(r.ate_sv_med) << "," << format_17(r.wavg_eq5) << "\n";
}

/// figure2_pairs.csv: one line per profile pair with positive weight.
inline void write_figure2_pairs_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "mu_w,rho,alpha,x_profile,x_star_profile,pair_ate,weight\n";
  for (const auto& r : rows)
    for (const auto& pr : r.pair_ates)
      out << format_17(r.mu_w) << "," << format_17(r.rho) << "," << format_17(r.alpha) << "," << pr.x_profile << ","
          << pr.x_star_profile << "," << format_17(pr.ate) << "," << format_17(pr.weight) << "\n";
}

}  // namespace cel

#endif  // CEL_SCENARIO_HPP
