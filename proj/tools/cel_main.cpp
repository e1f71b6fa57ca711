// cel: command-line front end to the library.
//
// Exit codes: 0 success, 1 domain error, 2 IO error, 3 positivity violation,
// 64 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cel/cel.hpp"
#include "cel/report_json.hpp"

namespace {

using namespace cel;
using nlohmann::json;

constexpr int exit_ok = 0, exit_domain = 1, exit_io = 2, exit_positivity = 3, exit_usage = 64;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void print_diagnostics(const std::string& file, const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) std::cerr << file << ":" << to_string(d) << "\n";
}

// Parses a model file; diagnostics go to stderr. Errors become a domain error.
ScmModel load_model(const std::string& path) {
  auto res = parse_model(read_file(path));
  print_diagnostics(path, res.diagnostics);
  if (!res.model) throw DomainError("'" + path + "' is not a valid model");
  return *res.model;
}

// Output goes to --out when given, else stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot write '" + path + "'");
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw IoError("error writing output");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    auto b = cur.find_first_not_of(" \t\r");
    auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

double parse_signed(const std::string& text) {
  std::string_view v = text;
  bool neg = !v.empty() && v.front() == '-';
  if (neg || (!v.empty() && v.front() == '+')) v.remove_prefix(1);
  auto r = parse_real(v);
  if (!r) throw UsageError("not a number: '" + text + "'");
  return neg ? -*r : *r;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : split(text, ','))
    if (!f.empty()) out.push_back(parse_signed(f));
  return out;
}

unsigned default_jobs() {
  if (const char* env = std::getenv("CEL_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
    throw UsageError("CEL_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Grid file: lines `alpha = v, v, ...`, `rho = ...`, `mu_w = ...`; `#` comments.
SweepGrid read_grid(const std::string& path) {
  SweepGrid g;
  std::istringstream in(read_file(path));
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(no) + ": expected 'key = values'");
    auto key = split(line.substr(0, eq), ',').front();
    auto vals = parse_list(line.substr(eq + 1));
    if (key == "alpha") g.alphas = vals;
    else if (key == "rho") g.rhos = vals;
    else if (key == "mu_w") g.mu_ws = vals;
    else throw UsageError(path + ":" + std::to_string(no) + ": unknown grid key '" + key + "'");
  }
  if (g.alphas.empty() || g.rhos.empty() || g.mu_ws.empty())
    throw UsageError("grid file '" + path + "' must give non-empty alpha, rho and mu_w lists");
  return g;
}

struct ScenarioFlags {
  double alpha = 1.0, rho = 1.0, mu_w = 1.0;
  ScenarioParams params;
  bool closed_form_w1 = false;
  double tol = 1e-10;

  void attach(CLI::App* c, bool with_point) {
    if (with_point) {
      c->add_option("--alpha", alpha, "W -> X coefficient");
      c->add_option("--rho", rho, "X -> W multiplier");
      c->add_option("--mu-w", mu_w, "outcome coefficient of the confounder summary");
    }
    c->add_option("--beta", params.beta, "X[t-1] -> X[t] coefficient");
    c->add_option("--gamma", params.gamma, "W -> later W coefficient");
    c->add_option("--mu0", params.mu0, "outcome intercept");
    c->add_option("--mu-x", params.mu_x, "outcome coefficient of the exposure summary");
    c->add_option("--t0", params.t0, "horizon")->check(CLI::Range(1, 12));
    c->add_option("--tau", params.tau, "summary threshold");
    c->add_option("--target", params.target_prevalence, "target prevalence of every process node");
    c->add_option("--tol", tol, "calibration tolerance on the prevalence");
    c->add_flag("--closed-form-w1", closed_form_w1, "fix c_W1 = logit(0.1) - 0.1/alpha instead of calibrating it");
  }
};

// ---- subcommands ------------------------------------------------------------

int cmd_validate(const std::string& path) {
  auto res = parse_model(read_file(path));
  print_diagnostics(path, res.diagnostics);
  return res.model ? exit_ok : exit_domain;
}

struct CheckOptions {
  std::string truth, simple;
  std::vector<std::string> conditions;
  std::vector<std::string> candidates;
  bool numeric = false;
  double tol = 1e-9;
  std::string format = "csv", out;
};

int cmd_check(const CheckOptions& o) {
  std::vector<ConditionId> ids;
  for (const auto& c : o.conditions) {
    auto id = parse_condition(c);
    if (!id) throw UsageError("unknown condition '" + c + "'");
    ids.push_back(*id);
  }
  if (ids.empty())
    ids = {ConditionId::t1_cond, ConditionId::t1_uncond, ConditionId::t2_cond, ConditionId::t2_uncond,
           ConditionId::t3_cond, ConditionId::t3_uncond, ConditionId::irrel};
  auto truth = load_model(o.truth);
  auto simple = load_model(o.simple);
  std::optional<std::vector<std::vector<std::string>>> cands;
  if (!o.candidates.empty()) {
    cands.emplace();
    for (const auto& c : o.candidates) {
      std::vector<std::string> set;
      for (auto& n : split(c, ','))
        if (!n.empty()) set.push_back(n);
      cands->push_back(set);
    }
  }
  json arr = json::array();
  Sink sink(o.out);
  auto& out = sink.out();
  if (o.format == "csv") {
    out << "condition,holds_graphically,witness,explanation";
    if (o.numeric) out << ",numeric_holds,numeric_max_gap,numeric_statement";
    out << "\n";
  }
  for (auto id : ids) {
    ConditionReport rep;
    try {
      rep = check_condition(truth, simple, id, cands);
    } catch (const DomainError& e) {
      // A condition that does not apply to this model pair (e.g. no summary).
      rep.id = id;
      rep.explanation = std::string("not applicable: ") + e.what();
    }
    std::optional<NumericVerdict> nv;
    if (o.numeric && rep.explanation.rfind("not applicable", 0) != 0) {
      std::vector<std::string> adjust = rep.witness;
      nv = verify_condition_numerically(truth, rep, adjust, o.tol);
    }
    if (o.format == "json") {
      json j = to_json(rep);
      if (nv) j["numeric"] = {{"holds", nv->holds}, {"max_gap", nv->max_gap}, {"statement", nv->what}};
      arr.push_back(j);
    } else {
      std::string w;
      for (std::size_t i = 0; i < rep.witness.size(); ++i) w += (i ? ";" : "") + rep.witness[i];
      out << to_string(rep.id) << "," << (rep.holds_graphically ? "true" : "false") << "," << csv_field(w) << ","
          << csv_field(rep.explanation);
      if (o.numeric) {
        if (nv) out << "," << (nv->holds ? "true" : "false") << "," << format_17(nv->max_gap) << "," << csv_field(nv->what);
        else out << ",,,";
      }
      out << "\n";
    }
  }
  if (o.format == "json") out << arr.dump(2) << "\n";
  sink.close();
  return exit_ok;
}

struct EstimateOptions {
  std::string model, estimand, x, x_star, adjust, stratum;
  bool adjust_given = false;
  double level = 1.0, level_star = 0.0;
  bool decompose = false;
  std::vector<std::string> gap_vs;
  std::string format = "csv", out;
};

int cmd_estimate(const EstimateOptions& o) {
  auto id = parse_estimand(o.estimand);
  if (!id) throw UsageError("unknown estimand '" + o.estimand + "'");
  std::vector<EstimandId> refs;
  for (const auto& g : o.gap_vs) {
    auto r = parse_estimand(g);
    if (!r) throw UsageError("unknown estimand '" + g + "'");
    refs.push_back(*r);
  }
  auto m = load_model(o.model);
  EstimandRequest req;
  req.id = *id;
  if (!o.x.empty()) req.x = parse_profile(o.x);
  if (!o.x_star.empty()) req.x_star = parse_profile(o.x_star);
  if (o.adjust_given) {
    std::vector<std::string> names;
    for (auto& n : split(o.adjust, ','))
      if (!n.empty()) names.push_back(n);
    req.adjust = names;
  }
  req.stratum = o.stratum;
  req.level = o.level;
  req.level_star = o.level_star;
  EstimandReport rep = compute(m, req);
  for (auto r : refs) {
    EstimandRequest rr = req;
    rr.id = r;
    rep.gaps[std::string(to_string(r))] = rep.value - compute(m, rr).value;
  }
  if (!o.decompose) rep.decomposition.clear();
  Sink sink(o.out);
  auto& out = sink.out();
  if (o.format == "json") {
    json j = to_json(rep);
    if (!o.decompose) j.erase("decomposition");
    out << j.dump(2) << "\n";
  } else {
    out << "estimand,value";
    for (const auto& [k, v] : rep.gaps) out << ",gap_vs_" << k;
    out << "\n" << to_string(rep.id) << "," << format_17(rep.value);
    for (const auto& [k, v] : rep.gaps) out << "," << format_17(v);
    out << "\n";
    if (o.decompose) {
      out << "\nx_profile,x_star_profile,stratum,pair_ate,weight\n";
      for (const auto& t : rep.decomposition)
        out << t.x_profile << "," << t.x_star_profile << "," << csv_field(t.stratum.value_or("")) << ","
            << format_17(t.pair_ate) << "," << format_17(t.weight) << "\n";
    }
  }
  sink.close();
  return exit_ok;
}

struct SweepOptions {
  ScenarioFlags scen;
  std::string alphas, rhos, mu_ws, grid, out = ".";
  unsigned jobs = 0;
};

int cmd_sweep(const SweepOptions& o) {
  SweepGrid g = SweepGrid::default_grid();
  if (!o.grid.empty()) g = read_grid(o.grid);
  if (!o.alphas.empty()) g.alphas = parse_list(o.alphas);
  if (!o.rhos.empty()) g.rhos = parse_list(o.rhos);
  if (!o.mu_ws.empty()) g.mu_ws = parse_list(o.mu_ws);
  if (g.alphas.empty() || g.rhos.empty() || g.mu_ws.empty()) throw UsageError("sweep grid lists must be non-empty");
  const unsigned jobs = o.jobs ? o.jobs : default_jobs();
  std::size_t last_pct = 0;
  auto progress = [&](std::size_t done, std::size_t total) {
    std::size_t pct = done * 100 / total;
    if (pct >= last_pct + 10 || done == total) {
      last_pct = pct;
      std::cerr << "sweep: " << done << "/" << total << " cells\n";
    }
  };
  auto rows = sweep_figure2(g, o.scen.params, jobs, o.scen.closed_form_w1, progress, o.scen.tol);
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.ok) {
      ++failed;
      std::cerr << "sweep: cell (mu_w=" << format_exact(r.mu_w) << ", rho=" << format_exact(r.rho)
                << ", alpha=" << format_exact(r.alpha) << ") failed: " << r.error << "\n";
    }
  {
    Sink a(o.out + "/figure2.csv");
    write_figure2_csv(a.out(), rows);
    a.close();
    Sink b(o.out + "/figure2_pairs.csv");
    write_figure2_pairs_csv(b.out(), rows);
    b.close();
  }
  std::cerr << "sweep: wrote " << rows.size() << " rows to " << o.out << "/figure2.csv\n";
  return failed == rows.size() ? exit_domain : exit_ok;
}

int cmd_mc_validate(const std::string& path, std::uint64_t n, std::uint64_t seed, const std::string& format,
                    const std::string& outp) {
  if (n < 1000) throw UsageError("--n must be at least 1000");
  auto m = load_model(path);
  auto rep = mc_validate(m, n, seed);
  Sink sink(outp);
  auto& out = sink.out();
  if (format == "json") {
    out << to_json(rep).dump(2) << "\n";
  } else {
    out << "check,exact,estimate,se,z,result\n";
    for (const auto& c : rep.estimands)
      out << csv_field(c.name) << "," << format_17(c.exact) << "," << format_17(c.estimate) << "," << format_17(c.se)
          << "," << format_17(c.z()) << "," << (c.pass ? "PASS" : "FAIL") << "\n";
    out << "states," << rep.states_checked << " checked," << rep.states_outside_k << " beyond "
        << format_exact(rep.k_se) << " SE,max |z| " << format_17(rep.max_state_z) << ",family-wise limit "
        << format_17(rep.k_state) << "," << (rep.states_pass() ? "PASS" : "FAIL") << "\n";
    for (const auto& c : rep.state_failures)
      out << csv_field(c.name) << "," << format_17(c.exact) << "," << format_17(c.estimate) << ","
          << format_17(c.se) << "," << format_17(c.z()) << ",FAIL\n";
    out << (rep.passed() ? "PASS" : "FAIL") << "\n";
  }
  sink.close();
  return rep.passed() ? exit_ok : exit_domain;
}

int cmd_joint(const std::string& path, const std::string& intervention, std::uint64_t mc_n, std::uint64_t seed,
              const std::string& outp) {
  auto m = load_model(path);
  Event ev = Event::parse(m, intervention);
  JointTable j = mc_n ? monte_carlo_joint(m, mc_n, seed, ev) : do_joint(m, ev);
  Sink sink(outp);
  auto& out = sink.out();
  out << "# bit order:";
  for (NodeId v : m.binary_nodes()) out << " " << m.name(v);
  out << "\n";
  write_joint_csv(out, j);
  sink.close();
  return exit_ok;
}

int cmd_scenario(const ScenarioFlags& f, const std::string& outp) {
  ScenarioParams p = f.params;
  p.alpha = f.alpha;
  p.rho = f.rho;
  p.mu_w = f.mu_w;
  auto c = calibrate_intercepts(p, f.tol, f.closed_form_w1);
  Sink sink(outp);
  sink.out() << serialize_model(build_scenario(p, c));
  sink.close();
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact inference for longitudinal causal models"};
  app.require_subcommand(1);
  std::string format = "csv", out;
  auto add_format = [&](CLI::App* c) {
    c->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    c->add_option("--out", out, "output file (default: standard output)");
  };

  std::string model_path;
  auto* validate = app.add_subcommand("validate", "parse and check a model file");
  validate->add_option("model", model_path, "model file (.scm.txt)")->required();

  CheckOptions chk;
  auto* check = app.add_subcommand("check", "graphical condition checks for a (true, simplified) model pair");
  check->add_option("true_model", chk.truth)->required();
  check->add_option("simplified_model", chk.simple)->required();
  check->add_option("--condition", chk.conditions, "T1.Cond, T1.Uncond, T2.Cond, T2.Uncond, T3.Cond, T3.Uncond, Irrel");
  check->add_option("--candidate", chk.candidates, "candidate adjustment set, comma separated (repeatable)");
  check->add_flag("--numeric", chk.numeric, "verify the true-model side on the twin network");
  check->add_option("--tol", chk.tol, "numerical tolerance");
  add_format(check);

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "compute an estimand");
  estimate->add_option("model", est.model)->required();
  estimate->add_option("--estimand", est.estimand, "estimand id, e.g. WAVG_EQ5")->required();
  estimate->add_option("--x", est.x, "exposure profile, oldest first");
  estimate->add_option("--x-star", est.x_star, "reference exposure profile");
  auto* adj = estimate->add_option("--adjust", est.adjust, "adjustment set, comma separated (may be empty)");
  estimate->add_option("--stratum", est.stratum, "stratum event, e.g. \"W[1]=1\"");
  estimate->add_option("--level", est.level, "summary level x");
  estimate->add_option("--level-star", est.level_star, "summary level x*");
  estimate->add_flag("--decompose", est.decompose, "include the pair decomposition");
  estimate->add_option("--gap-vs", est.gap_vs, "reference estimand for a gap (repeatable)");
  add_format(estimate);

  SweepOptions sw;
  auto* sweep = app.add_subcommand("sweep", "run the parameter sweep and write figure2.csv / figure2_pairs.csv");
  sw.scen.attach(sweep, false);
  sweep->add_option("--alpha", sw.alphas, "comma separated alpha values");
  sweep->add_option("--rho", sw.rhos, "comma separated rho values");
  sweep->add_option("--mu-w", sw.mu_ws, "comma separated muW values");
  sweep->add_option("--grid", sw.grid, "grid file with alpha/rho/mu_w lines");
  sweep->add_option("--out", sw.out, "output directory");
  sweep->add_option("--jobs", sw.jobs, "worker threads (default: CEL_THREADS or hardware)")->check(CLI::PositiveNumber);

  std::uint64_t mc_n = 1000000, seed = 42;
  auto* mcv = app.add_subcommand("mc-validate", "compare exact results with Monte Carlo sampling");
  mcv->add_option("model", model_path)->required();
  mcv->add_option("--n", mc_n, "sample size (>= 1000)");
  mcv->add_option("--seed", seed, "PRNG seed");
  add_format(mcv);

  std::string intervention;
  std::uint64_t joint_mc = 0;
  auto* joint = app.add_subcommand("joint", "export the (interventional) joint table as CSV");
  joint->add_option("model", model_path)->required();
  joint->add_option("--do", intervention, "intervention, e.g. \"X[1]=1, X[2]=0\"");
  joint->add_option("--mc", joint_mc, "sample n draws instead of enumerating");
  joint->add_option("--seed", seed, "PRNG seed for --mc");
  joint->add_option("--out", out, "output file");

  ScenarioFlags scen;
  auto* scenario = app.add_subcommand("scenario", "write the calibrated confounder-feedback model as a model file");
  scen.attach(scenario, true);
  scenario->add_option("--out", out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }
  est.adjust_given = adj->count() > 0;

  try {
    if (*validate) return cmd_validate(model_path);
    if (*check) {
      chk.format = format;
      chk.out = out;
      return cmd_check(chk);
    }
    if (*estimate) {
      est.format = format;
      est.out = out;
      return cmd_estimate(est);
    }
    if (*sweep) return cmd_sweep(sw);
    if (*mcv) return cmd_mc_validate(model_path, mc_n, seed, format, out);
    if (*joint) return cmd_joint(model_path, intervention, joint_mc, seed, out);
    if (*scenario) return cmd_scenario(scen, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return exit_io;
  } catch (const PositivityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_positivity;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_domain;
  }
  return exit_usage;
}
