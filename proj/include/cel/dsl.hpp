#ifndef CEL_DSL_HPP
#define CEL_DSL_HPP

// Text format for longitudinal SCMs (.scm.txt). One declaration per line:
//
//   t0 = 2
//   confounder W[1] = const(0.1)
//   exposure   X[1] = logistic(-2.2, 0.5*W[1])
//   exposure   X[2] = persist_or(logistic(-2.2, 0.5*W[1]))
//   summary    Xs   = threshold_sum(X[1], X[2], 2)
//   outcome    Y    = 1 + 1*Xs - 0.5*W[1] + noise(1)
//
// Time indices are written as a bracket suffix, `X[3]`. Role tags are
// exposure, confounder, mediator and variable. Reals are unsigned decimal or
// hex-float literals with an optional leading sign. `#` starts a comment.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cel/model.hpp"
#include "cel/numeric.hpp"

namespace cel {

namespace detail {

struct Token {
  enum class Kind { ident, number, punct, end };
  Kind kind = Kind::end;
  std::string text;
  int column = 0;
};

class LineLexer {
 public:
  LineLexer(std::string_view line, int line_no) : line_(line), line_no_(line_no) {}

  // Tokenizes the whole line; returns false and fills `err` on a bad character.
  bool run(std::vector<Token>& out, Diagnostic& err) {
    std::size_t i = 0;
    while (i < line_.size()) {
      const unsigned char c = static_cast<unsigned char>(line_[i]);
      if (c == '#') break;
      if (c == ' ' || c == '\t' || c == '\r') { ++i; continue; }
      const int col = static_cast<int>(i) + 1;
      if (std::isalpha(c) || c == '_') {
        std::size_t j = i;
        while (j < line_.size() && (std::isalnum(static_cast<unsigned char>(line_[j])) || line_[j] == '_')) ++j;
        out.push_back({Token::Kind::ident, std::string(line_.substr(i, j - i)), col});
        i = j;
      } else if (std::isdigit(c) || c == '.') {
        std::size_t j = scan_number(i);
        if (j < line_.size() && (std::isalnum(static_cast<unsigned char>(line_[j])) || line_[j] == '_' || line_[j] == '.')) {
          err = {Diagnostic::Severity::error, "malformed number", line_no_, col};
          return false;
        }
        out.push_back({Token::Kind::number, std::string(line_.substr(i, j - i)), col});
        i = j;
      } else if (std::string_view("()[],*=+-").find(static_cast<char>(c)) != std::string_view::npos) {
        out.push_back({Token::Kind::punct, std::string(1, static_cast<char>(c)), col});
        ++i;
      } else {
        err = {Diagnostic::Severity::error, "unexpected character", line_no_, col};
        return false;
      }
    }
    out.push_back({Token::Kind::end, "", static_cast<int>(line_.size()) + 1});
    return true;
  }

 private:
  std::size_t scan_number(std::size_t i) const {
    auto digit = [&](std::size_t k, bool hex) {
      if (k >= line_.size()) return false;
      unsigned char ch = static_cast<unsigned char>(line_[k]);
      return hex ? std::isxdigit(ch) != 0 : std::isdigit(ch) != 0;
    };
    std::size_t j = i;
    bool hex = false;
    if (j + 1 < line_.size() && line_[j] == '0' && (line_[j + 1] == 'x' || line_[j + 1] == 'X')) {
      hex = true;
      j += 2;
    }
    while (digit(j, hex)) ++j;
    if (j < line_.size() && line_[j] == '.') {
      ++j;
      while (digit(j, hex)) ++j;
    }
    const char e1 = hex ? 'p' : 'e', e2 = hex ? 'P' : 'E';
    if (j < line_.size() && (line_[j] == e1 || line_[j] == e2)) {
      std::size_t k = j + 1;
      if (k < line_.size() && (line_[k] == '+' || line_[k] == '-')) ++k;
      if (digit(k, false)) {
        j = k;
        while (digit(j, false)) ++j;
      }
    }
    return j;
  }

  std::string_view line_;
  int line_no_;
};

class ParseFailure {
 public:
  ParseFailure(std::string msg, int column) : msg(std::move(msg)), column(column) {}
  std::string msg;
  int column;
};

// Recursive-descent parser over the tokens of one line.
class LineParser {
 public:
  LineParser(std::vector<Token> toks, int line_no) : toks_(std::move(toks)), line_no_(line_no) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_end() const { return peek().kind == Token::Kind::end; }

  bool accept(std::string_view punct) {
    if (peek().kind == Token::Kind::punct && peek().text == punct) { ++pos_; return true; }
    return false;
  }

  void expect(std::string_view punct) {
    if (!accept(punct)) fail("expected '" + std::string(punct) + "'" + found());
  }

  [[noreturn]] void fail(std::string msg) const { throw ParseFailure(std::move(msg), peek().column); }

  std::string found() const {
    if (at_end()) return " at end of line";
    return " but found '" + peek().text + "'";
  }

  std::string ident(std::string_view what) {
    if (peek().kind != Token::Kind::ident) fail("expected " + std::string(what) + found());
    return next().text;
  }

  double unsigned_real() {
    if (peek().kind != Token::Kind::number) fail("expected a number" + found());
    const Token& t = next();
    auto v = parse_real(t.text);
    if (!v) throw ParseFailure("invalid or non-finite number '" + t.text + "'", t.column);
    return *v;
  }

  double signed_real() {
    double sign = 1.0;
    if (accept("-")) sign = -1.0;
    else accept("+");
    return sign * unsigned_real();
  }

  int integer(std::string_view what) {
    if (peek().kind != Token::Kind::number) fail("expected " + std::string(what) + found());
    const Token& t = next();
    int v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
      throw ParseFailure("expected an integer " + std::string(what) + ", found '" + t.text + "'", t.column);
    return v;
  }

  // NAME or NAME[int]; records the location of the reference.
  std::string reference(std::vector<SourceLocation>* locs) {
    const int col = peek().column;
    std::string base = ident("a variable name");
    if (reserved_word(base)) throw ParseFailure("'" + base + "' is a reserved word", col);
    std::optional<int> time;
    if (accept("[")) {
      time = integer("time index");
      expect("]");
    }
    if (locs) locs->push_back({line_no_, col});
    return display_name(base, time);
  }

  // coef*Ref, or a bare Ref meaning coefficient 1. `sign` is applied to coef.
  BasicTerm<std::string> term(double sign, std::vector<SourceLocation>* locs) {
    if (peek().kind == Token::Kind::number) {
      double c = unsigned_real();
      expect("*");
      return {reference(locs), sign * c};
    }
    return {reference(locs), sign};
  }

  BasicLogistic<std::string> logistic_body(std::vector<SourceLocation>* locs) {
    expect("(");
    BasicLogistic<std::string> l;
    l.intercept = signed_real();
    while (accept(",")) {
      double sign = 1.0;
      if (accept("-")) sign = -1.0;
      else accept("+");
      l.terms.push_back(term(sign, locs));
    }
    expect(")");
    return l;
  }

  int line() const { return line_no_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_no_;
};

inline std::optional<Role> role_keyword(std::string_view s) {
  if (s == "exposure") return Role::exposure;
  if (s == "confounder") return Role::confounder;
  if (s == "mediator") return Role::mediator;
  if (s == "variable") return Role::none;
  return std::nullopt;
}

inline void parse_declaration(LineParser& p, ModelSpec& spec, int line_no) {
  const Token head = p.peek();
  if (head.kind != Token::Kind::ident) p.fail("expected a declaration" + p.found());
  const std::string kw = p.ident("a declaration keyword");

  if (kw == "t0") {
    p.expect("=");
    int col = p.peek().column;
    int t0 = p.integer("horizon");
    if (spec.t0) throw ParseFailure("horizon declared twice", head.column);
    spec.t0 = t0;
    spec.t0_where = {line_no, col};
    return;
  }

  NodeSpec node;
  node.where = {line_no, p.peek().column};
  if (auto role = role_keyword(kw)) {
    node.role = *role;
    node.base = p.ident("a node name");
    if (reserved_word(node.base)) throw ParseFailure("'" + node.base + "' is a reserved word", node.where.column);
    if (p.accept("[")) {
      node.time = p.integer("time index");
      p.expect("]");
    }
    p.expect("=");
    const int mcol = p.peek().column;
    std::string mech = p.ident("a mechanism");
    if (mech == "logistic") {
      node.mechanism = p.logistic_body(&node.ref_locations);
    } else if (mech == "persist_or") {
      p.expect("(");
      if (p.ident("'logistic'") != "logistic") throw ParseFailure("persist_or expects a logistic(...) argument", mcol);
      BasicPersistOr<std::string> po;
      po.base = p.logistic_body(&node.ref_locations);
      p.expect(")");
      node.mechanism = po;
    } else if (mech == "const") {
      p.expect("(");
      node.mechanism = ConstantProb{p.signed_real()};
      p.expect(")");
    } else {
      throw ParseFailure("unknown mechanism '" + mech + "'", mcol);
    }
  } else if (kw == "summary") {
    node.base = p.ident("a node name");
    if (reserved_word(node.base)) throw ParseFailure("'" + node.base + "' is a reserved word", node.where.column);
    if (p.peek().kind == Token::Kind::punct && p.peek().text == "[")
      p.fail("summary nodes carry no time index");
    p.expect("=");
    const int mcol = p.peek().column;
    std::string mech = p.ident("a summary function");
    p.expect("(");
    if (mech == "threshold_sum") {
      BasicThresholdSum<std::string> s;
      for (;;) {
        if (p.peek().kind == Token::Kind::number || (p.peek().kind == Token::Kind::punct && p.peek().text == "-")) {
          s.tau = p.signed_real();
          break;
        }
        s.inputs.push_back(p.reference(&node.ref_locations));
        p.expect(",");
      }
      node.mechanism = s;
    } else if (mech == "sum") {
      BasicSumOf<std::string> s;
      do s.inputs.push_back(p.reference(&node.ref_locations));
      while (p.accept(","));
      node.mechanism = s;
    } else if (mech == "copy") {
      node.mechanism = BasicCopyOf<std::string>{p.reference(&node.ref_locations)};
    } else {
      throw ParseFailure("unknown summary function '" + mech + "'", mcol);
    }
    p.expect(")");
  } else if (kw == "outcome") {
    node.base = p.ident("a node name");
    if (reserved_word(node.base)) throw ParseFailure("'" + node.base + "' is a reserved word", node.where.column);
    if (p.peek().kind == Token::Kind::punct && p.peek().text == "[")
      p.fail("the outcome carries no time index");
    p.expect("=");
    BasicLinearOutcome<std::string> o;
    o.mu0 = p.signed_real();
    bool noise_seen = false;
    while (!p.at_end()) {
      double sign = 1.0;
      if (p.accept("-")) sign = -1.0;
      else p.expect("+");
      if (p.peek().kind == Token::Kind::ident && p.peek().text == "noise") {
        const int ncol = p.peek().column;
        p.next();
        if (sign < 0) throw ParseFailure("noise term must be added, not subtracted", ncol);
        if (noise_seen) throw ParseFailure("noise declared twice", ncol);
        p.expect("(");
        o.sigma = p.unsigned_real();
        p.expect(")");
        noise_seen = true;
        continue;
      }
      o.terms.push_back(p.term(sign, &node.ref_locations));
    }
    node.mechanism = o;
  } else {
    throw ParseFailure("unknown declaration '" + kw + "'", head.column);
  }
  if (!p.at_end()) p.fail("unexpected trailing input" + p.found());
  spec.nodes.push_back(std::move(node));
}

}  // namespace detail

/// Parses model text into a spec without structural validation. Syntax
/// errors are reported per line; parsing continues on the next line.
inline std::vector<Diagnostic> parse_spec(std::string_view text, ModelSpec& spec) {
  std::vector<Diagnostic> diags;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    std::vector<detail::Token> toks;
    Diagnostic err;
    detail::LineLexer lexer(line, line_no);
    if (!lexer.run(toks, err)) {
      diags.push_back(err);
    } else if (toks.size() > 1) {
      detail::LineParser p(std::move(toks), line_no);
      try {
        detail::parse_declaration(p, spec, line_no);
      } catch (const detail::ParseFailure& f) {
        diags.push_back({Diagnostic::Severity::error, f.msg, line_no, f.column});
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return diags;
}

/// Parses and validates. Either `model` is set, or at least one error
/// diagnostic carries a line and column.
inline BuildResult parse_model(std::string_view text) {
  ModelSpec spec;
  BuildResult result;
  result.diagnostics = parse_spec(text, spec);
  if (has_errors(result.diagnostics)) return result;
  auto built = build_model(spec);
  result.model = std::move(built.model);
  result.diagnostics.insert(result.diagnostics.end(), built.diagnostics.begin(), built.diagnostics.end());
  return result;
}

/// Parses or throws DomainError with the first error, formatted line:col.
inline ScmModel parse_model_or_throw(std::string_view text) {
  auto r = parse_model(text);
  if (!r.model) {
    for (const auto& d : r.diagnostics)
      if (d.is_error()) throw DomainError(to_string(d));
  }
  return *r.model;
}

namespace detail {

inline std::string signed_term(double coef, const std::string& ref, bool first) {
  std::string s;
  if (std::signbit(coef)) s = first ? "-" : " - ";
  else s = first ? "" : " + ";
  return s + format_exact(std::fabs(coef)) + "*" + ref;
}

inline std::string logistic_text(const ScmModel& m, const Logistic& l) {
  std::string s = "logistic(" + format_exact(l.intercept);
  for (const auto& t : l.terms) {
    s += ", ";
    s += signed_term(t.coef, m.name(t.parent), true);
  }
  return s + ")";
}

}  // namespace detail

/// Writes `m` in the text format. Reals use the shortest decimal that reads
/// back to the same double, so parse(serialize(m)) is bit-exact.
inline std::string serialize_model(const ScmModel& m) {
  std::ostringstream out;
  out << "t0 = " << m.horizon() << "\n";
  for (NodeId id : m.dag().all_nodes()) {
    const Mechanism& mech = m.mechanism(id);
    const std::string& name = m.name(id);
    std::visit(
        [&](const auto& mm) {
          using T = std::decay_t<decltype(mm)>;
          if constexpr (std::is_same_v<T, Logistic>) {
            out << to_string(m.role(id)) << " " << name << " = " << detail::logistic_text(m, mm);
          } else if constexpr (std::is_same_v<T, PersistOr>) {
            out << to_string(m.role(id)) << " " << name << " = persist_or("
                << detail::logistic_text(m, mm.base) << ")";
          } else if constexpr (std::is_same_v<T, ConstantProb>) {
            out << to_string(m.role(id)) << " " << name << " = const(" << format_exact(mm.p) << ")";
          } else if constexpr (std::is_same_v<T, ThresholdSum>) {
            out << "summary " << name << " = threshold_sum(";
            for (NodeId in : mm.inputs) out << m.name(in) << ", ";
            out << format_exact(mm.tau) << ")";
          } else if constexpr (std::is_same_v<T, SumOf>) {
            out << "summary " << name << " = sum(";
            for (std::size_t i = 0; i < mm.inputs.size(); ++i) out << (i ? ", " : "") << m.name(mm.inputs[i]);
            out << ")";
          } else if constexpr (std::is_same_v<T, CopyOf>) {
            out << "summary " << name << " = copy(" << m.name(mm.input) << ")";
          } else if constexpr (std::is_same_v<T, LinearOutcome>) {
            out << "outcome " << name << " = " << format_exact(mm.mu0);
            for (const auto& t : mm.terms) out << detail::signed_term(t.coef, m.name(t.parent), false);
            if (mm.sigma != 0.0) out << " + noise(" << format_exact(mm.sigma) << ")";
          }
        },
        mech);
    out << "\n";
  }
  return out.str();
}

/// Same node names, kinds, roles, times, edges and mechanism parameters
/// (compared bit for bit), and the same horizon.
inline bool isomorphic(const ScmModel& a, const ScmModel& b) {
  if (a.horizon() != b.horizon() || a.size() != b.size()) return false;
  for (NodeId ia : a.dag().all_nodes()) {
    auto ib = b.find(a.name(ia));
    if (!ib) return false;
    if (a.kind(ia) != b.kind(*ib) || a.role(ia) != b.role(*ib) || a.time(ia) != b.time(*ib)) return false;
    std::vector<std::string> pa, pb;
    for (NodeId p : a.parents(ia)) pa.push_back(a.name(p));
    for (NodeId p : b.parents(*ib)) pb.push_back(b.name(p));
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    if (pa != pb) return false;
    // Mechanisms refer to nodes by id; compare through names.
    const auto& ma = a.mechanism(ia);
    const auto& mb = b.mechanism(*ib);
    if (ma.index() != mb.index()) return false;
    bool same = std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          const T& y = std::get<T>(mb);
          auto same_terms = [&](const std::vector<Term>& u, const std::vector<Term>& v) {
            if (u.size() != v.size()) return false;
            for (std::size_t i = 0; i < u.size(); ++i)
              if (a.name(u[i].parent) != b.name(v[i].parent) ||
                  std::bit_cast<std::uint64_t>(u[i].coef) != std::bit_cast<std::uint64_t>(v[i].coef))
                return false;
            return true;
          };
          auto same_real = [](double u, double v) {
            return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v);
          };
          auto same_refs = [&](const std::vector<NodeId>& u, const std::vector<NodeId>& v) {
            if (u.size() != v.size()) return false;
            for (std::size_t i = 0; i < u.size(); ++i)
              if (a.name(u[i]) != b.name(v[i])) return false;
            return true;
          };
          if constexpr (std::is_same_v<T, Logistic>) {
            return same_real(x.intercept, y.intercept) && same_terms(x.terms, y.terms);
          } else if constexpr (std::is_same_v<T, PersistOr>) {
            return same_real(x.base.intercept, y.base.intercept) && same_terms(x.base.terms, y.base.terms) &&
                   a.name(x.previous) == b.name(y.previous);
          } else if constexpr (std::is_same_v<T, ConstantProb>) {
            return same_real(x.p, y.p);
          } else if constexpr (std::is_same_v<T, ThresholdSum>) {
            return same_refs(x.inputs, y.inputs) && same_real(x.tau, y.tau);
          } else if constexpr (std::is_same_v<T, SumOf>) {
            return same_refs(x.inputs, y.inputs);
          } else if constexpr (std::is_same_v<T, CopyOf>) {
            return a.name(x.input) == b.name(y.input);
          } else {
            return same_real(x.mu0, y.mu0) && same_real(x.sigma, y.sigma) && same_terms(x.terms, y.terms);
          }
        },
        ma);
    if (!same) return false;
  }
  return true;
}

}  // namespace cel

#endif  // CEL_DSL_HPP
