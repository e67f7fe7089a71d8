#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qgtree/error.hpp"
#include "qgtree/potential.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

/// A tree together with its per-edge potentials (missing ones are zero).
struct TreeProblem {
  MetricTree tree;
  PotentialVector potentials;
};

namespace detail {

struct RawPotential {
  std::string kind;
  std::vector<double> args;
  int line = 0;
};

struct RawDocument {
  std::optional<VertexId> root;
  std::vector<Edge> edges;
  std::map<EdgeId, RawPotential> potentials;
};

inline Error parse_error(int line, const std::string& what) {
  return Error(Errc::parse, (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + what);
}

inline long double parse_plain(const std::string& s, int line) {
  std::size_t pos = 0;
  long double v = 0.0L;
  try {
    v = std::stold(s, &pos);
  } catch (const std::exception&) {
    throw parse_error(line, "bad number '" + s + "'");
  }
  if (pos != s.size()) throw parse_error(line, "bad number '" + s + "'");
  return v;
}

/// p or p/q with decimal p, q.
inline long double parse_rational(const std::string& s, int line) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_plain(s, line);
  const long double den = parse_plain(s.substr(slash + 1), line);
  if (den == 0.0L) throw parse_error(line, "zero denominator in '" + s + "'");
  return parse_plain(s.substr(0, slash), line) / den;
}

inline std::optional<long double> symbol_value(const std::string& s) {
  if (s == "sqrt2") return std::numbers::sqrt2_v<long double>;
  if (s == "sqrt3") return std::numbers::sqrt3_v<long double>;
  if (s == "pi") return std::numbers::pi_v<long double>;
  return std::nullopt;
}

}  // namespace detail

/// Length literal: decimal, p/q, or one of sqrt2, sqrt3, pi optionally
/// scaled as r*sym, sym/q or r*sym/q. Evaluated in long double.
inline long double parse_length(const std::string& token, int line = 0) {
  if (token.empty()) throw detail::parse_error(line, "empty length");
  for (const char* sym : {"sqrt2", "sqrt3", "pi"}) {
    const auto at = token.find(sym);
    if (at == std::string::npos) continue;
    const std::string s(sym);
    long double scale = 1.0L;
    if (at > 0) {
      if (token[at - 1] != '*') throw detail::parse_error(line, "expected '*' before " + s);
      scale = detail::parse_rational(token.substr(0, at - 1), line);
    }
    const std::string rest = token.substr(at + s.size());
    if (!rest.empty()) {
      if (rest[0] != '/') throw detail::parse_error(line, "unexpected '" + rest + "' after " + s);
      const long double den = detail::parse_plain(rest.substr(1), line);
      if (den == 0.0L) throw detail::parse_error(line, "zero denominator");
      scale /= den;
    }
    return scale * *detail::symbol_value(s);
  }
  return detail::parse_rational(token, line);
}

namespace detail {

inline void check_dense(const RawDocument& doc) {
  std::set<EdgeId> eids;
  std::set<VertexId> vids;
  for (const Edge& e : doc.edges) {
    if (!eids.insert(e.id).second) throw Error(Errc::duplicate_edge, std::to_string(e.id));
    vids.insert(e.child);
    vids.insert(e.parent);
  }
  if (!eids.empty() && (*eids.begin() != 0 || *eids.rbegin() != static_cast<EdgeId>(eids.size()) - 1))
    throw parse_error(0, "edge ids must be 0..I-1");
  if (!vids.empty() && (*vids.begin() != 0 || *vids.rbegin() != static_cast<VertexId>(vids.size()) - 1))
    throw parse_error(0, "vertex ids must be 0..V-1");
}

inline EdgePotential make_potential(const RawPotential& p, double length) {
  const auto& a = p.args;
  try {
    if (p.kind == "zero") {
      if (!a.empty()) throw parse_error(p.line, "zero takes no arguments");
      return EdgePotential::zero(length);
    }
    if (p.kind == "constant") {
      if (a.size() != 1) throw parse_error(p.line, "constant takes one value");
      return EdgePotential::constant(a[0], length);
    }
    if (p.kind == "poly") {
      if (a.empty()) throw parse_error(p.line, "poly needs coefficients");
      return EdgePotential::polynomial(a, length);
    }
    if (p.kind == "samples") {
      if (a.size() < 4 || a.size() % 2) throw parse_error(p.line, "samples needs x v pairs (at least two)");
      std::vector<double> xs, vs;
      for (std::size_t i = 0; i < a.size(); i += 2) {
        xs.push_back(a[i]);
        vs.push_back(a[i + 1]);
      }
      return EdgePotential::sampled(std::move(xs), std::move(vs), length);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::parse) throw;
    throw parse_error(p.line, e.what());
  }
  throw parse_error(p.line, "unknown potential kind '" + p.kind + "'");
}

/// Builds the tree; potentials are given in the file's child->parent
/// coordinates and are reversed on edges whose orientation the root forces to flip.
inline TreeProblem finish(RawDocument doc) {
  if (!doc.root) throw parse_error(0, "missing root line");
  if (doc.edges.empty()) throw parse_error(0, "no edges");
  check_dense(doc);
  std::map<EdgeId, Edge> declared;
  for (const Edge& e : doc.edges) declared[e.id] = e;
  for (const auto& [id, p] : doc.potentials)
    if (!declared.count(id)) throw Error(Errc::unknown_edge, "potential for edge " + std::to_string(id));

  TreeProblem out{MetricTree::build(doc.edges, *doc.root), {}};
  for (const Edge& e : out.tree.edges()) {
    auto it = doc.potentials.find(e.id);
    EdgePotential p = it == doc.potentials.end() ? EdgePotential::zero(e.length) : make_potential(it->second, e.length);
    if (declared[e.id].child != e.child) p = p.reversed();
    out.potentials.set(e.id, std::move(p));
  }
  return out;
}

inline int parse_int(const std::string& s, int line) {
  const long double v = parse_plain(s, line);
  if (v != std::floor(v) || v < 0 || v > 1e9) throw parse_error(line, "expected a nonnegative integer, got '" + s + "'");
  return static_cast<int>(v);
}

inline Edge make_edge(int id, int child, int parent, long double len) {
  return Edge{id, child, parent, static_cast<double>(len), len};
}

}  // namespace detail

/// Line format:
///   root <v>
///   edge <id> <child> <parent> <length>
///   potential <id> zero | constant <c> | poly <c0> <c1> ... | samples <x0> <v0> <x1> <v1> ...
/// '#' starts a comment.
inline TreeProblem parse_tree_text(const std::string& text) {
  detail::RawDocument doc;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "root") {
      if (tok.size() != 2) throw detail::parse_error(line, "root takes one vertex id");
      if (doc.root) throw detail::parse_error(line, "duplicate root line");
      doc.root = detail::parse_int(tok[1], line);
    } else if (tok[0] == "edge") {
      if (tok.size() != 5) throw detail::parse_error(line, "edge <id> <child> <parent> <length>");
      doc.edges.push_back(detail::make_edge(detail::parse_int(tok[1], line), detail::parse_int(tok[2], line),
                                            detail::parse_int(tok[3], line), parse_length(tok[4], line)));
    } else if (tok[0] == "potential") {
      if (tok.size() < 3) throw detail::parse_error(line, "potential <id> <kind> ...");
      detail::RawPotential p{tok[2], {}, line};
      for (std::size_t i = 3; i < tok.size(); ++i) p.args.push_back(static_cast<double>(detail::parse_plain(tok[i], line)));
      const int id = detail::parse_int(tok[1], line);
      if (!doc.potentials.emplace(id, std::move(p)).second)
        throw detail::parse_error(line, "duplicate potential for edge " + tok[1]);
    } else {
      throw detail::parse_error(line, "unknown directive '" + tok[0] + "'");
    }
  }
  return detail::finish(std::move(doc));
}

/// Structured form:
///   {"root": 0,
///    "edges": [{"id": 0, "child": 1, "parent": 0, "length": "sqrt2"}, ...],
///    "potentials": [{"edge": 0, "kind": "poly", "coefficients": [0, 1]},
///                   {"edge": 1, "kind": "samples", "x": [...], "values": [...]},
///                   {"edge": 2, "kind": "constant", "value": 3}]}
inline TreeProblem parse_tree_json(const nlohmann::json& j) {
  detail::RawDocument doc;
  try {
    doc.root = j.at("root").get<int>();
    for (const auto& e : j.at("edges")) {
      const auto& len = e.at("length");
      const long double a = len.is_string() ? parse_length(len.get<std::string>()) : len.get<long double>();
      doc.edges.push_back(detail::make_edge(e.at("id").get<int>(), e.at("child").get<int>(), e.at("parent").get<int>(), a));
    }
    if (j.contains("potentials")) {
      for (const auto& p : j.at("potentials")) {
        detail::RawPotential r{p.at("kind").get<std::string>(), {}, 0};
        if (r.kind == "constant") {
          r.args = {p.at("value").get<double>()};
        } else if (r.kind == "poly") {
          r.args = p.at("coefficients").get<std::vector<double>>();
        } else if (r.kind == "samples") {
          const auto xs = p.at("x").get<std::vector<double>>();
          const auto vs = p.at("values").get<std::vector<double>>();
          if (xs.size() != vs.size()) throw Error(Errc::parse, "samples: x and values differ in length");
          for (std::size_t i = 0; i < xs.size(); ++i) {
            r.args.push_back(xs[i]);
            r.args.push_back(vs[i]);
          }
        }
        const int id = p.at("edge").get<int>();
        if (!doc.potentials.emplace(id, std::move(r)).second)
          throw Error(Errc::parse, "duplicate potential for edge " + std::to_string(id));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, e.what());
  }
  return detail::finish(std::move(doc));
}

/// Dispatches on the first non-blank character: '{' means structured.
inline TreeProblem parse_tree(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, e.what());
    }
    return parse_tree_json(j);
  }
  return parse_tree_text(text);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::invalid_argument, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline TreeProblem load_tree(const std::string& path) { return parse_tree(read_file(path)); }

/// The tree inside a CLI config: "tree" is either the line format as a
/// string or the structured object.
inline TreeProblem tree_from_config(const nlohmann::json& config) {
  if (!config.contains("tree")) throw Error(Errc::parse, "config has no 'tree' entry");
  const auto& t = config.at("tree");
  if (t.is_string()) return parse_tree(t.get<std::string>());
  return parse_tree_json(t);
}

/// Line-format rendering in the tree's own orientation, 17 significant digits.
inline std::string to_text(const MetricTree& tree, const PotentialVector& q) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "root " << tree.root() << "\n";
  for (const Edge& e : tree.edges()) os << "edge " << e.id << ' ' << e.child << ' ' << e.parent << ' ' << e.length << "\n";
  for (const auto& [id, p] : q.entries()) {
    os << "potential " << id << ' ';
    switch (p.kind()) {
      case EdgePotential::Kind::zero: os << "zero"; break;
      case EdgePotential::Kind::constant: os << "constant " << p.constant_value(); break;
      case EdgePotential::Kind::polynomial:
        os << "poly";
        for (double c : p.coefficients()) os << ' ' << c;
        break;
      case EdgePotential::Kind::sampled:
        os << "samples";
        for (std::size_t i = 0; i < p.grid().size(); ++i) os << ' ' << p.grid()[i] << ' ' << p.values()[i];
        break;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace qgtree
