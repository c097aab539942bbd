#include "iddm/graph.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <ostream>
#include <sstream>

#include "iddm/errors.hpp"

namespace iddm {

std::vector<std::vector<int>> Graph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_vertices));
  for (const auto& [u, v] : edges) {
    adj[static_cast<std::size_t>(u - 1)].push_back(v - 1);
    adj[static_cast<std::size_t>(v - 1)].push_back(u - 1);
  }
  return adj;
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
}

Graph make_graph(int num_vertices, const std::vector<std::pair<int, int>>& edges) {
  if (num_vertices < 0) throw ContractViolation("make_graph: negative vertex count");
  Graph g;
  g.num_vertices = num_vertices;
  g.edges.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 1 || v < 1 || u > num_vertices || v > num_vertices) {
      throw ContractViolation("make_graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") out of range");
    }
    if (u == v) throw ContractViolation("make_graph: self-loop at vertex " + std::to_string(u));
    if (u > v) std::swap(u, v);
    g.edges.emplace_back(u, v);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

namespace {

bool parse_int(std::istringstream& ls, long long& out) {
  if (!(ls >> out)) return false;
  return true;
}

}  // namespace

Graph parse_dimacs(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  long long nv = -1;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "c") continue;
    if (tag == "p") {
      if (nv >= 0) throw ParseError(lineno, "duplicate problem line");
      std::string fmt;
      long long ne = 0;
      if (!(ls >> fmt) || (fmt != "edge" && fmt != "col") || !parse_int(ls, nv) || !parse_int(ls, ne) || nv < 0 ||
          ne < 0) {
        throw ParseError(lineno, "malformed problem line: '" + line + "'");
      }
      std::string rest;
      if (ls >> rest) throw ParseError(lineno, "trailing tokens on problem line");
      continue;
    }
    if (tag == "e") {
      if (nv < 0) throw ParseError(lineno, "edge line before the problem line");
      long long u = 0, v = 0;
      std::string rest;
      if (!parse_int(ls, u) || !parse_int(ls, v) || (ls >> rest)) {
        throw ParseError(lineno, "malformed edge line: '" + line + "'");
      }
      if (u < 1 || v < 1 || u > nv || v > nv) {
        throw ParseError(lineno, "vertex out of range 1.." + std::to_string(nv) + ": '" + line + "'");
      }
      if (u == v) throw ParseError(lineno, "self-loop: '" + line + "'");
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
      continue;
    }
    throw ParseError(lineno, "unknown line type '" + tag + "'");
  }
  if (nv < 0) throw ParseError(lineno, "missing problem line");
  return make_graph(static_cast<int>(nv), edges);
}

Graph parse_dimacs_string(const std::string& text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

Graph read_dimacs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file '" + path + "'");
  return parse_dimacs(in);
}

void write_dimacs(std::ostream& out, const Graph& g, const std::string& comment) {
  if (!comment.empty()) out << "c " << comment << "\n";
  out << "p edge " << g.num_vertices << " " << g.edges.size() << "\n";
  for (const auto& [u, v] : g.edges) out << "e " << u << " " << v << "\n";
}

Graph cycle_graph(int m) {
  if (m < 3) throw ContractViolation("cycle_graph: need m >= 3");
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= m; ++i) e.emplace_back(i, i % m + 1);
  return make_graph(m, e);
}

Graph complete_graph(int m) {
  if (m < 1) throw ContractViolation("complete_graph: need m >= 1");
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= m; ++i)
    for (int j = i + 1; j <= m; ++j) e.emplace_back(i, j);
  return make_graph(m, e);
}

Graph empty_graph(int m) {
  if (m < 1) throw ContractViolation("empty_graph: need m >= 1");
  return make_graph(m, {});
}

Graph petersen_graph() {
  // outer 5-cycle 1..5, inner pentagram 6..10, spokes i -- i+5
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < 5; ++i) {
    e.emplace_back(1 + i, 1 + (i + 1) % 5);
    e.emplace_back(6 + i, 6 + (i + 2) % 5);
    e.emplace_back(1 + i, 6 + i);
  }
  return make_graph(10, e);
}

Graph hamming_graph(int d, int threshold) {
  if (d < 1 || d > 20) throw ContractViolation("hamming_graph: need 1 <= d <= 20");
  const int m = 1 << d;
  std::vector<std::pair<int, int>> e;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (std::popcount(static_cast<unsigned>(a ^ b)) < threshold) e.emplace_back(a + 1, b + 1);
  return make_graph(m, e);
}

Graph graph_from_spec(const std::string& spec) {
  std::vector<std::string> parts;
  {
    std::size_t start = 0;
    if (spec.rfind("file:", 0) == 0) return read_dimacs_file(spec.substr(5));
    while (true) {
      const auto pos = spec.find(':', start);
      parts.push_back(spec.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  }
  auto arg = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad graph spec '" + spec + "'");
    }
  };
  const std::string& kind = parts[0];
  try {
    if (kind == "petersen" && parts.size() == 1) return petersen_graph();
    if (kind == "cycle" && parts.size() == 2) return cycle_graph(arg(1));
    if (kind == "complete" && parts.size() == 2) return complete_graph(arg(1));
    if (kind == "empty" && parts.size() == 2) return empty_graph(arg(1));
    if (kind == "hamming" && parts.size() == 3) return hamming_graph(arg(1), arg(2));
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("bad graph spec: ") + e.what());
  }
  throw ConfigError("unknown graph spec '" + spec + "' (expected cycle:M, complete:M, empty:M, petersen, "
                    "hamming:D:T or file:PATH)");
}

}  // namespace iddm
