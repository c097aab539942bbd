#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace iddm {

/// Simple undirected graph on vertices 1..num_vertices.
struct Graph {
  int num_vertices = 0;
  /// Sorted, unique pairs (u, v) with u < v.
  std::vector<std::pair<int, int>> edges;

  /// Adjacency lists, 0-based.
  std::vector<std::vector<int>> adjacency() const;
  bool has_edge(int u, int v) const;
};

/// Builds a graph from 1-based edge pairs. Throws ContractViolation on
/// self-loops or endpoints out of range; duplicates are merged.
Graph make_graph(int num_vertices, const std::vector<std::pair<int, int>>& edges);

/// DIMACS ASCII: `c` comments, one `p edge V E` (or `p col V E`) line,
/// `e u v` edge lines. Throws ParseError carrying the 1-based line number.
Graph parse_dimacs(std::istream& in);
Graph parse_dimacs_string(const std::string& text);
Graph read_dimacs_file(const std::string& path);
void write_dimacs(std::ostream& out, const Graph& g, const std::string& comment = "");

Graph cycle_graph(int m);
Graph complete_graph(int m);
Graph empty_graph(int m);
Graph petersen_graph();
/// Binary strings of length d; edge iff Hamming distance < threshold.
Graph hamming_graph(int d, int threshold);

/// Generator by name: "cycle:M", "complete:M", "empty:M", "petersen",
/// "hamming:D:T", or "file:PATH" for a DIMACS file.
Graph graph_from_spec(const std::string& spec);

}  // namespace iddm
