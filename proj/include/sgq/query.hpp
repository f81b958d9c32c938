#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "sgq/embedding.hpp"
#include "sgq/graph.hpp"
#include "sgq/match_lib.hpp"

namespace sgq {

struct QueryNode {
  std::string id;
  QueryNodeSpec spec;
};

struct QueryEdge {
  std::size_t src;
  std::size_t dst;
  std::string predicate;
};

/// User query: specific, target and wildcard nodes joined by predicate edges.
/// Node and edge positions are the local ids used everywhere else.
struct QueryGraph {
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;

  std::size_t node_index(std::string_view id) const;  // throws ValidationError
  std::size_t other_end(std::size_t edge, std::size_t node) const;
};

// Throws ValidationError naming the offending node or edge. When `vocab` is
// given, every predicate must be known to it.
QueryGraph parse_query(const nlohmann::json& doc, const SimilarityModel* vocab = nullptr);
QueryGraph load_query(const std::filesystem::path& path, const SimilarityModel* vocab = nullptr);
nlohmann::json to_json(const QueryGraph& q);

/// A simple query path from a specific node to the pivot. `nodes` has one
/// more element than `edges`; both are listed from the specific end.
struct SubQueryGraph {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;

  std::size_t start() const { return nodes.front(); }
  std::size_t pivot() const { return nodes.back(); }
  friend bool operator==(const SubQueryGraph&, const SubQueryGraph&) = default;
};

// Ordered lexicographically: number of unexecutable sub-queries first, then the finite sum.
struct DecompositionCost {
  std::size_t infinite = 0;
  double finite = 0.0;

  DecompositionCost& operator+=(const DecompositionCost& o) {
    infinite += o.infinite;
    finite += o.finite;
    return *this;
  }
  friend bool operator<(const DecompositionCost& a, const DecompositionCost& b) {
    if (a.infinite != b.infinite) return a.infinite < b.infinite;
    return a.finite < b.finite;
  }
  double value() const { return infinite ? std::numeric_limits<double>::infinity() : finite; }
};

struct Decomposition {
  std::size_t pivot = 0;
  std::vector<SubQueryGraph> sub_queries;
  DecompositionCost cost;
};

inline constexpr std::size_t kMaxQueryEdges = 20;

// |phi(v^s)| * dbar^|E_i|; +infinity when phi(v^s) is empty.
double cost_formula(std::size_t start_matches, double avg_degree, std::size_t edges);
double estimate_cost(const SubQueryGraph& sub, const QueryGraph& q, const KnowledgeGraph& g,
                     const NodeMatcher& matcher);

// Every simple query path from a specific node to `pivot`, sorted by edge sequence.
std::vector<SubQueryGraph> pivot_paths(const QueryGraph& q, std::size_t pivot);

// Minimum total cost over every target pivot and every path cover of the edges.
// Throws ValidationError("unsupported query shape") when no pivot admits a cover.
Decomposition decompose(const QueryGraph& q, const KnowledgeGraph& g, const NodeMatcher& matcher);

// Same search with per-path costs supplied directly.
Decomposition decompose(const QueryGraph& q,
                        const std::function<DecompositionCost(const SubQueryGraph&)>& cost);

}  // namespace sgq
