#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sgq/graph.hpp"

namespace sgq {

/// A matched graph path for one sub-query. `segment[i]` is the query-edge
/// position that graph edge i is aligned with, `weights[i]` its weight.
struct Match {
  std::vector<EntityId> nodes;
  std::vector<EdgeIndex> edges;
  std::vector<std::size_t> segment;
  std::vector<double> weights;
  double psi = 0.0;

  std::size_t hops() const noexcept { return edges.size(); }
  EntityId start() const { return nodes.front(); }
  EntityId pivot() const { return nodes.back(); }

  // Path identity: start node plus edge sequence.
  friend bool same_path(const Match& a, const Match& b) { return a.nodes.front() == b.nodes.front() && a.edges == b.edges; }
};

// Matches of one sub-query, best first under match_before.
using MatchSet = std::vector<Match>;

// Geometric mean of the aligned weights. Throws ContractViolation on an empty path.
double exact_pss(std::span<const double> weights);
double exact_pss(const Match& m);

// prod^(1/n), with n = 1 returning prod unchanged.
double pss_from_product(double product, std::size_t n);

// Product of weights folded left to right.
double weight_product(std::span<const double> weights);

// Higher psi, then fewer hops, then smaller node sequence, then smaller edge sequence.
bool match_before(const Match& a, const Match& b);

void sort_matches(MatchSet& set);

}  // namespace sgq
