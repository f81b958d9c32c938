#pragma once

// Brute-force reference implementations. They use the domain types but none of
// the search, assembly or decomposition code.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sgq/embedding.hpp"
#include "sgq/graph.hpp"
#include "sgq/paths.hpp"
#include "sgq/query.hpp"
#include "sgq/search.hpp"

namespace sgq {

struct OracleLimits {
  std::size_t max_nodes = 200;
  std::size_t max_paths = 20'000'000;
};

// Every simple path of at most nhat hops from a seed to a target that admits an
// alignment and has psi >= tau, best first. Throws OracleError past the limits.
std::vector<Match> oracle_path_enum(const ResolvedSubQuery& sub, const KnowledgeGraph& g, const SimilarityModel& model,
                                    double tau, std::size_t nhat, OracleLimits limits = {});

// Every match (any psi) that extends the given partial path, under the same
// terminal and hop rules.
std::vector<Match> oracle_completions(const ResolvedSubQuery& sub, const KnowledgeGraph& g,
                                      const SimilarityModel& model, std::span<const EntityId> nodes,
                                      std::span<const EdgeIndex> edges, std::size_t nhat);

struct OracleAnswer {
  EntityId pivot{};
  double score = 0.0;
  std::vector<const Match*> slots;  // null where the set has no match for the pivot
};

// Hash join of all matches by pivot, scored by the sum of psi, top k by score
// then pivot order.
std::vector<OracleAnswer> oracle_full_join(std::span<const MatchSet> sets, std::size_t k,
                                           const std::function<bool(EntityId, EntityId)>& pivot_less = {});

struct OracleDecomposition {
  std::size_t pivot = 0;
  DecompositionCost cost;
  std::vector<SubQueryGraph> sub_queries;
};

// Minimum over every target pivot and every subset of its specific-to-pivot paths that covers all edges.
OracleDecomposition oracle_decompose(const QueryGraph& q,
                                     const std::function<DecompositionCost(const SubQueryGraph&)>& cost);

}  // namespace sgq
