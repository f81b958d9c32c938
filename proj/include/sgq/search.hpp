#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sgq/embedding.hpp"
#include "sgq/graph.hpp"
#include "sgq/match_lib.hpp"
#include "sgq/paths.hpp"
#include "sgq/query.hpp"

namespace sgq {

// Membership test over entity ids; `all` accepts every entity.
struct NodeFilter {
  bool all = false;
  std::vector<char> member;

  static NodeFilter any() { return NodeFilter{true, {}}; }
  static NodeFilter of(std::size_t entity_count, std::span<const EntityId> ids);
  bool contains(EntityId u) const { return all || (to_index(u) < member.size() && member[to_index(u)]); }
};

/// A sub-query bound to a graph and a similarity model: one model predicate per
/// query edge (from the specific end) and one node filter per query node position.
struct ResolvedSubQuery {
  std::vector<std::size_t> predicates;
  std::vector<NodeFilter> filters;  // size predicates.size() + 1
  std::vector<EntityId> seeds;      // phi(v^s), sorted

  std::size_t edge_count() const noexcept { return predicates.size(); }
  const NodeFilter& targets() const { return filters.back(); }
};

// Throws LookupError when a query predicate is unknown to the model.
ResolvedSubQuery resolve_sub_query(const SubQueryGraph& sub, const QueryGraph& q, const NodeMatcher& matcher,
                                   const SimilarityModel& model);

/// Lazily weighted view of the graph for one sub-query. Weights are computed
/// on first use and memoized per (query edge, graph predicate). Not thread-safe;
/// each search worker owns one.
class SemanticGraph {
 public:
  SemanticGraph(const KnowledgeGraph& g, const SimilarityModel& model, std::vector<std::size_t> query_predicates);

  const KnowledgeGraph& graph() const noexcept { return *graph_; }
  std::size_t query_edges() const noexcept { return query_predicates_.size(); }

  double weight(std::size_t query_edge, PredicateId p);
  // Best weight of p against any query edge; 0 means the edge is absent.
  double max_weight(PredicateId p);
  // m(u): best max_weight over the incident edges of u, 0 when isolated.
  double max_adjacent_weight(EntityId u);

  std::size_t memo_misses() const noexcept { return misses_; }
  double memo_seconds() const noexcept { return memo_seconds_; }

 private:
  const KnowledgeGraph* graph_;
  const SimilarityModel* model_;
  std::vector<std::size_t> query_predicates_;
  std::vector<std::optional<std::size_t>> binding_;
  std::vector<double> weights_;      // query_edge * |P| + p, NaN until computed
  std::vector<double> max_weights_;  // per predicate, NaN until computed
  std::vector<double> adjacent_;     // per entity, NaN until computed
  std::size_t misses_ = 0;
  double memo_seconds_ = 0.0;
};

double max_adjacent_weight(const KnowledgeGraph& g, const SimilarityModel& model, EntityId u,
                           const ResolvedSubQuery& sub);

// (W * m(u))^(1/nhat); a bare seed uses W = 1.
double estimate_pss(double best_product, double m_u, std::size_t nhat);

struct SearchConfig {
  double tau = 0.8;
  std::size_t nhat = 4;
  std::size_t k = 10;
  std::size_t overfetch = 3;
  std::optional<double> time_bound;  // milliseconds, or expansions under the virtual clock
  double alert_ratio = 90.0;         // percent
  double assembly_tick = 0.0;        // t: per-match assembly cost in the time-bound unit

  std::size_t capacity() const noexcept { return k * overfetch; }
  void validate() const;
};

struct SearchStats {
  std::size_t pops = 0;
  std::size_t expansions = 0;
  std::size_t pushes = 0;
  std::size_t prunes = 0;
  std::size_t max_frontier = 0;
};

struct TraceStep {
  std::vector<EntityId> nodes;  // popped partial path
  std::vector<EdgeIndex> edges;
  double key = 0.0;
  bool complete = false;
  std::vector<double> frontier;  // keys after this step, descending
  std::vector<std::pair<EntityId, EdgeIndex>> children;  // generated and kept
};

struct SearchTrace {
  std::vector<TraceStep> steps;
};

struct SearchResult {
  MatchSet matches;
  SearchStats stats;
  bool no_seeds = false;
};

// Top-(k * overfetch) tau-satisfying simple-path matches within nhat hops,
// best first under match_before.
SearchResult astar_search(const ResolvedSubQuery& sub, SemanticGraph& sg, const SearchConfig& cfg,
                          SearchTrace* trace = nullptr);

// Recovers the aligned segmentation of a complete path. Returns nullopt when
// no valid alignment exists.
std::optional<Match> align_path(const ResolvedSubQuery& sub, SemanticGraph& sg, std::span<const EntityId> nodes,
                                std::span<const EdgeIndex> edges);

struct ProgressReport {
  double elapsed = 0.0;  // T_A*
  std::size_t matches = 0;
};

// max T_A* + sum |M_i| * t >= T * r%.
bool time_estimate(std::span<const ProgressReport> reports, const SearchConfig& cfg);

/// Anytime search driven one expansion at a time. Complete matches go into a
/// bounded best-(k * overfetch) set as soon as they are generated.
class TimeBoundedSearch {
 public:
  TimeBoundedSearch(const ResolvedSubQuery& sub, SemanticGraph& sg, const SearchConfig& cfg);
  ~TimeBoundedSearch();
  TimeBoundedSearch(TimeBoundedSearch&&) noexcept;
  TimeBoundedSearch& operator=(TimeBoundedSearch&&) noexcept;

  // One expansion. Returns false once the frontier is empty.
  bool step();
  bool finished() const;
  std::size_t match_count() const;
  MatchSet snapshot() const;
  // Moves the kept matches out, sorted; the search is left empty.
  MatchSet take();
  const SearchStats& stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sgq
