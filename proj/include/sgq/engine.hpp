#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "sgq/assembly.hpp"
#include "sgq/embedding.hpp"
#include "sgq/graph.hpp"
#include "sgq/match_lib.hpp"
#include "sgq/query.hpp"
#include "sgq/search.hpp"

namespace sgq {

enum class QueryMode { Exact, TimeBounded };

struct QueryRequest {
  QueryGraph query;
  SearchConfig config;
  QueryMode mode = QueryMode::Exact;
  // Single-threaded round-robin workers on a virtual clock of one tick per
  // expansion; time_bound and assembly_tick are then measured in ticks.
  bool deterministic = false;
  ThresholdMode threshold = ThresholdMode::Corrected;

  void validate() const;
};

// Milliseconds per component: decomposition, semantic graph (phi + weights), search, assembly.
struct ComponentTimes {
  double c1_decompose = 0.0;
  double c2_semantic = 0.0;
  double c3_search = 0.0;
  double c4_assembly = 0.0;
  double total = 0.0;
};

struct RunReport {
  ComponentTimes times;
  std::vector<SearchStats> sub_query_stats;
  std::vector<std::size_t> sub_query_matches;
  std::size_t expansions = 0;
  std::size_t prunes = 0;
  std::size_t weight_evaluations = 0;
  AssemblyCost assembly;
  double assembly_tick = 0.0;  // t
  double search_clock = 0.0;   // max T_A* when the searches stopped
  bool stopped_early = false;  // time estimate fired before the searches finished
  bool deadline_met = true;
  bool deadline_zero = false;
  std::vector<std::string> diagnostics;
};

struct QueryResult {
  Decomposition decomposition;
  std::vector<FinalMatch> matches;
  RunReport report;
};

QueryResult run_query(const QueryRequest& req, const KnowledgeGraph& g, const SimilarityModel& model,
                      const NodeMatcher& matcher);
QueryResult run_query(const QueryRequest& req, const KnowledgeGraph& g, const SimilarityModel& model,
                      const TransformationLibrary& lib);

// Pivot order used for ties: entity name.
PivotLess pivot_name_order(const KnowledgeGraph& g);

// |A n B| / |A u B| over (pivot, per-slot path) identities; 1 when both are empty.
double jaccard(const QueryResult& approx, const QueryResult& exact);
double jaccard(const std::vector<FinalMatch>& approx, const std::vector<FinalMatch>& exact);

struct Evaluation {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Throws EvaluationError on an empty truth list.
Evaluation evaluate(const std::vector<std::string>& returned, const std::vector<std::string>& truth);
Evaluation evaluate(const QueryResult& result, const KnowledgeGraph& g, const std::vector<std::string>& truth);
// One pivot name per line; blank lines ignored.
std::vector<std::string> load_truth(const std::filesystem::path& path);

enum class NoiseKind { Node, Edge };

struct NoiseResult {
  QueryGraph query;
  bool changed = false;
  std::string description;  // what changed, or why nothing did
};

// Node noise swaps one name or type term for another surface form of the same
// canonical value; edge noise swaps one predicate for one of its ten nearest.
NoiseResult add_noise(const QueryGraph& q, NoiseKind kind, std::uint64_t seed, const TransformationLibrary& lib,
                      const SimilarityModel& model);

// `Germany -country- Ingolstadt -assembly- Audi_TT`
std::string format_path(const Match& m, const KnowledgeGraph& g);
nlohmann::json match_record(const FinalMatch& m, std::size_t rank, const KnowledgeGraph& g);
nlohmann::json report_record(const QueryResult& r, const QueryGraph& q);

}  // namespace sgq
