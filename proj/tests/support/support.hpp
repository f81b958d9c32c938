#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgq/assembly.hpp"
#include "sgq/embedding.hpp"
#include "sgq/engine.hpp"
#include "sgq/graph.hpp"
#include "sgq/match_lib.hpp"
#include "sgq/query.hpp"
#include "sgq/search.hpp"

namespace sgq::testing {

std::filesystem::path data_dir();

// Writes `content` to a per-process scratch file and returns its path.
std::filesystem::path write_temp(const std::string& name, const std::string& content);

struct Fixture {
  KnowledgeGraph graph;
  TransformationLibrary library;
  WeightTable weights;
  QueryGraph query;
};

Fixture load_fixture(const std::string& name);  // "cars" or "walkthrough"

// Small random graph, weight table and resolved sub-query for oracle comparisons.
struct RandomInstance {
  KnowledgeGraph graph;
  WeightTable model;
  ResolvedSubQuery sub;
};

RandomInstance random_instance(std::uint64_t seed);

// Random best-first match sets over a shared pivot pool.
std::vector<MatchSet> random_match_sets(std::uint64_t seed);

// Cars, designers, cities, states and countries wired like the worked example,
// scaled to roughly `entities` nodes. `truth` lists the cars assembled in a
// German city (directly or via its state) and designed by a German national.
struct World {
  KnowledgeGraph graph;
  TransformationLibrary library;
  WeightTable weights;
  QueryGraph query;
  std::vector<std::string> truth;
};

World synthetic_world(std::uint64_t seed, std::size_t entities);

// walkthrough fixture edge weights solved from the narrated estimates.
std::vector<std::pair<std::string, double>> walkthrough_solved_weights();

// FNV-1a over raw bytes, for bit-exact repeat comparisons.
class Digest {
 public:
  void add(double x);
  void add(std::uint64_t x);
  void add(const std::string& s);
  void add(const Match& m);
  std::uint64_t value() const noexcept { return h_; }

 private:
  void bytes(const void* p, std::size_t n);
  std::uint64_t h_ = 1469598103934665603ull;
};

}  // namespace sgq::testing
