#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "sgq/oracle.hpp"
#include "support.hpp"

using namespace sgq;
using nlohmann::json;

namespace {

json cars_doc() {
  return json::parse(R"({
    "nodes": [
      {"id": "v1", "kind": "target", "types": ["Car"]},
      {"id": "v2", "kind": "target", "types": ["Person"]},
      {"id": "v3", "kind": "specific", "types": ["Country"], "name": "Germany"}
    ],
    "edges": [
      {"src": "v1", "dst": "v3", "predicate": "product"},
      {"src": "v1", "dst": "v2", "predicate": "designer"},
      {"src": "v2", "dst": "v3", "predicate": "nationality"}
    ]})");
}

// Random connected query with a stable pseudo-random cost per path.
QueryGraph random_query(std::mt19937_64& rng) {
  QueryGraph q;
  const auto n = std::uniform_int_distribution<std::size_t>(2, 7)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    QueryNode node{"n" + std::to_string(i), {}};
    const auto r = std::uniform_int_distribution<int>(0, 2)(rng);
    node.spec.kind = i == 0 ? NodeKind::Specific : i == 1 ? NodeKind::Target : static_cast<NodeKind>(r);
    q.nodes.push_back(node);
  }
  for (std::size_t i = 1; i < n; ++i) {
    q.edges.push_back({std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i, "p"});
  }
  const auto extra = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
  for (std::size_t e = 0; e < extra; ++e) {
    const auto a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const auto b = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (a != b) q.edges.push_back({a, b, "p"});
  }
  return q;
}

DecompositionCost hashed_cost(const SubQueryGraph& s, std::uint64_t salt) {
  std::uint64_t h = salt;
  for (auto e : s.edges) h = h * 1000003u + e + 1;
  for (auto v : s.nodes) h = h * 7919u + v;
  h ^= h >> 29;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 32;
  if (h % 13 == 0) return {1, 0.0};
  return {0, static_cast<double>(h % 1000) / 10.0 + static_cast<double>(s.edges.size())};
}

}  // namespace

TEST_CASE("a well-formed query parses and round-trips") {
  const auto q = parse_query(cars_doc());
  REQUIRE(q.nodes.size() == 3);
  REQUIRE(q.edges.size() == 3);
  CHECK(q.nodes[2].spec.kind == NodeKind::Specific);
  CHECK(q.nodes[2].spec.name_term == "Germany");
  CHECK(q.node_index("v2") == 1);
  CHECK(q.other_end(0, 0) == 2);
  const auto back = parse_query(to_json(q));
  CHECK(to_json(back) == to_json(q));
}

TEST_CASE("malformed queries name the problem") {
  auto bad = [](auto mutate) {
    auto doc = cars_doc();
    mutate(doc);
    return doc;
  };
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["nodes"][1]["id"] = "v1"; })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["nodes"][1]["kind"] = "maybe"; })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["edges"][0]["dst"] = "v9"; })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["edges"][0]["dst"] = "v1"; })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["edges"][0]["predicate"] = ""; })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["edges"] = json::array(); })), ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) { d["nodes"][2]["kind"] = "target"; d["nodes"][2].erase("name"); })),
                  ValidationError);
  CHECK_THROWS_AS(parse_query(bad([](json& d) {
                    d["nodes"].push_back({{"id", "lonely"}, {"kind", "wildcard"}});
                  })),
                  ValidationError);
  CHECK_THROWS_AS(parse_query(json::array()), ValidationError);

  WeightTable vocab;
  vocab.add_predicate("product");
  vocab.add_predicate("designer");
  CHECK_THROWS_AS(parse_query(cars_doc(), &vocab), ValidationError);
  vocab.add_predicate("nationality");
  CHECK_NOTHROW(parse_query(cars_doc(), &vocab));
}

TEST_CASE("more than twenty edges is rejected") {
  json doc{{"nodes", json::array()}, {"edges", json::array()}};
  doc["nodes"].push_back({{"id", "s"}, {"kind", "specific"}, {"types", {"T"}}, {"name", "x"}});
  doc["nodes"].push_back({{"id", "t"}, {"kind", "target"}, {"types", {"T"}}});
  for (int i = 0; i < 21; ++i) doc["edges"].push_back({{"src", "s"}, {"dst", "t"}, {"predicate", "p" + std::to_string(i)}});
  CHECK_THROWS_AS(parse_query(doc), ValidationError);
  doc["edges"].erase(doc["edges"].begin());
  CHECK(parse_query(doc).edges.size() == 20);
}

TEST_CASE("cost formula") {
  CHECK(cost_formula(1, 2.0, 3) == 8.0);
  CHECK(cost_formula(3, 1.5, 2) == doctest::Approx(6.75));
  CHECK(std::isinf(cost_formula(0, 2.0, 1)));
}

TEST_CASE("worked example decomposes at the car node") {
  const auto f = sgq::testing::load_fixture("cars");
  const NodeMatcher phi(f.graph, f.library);
  const auto d = decompose(f.query, f.graph, phi);
  CHECK(f.query.nodes[d.pivot].id == "v1");
  REQUIRE(d.sub_queries.size() == 2);
  CHECK(d.sub_queries[0].edges == std::vector<std::size_t>{0});
  CHECK(d.sub_queries[1].edges == std::vector<std::size_t>{2, 1});
  CHECK(d.sub_queries[1].nodes == std::vector<std::size_t>{2, 1, 0});
  const double dbar = 30.0 / 14.0;
  CHECK(d.cost.finite == doctest::Approx(dbar + dbar * dbar).epsilon(1e-12));
  CHECK(d.cost.infinite == 0);
}

TEST_CASE("pivot paths enumerate every simple specific-to-pivot path") {
  const auto q = parse_query(cars_doc());
  const auto paths = pivot_paths(q, 0);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].edges == std::vector<std::size_t>{0});
  CHECK(paths[1].edges == std::vector<std::size_t>{2, 1});
  CHECK(pivot_paths(q, 1).size() == 2);
}

TEST_CASE("flower query pivots at the centre") {
  const auto q = load_query(sgq::testing::data_dir() / "queries" / "flower.json");
  const auto d = decompose(q, [](const SubQueryGraph& s) { return DecompositionCost{0, double(s.edges.size())}; });
  CHECK(q.nodes[d.pivot].id == "c");
  CHECK(d.sub_queries.size() == 4);
}

TEST_CASE("unsupported shapes are reported") {
  // Only a wildcard sits beyond the target, so that edge can never end at a pivot.
  auto doc = json::parse(R"({
    "nodes": [
      {"id": "s", "kind": "specific", "types": ["T"], "name": "x"},
      {"id": "t", "kind": "target", "types": ["T"]},
      {"id": "w", "kind": "wildcard"}
    ],
    "edges": [
      {"src": "s", "dst": "t", "predicate": "p"},
      {"src": "s", "dst": "w", "predicate": "p"}
    ]})");
  const auto q = parse_query(doc);
  CHECK_THROWS_WITH_AS(decompose(q, [](const SubQueryGraph&) { return DecompositionCost{}; }),
                       doctest::Contains("unsupported query shape"), ValidationError);
}

TEST_CASE("set-cover search agrees with subset enumeration") {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto q = random_query(rng);
    const auto salt = rng();
    auto cost = [&](const SubQueryGraph& s) { return hashed_cost(s, salt); };
    std::optional<Decomposition> got;
    try {
      got = decompose(q, cost);
    } catch (const ValidationError&) {
    }
    std::optional<OracleDecomposition> want;
    try {
      want = oracle_decompose(q, cost);
    } catch (const OracleError& e) {
      if (std::string(e.what()).find("too many") != std::string::npos) continue;
    }
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    ++compared;
    CHECK(got->cost.infinite == want->cost.infinite);
    CHECK(got->cost.finite == doctest::Approx(want->cost.finite).epsilon(1e-12));
    // Covers every edge with valid paths to its pivot.
    std::vector<char> covered(q.edges.size(), 0);
    for (const auto& s : got->sub_queries) {
      CHECK(s.pivot() == got->pivot);
      CHECK(q.nodes[s.start()].spec.kind == NodeKind::Specific);
      for (auto e : s.edges) covered[e] = 1;
    }
    CHECK(std::count(covered.begin(), covered.end(), 1) == static_cast<long>(q.edges.size()));
  }
  CHECK(compared > 100);
}
