#include <cmath>

#include "doctest.h"
#include "sgq/oracle.hpp"
#include "support.hpp"

using namespace sgq;

namespace {

struct Cars {
  sgq::testing::Fixture f = sgq::testing::load_fixture("cars");
  NodeMatcher phi{f.graph, f.library};
  Decomposition d = decompose(f.query, f.graph, phi);
};

std::string name(const KnowledgeGraph& g, EntityId u) { return g.entity(u).name; }

}  // namespace

TEST_CASE("node filters") {
  const std::vector<EntityId> ids{EntityId(1), EntityId(3)};
  const auto f = NodeFilter::of(5, ids);
  CHECK(f.contains(EntityId(1)));
  CHECK_FALSE(f.contains(EntityId(2)));
  CHECK_FALSE(f.contains(EntityId(7)));
  CHECK(NodeFilter::any().contains(EntityId(7)));
}

TEST_CASE("resolving the worked example sub-queries") {
  Cars x;
  const auto r0 = resolve_sub_query(x.d.sub_queries[0], x.f.query, x.phi, x.f.weights);
  REQUIRE(r0.seeds.size() == 1);
  CHECK(name(x.f.graph, r0.seeds[0]) == "Germany");
  CHECK(r0.edge_count() == 1);
  CHECK(r0.targets().contains(*x.f.graph.find_entity("Audi_TT")));
  CHECK_FALSE(r0.targets().contains(*x.f.graph.find_entity("Munich")));
  const auto r1 = resolve_sub_query(x.d.sub_queries[1], x.f.query, x.phi, x.f.weights);
  CHECK(r1.edge_count() == 2);
  CHECK(r1.filters[1].contains(*x.f.graph.find_entity("Peter_Schreyer")));
  CHECK_FALSE(r1.filters[1].contains(*x.f.graph.find_entity("Audi_TT")));
}

TEST_CASE("semantic graph weights and m(u)") {
  Cars x;
  const auto r0 = resolve_sub_query(x.d.sub_queries[0], x.f.query, x.phi, x.f.weights);
  SemanticGraph sg(x.f.graph, x.f.weights, r0.predicates);
  const auto assembly = *x.f.graph.find_predicate("assembly");
  CHECK(sg.weight(0, assembly) == 0.98);
  CHECK(sg.max_weight(*x.f.graph.find_predicate("federalState")) == 0.62);
  // Ingolstadt touches country (0.81...) and assembly (0.98).
  const auto ing = *x.f.graph.find_entity("Ingolstadt");
  CHECK(sg.max_adjacent_weight(ing) == 0.98);
  CHECK(max_adjacent_weight(x.f.graph, x.f.weights, ing, r0) == 0.98);
  CHECK(sg.max_adjacent_weight(*x.f.graph.find_entity("Germany")) == 0.8100826530612245);
  const auto before = sg.memo_misses();
  sg.weight(0, assembly);
  CHECK(sg.memo_misses() == before);
}

TEST_CASE("estimate is (W m)^(1/nhat)") {
  CHECK(estimate_pss(1.0, 0.81, 4) == std::pow(0.81, 0.25));
  CHECK(estimate_pss(0.5, 0.5, 2) == 0.5);
  CHECK(estimate_pss(0.5, 0.0, 2) == 0.0);
  CHECK_THROWS_AS(estimate_pss(0.5, 0.5, 0), ContractViolation);
}

TEST_CASE("search config validation") {
  SearchConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau = 1.2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.nhat = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.alert_ratio = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.time_bound = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(SearchConfig{}.capacity() == 30);
}

TEST_CASE("worked example product sub-query finds the Audi path") {
  Cars x;
  const auto r0 = resolve_sub_query(x.d.sub_queries[0], x.f.query, x.phi, x.f.weights);
  SemanticGraph sg(x.f.graph, x.f.weights, r0.predicates);
  SearchConfig cfg;
  cfg.k = 1;
  cfg.overfetch = 1;
  const auto res = astar_search(r0, sg, cfg);
  REQUIRE(res.matches.size() == 1);
  const auto& m = res.matches[0];
  CHECK(name(x.f.graph, m.pivot()) == "Audi_TT");
  CHECK(m.psi == doctest::Approx(0.891).epsilon(1e-12));
  CHECK(format_path(m, x.f.graph) == "Germany -country- Ingolstadt -assembly- Audi_TT");
  CHECK(m.segment == std::vector<std::size_t>{0, 0});
}

TEST_CASE("worked example nationality-designer sub-query") {
  Cars x;
  const auto r1 = resolve_sub_query(x.d.sub_queries[1], x.f.query, x.phi, x.f.weights);
  SemanticGraph sg(x.f.graph, x.f.weights, r1.predicates);
  SearchConfig cfg;
  cfg.k = 10;
  const auto res = astar_search(r1, sg, cfg);
  REQUIRE(res.matches.size() >= 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(res.matches[i].psi == 1.0);
    CHECK(res.matches[i].segment == std::vector<std::size_t>{0, 1});
  }
  CHECK(name(x.f.graph, res.matches[0].pivot()) == "Audi_TT");
}

TEST_CASE("empty seed set is reported, not an error") {
  ResolvedSubQuery sub;
  sub.predicates = {0};
  sub.filters = {NodeFilter::of(1, {}), NodeFilter::any()};
  const auto f = sgq::testing::load_fixture("walkthrough");
  SemanticGraph sg(f.graph, f.weights, sub.predicates);
  CHECK(astar_search(sub, sg, SearchConfig{}).no_seeds);
}

TEST_CASE("alignment picks the best cut and respects boundary filters") {
  // a -x- b -y- c with query edges (qx, qy); b must be the boundary.
  KnowledgeGraph::Builder b;
  b.add_triple("a", "x", "b");
  b.add_triple("b", "y", "c");
  const auto g = std::move(b).build();
  WeightTable t;
  t.set("qx", "x", 0.9);
  t.set("qx", "y", 0.2);
  t.set("qy", "x", 0.3);
  t.set("qy", "y", 0.8);
  ResolvedSubQuery sub;
  sub.predicates = {*t.find("qx"), *t.find("qy")};
  sub.filters = {NodeFilter::any(), NodeFilter::any(), NodeFilter::any()};
  SemanticGraph sg(g, t, sub.predicates);
  const std::vector<EntityId> nodes{*g.find_entity("a"), *g.find_entity("b"), *g.find_entity("c")};
  const std::vector<EdgeIndex> edges{0, 1};
  auto m = align_path(sub, sg, nodes, edges);
  REQUIRE(m);
  CHECK(m->segment == std::vector<std::size_t>{0, 1});
  CHECK(m->psi == std::sqrt(0.9 * 0.8));

  const std::vector<EntityId> only_a{*g.find_entity("a")};
  sub.filters[1] = NodeFilter::of(g.entity_count(), only_a);
  CHECK_FALSE(align_path(sub, sg, nodes, edges));
}

TEST_CASE("time estimate fires at r percent of the bound") {
  SearchConfig c;
  c.time_bound = 100.0;
  c.alert_ratio = 90.0;
  c.assembly_tick = 10.0;
  const std::vector<ProgressReport> r{{10.0, 2}, {20.0, 3}};
  CHECK_FALSE(time_estimate(r, c));
  c.assembly_tick = 14.0;
  CHECK(time_estimate(r, c));
  c.time_bound.reset();
  CHECK_FALSE(time_estimate(r, c));
}

TEST_CASE("time-bounded search run to completion equals the exact top set") {
  int nonempty = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    auto inst = sgq::testing::random_instance(seed);
    SearchConfig cfg;
    cfg.tau = seed % 2 ? 0.0 : 0.7;
    cfg.k = 1 + seed % 7;
    cfg.overfetch = 1;
    cfg.nhat = 2 + seed % 3;
    SemanticGraph sg1(inst.graph, inst.model, inst.sub.predicates);
    const auto exact = astar_search(inst.sub, sg1, cfg);
    SemanticGraph sg2(inst.graph, inst.model, inst.sub.predicates);
    TimeBoundedSearch tb(inst.sub, sg2, cfg);
    while (tb.step()) {
    }
    CHECK(tb.finished());
    const auto got = tb.snapshot();
    REQUIRE(got.size() == exact.matches.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(same_path(got[i], exact.matches[i]));
      CHECK(got[i].psi == exact.matches[i].psi);
    }
    nonempty += !got.empty();
  }
  CHECK(nonempty > 50);
}

TEST_CASE("matches carry weights that reproduce psi") {
  for (std::uint64_t seed = 300; seed < 340; ++seed) {
    auto inst = sgq::testing::random_instance(seed);
    SemanticGraph sg(inst.graph, inst.model, inst.sub.predicates);
    SearchConfig cfg;
    cfg.tau = 0.0;
    cfg.k = 20;
    for (const auto& m : astar_search(inst.sub, sg, cfg).matches) {
      CHECK(m.psi == exact_pss(m));
      CHECK(m.nodes.size() == m.edges.size() + 1);
      CHECK(m.segment.front() == 0);
      CHECK(m.segment.back() == inst.sub.edge_count() - 1);
      for (std::size_t i = 1; i < m.segment.size(); ++i) {
        CHECK(m.segment[i] >= m.segment[i - 1]);
        CHECK(m.segment[i] <= m.segment[i - 1] + 1);
      }
    }
  }
}
