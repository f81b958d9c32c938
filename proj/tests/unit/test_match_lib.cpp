#include "doctest.h"
#include "support.hpp"

using namespace sgq;
using sgq::testing::write_temp;

namespace {

std::vector<std::string> names(const KnowledgeGraph& g, const std::vector<EntityId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(g.entity(id).name);
  std::sort(out.begin(), out.end());
  return out;
}

QueryNodeSpec target(std::vector<std::string> types) { return {NodeKind::Target, std::move(types), std::nullopt}; }

QueryNodeSpec specific(std::vector<std::string> types, std::string name) {
  return {NodeKind::Specific, std::move(types), std::move(name)};
}

}  // namespace

TEST_CASE("terms normalize whitespace and case") {
  CHECK(normalize_term("  Federal   Republic\tof Germany ") == "federal republic of germany");
  CHECK(normalize_term("GER") == "ger");
  CHECK(normalize_term("") == "");
}

TEST_CASE("library lookups are normalized both ways") {
  const auto f = sgq::testing::load_fixture("cars");
  CHECK(f.library.canonicals(LibraryTarget::Type, "car") == std::vector<std::string>{"Automobile"});
  CHECK(f.library.canonicals(LibraryTarget::Name, "federal  republic of GERMANY") == std::vector<std::string>{"Germany"});
  CHECK(f.library.canonicals(LibraryTarget::Type, "GER").empty());
  CHECK(f.library.surfaces_for(LibraryTarget::Name, "Germany") ==
        std::vector<std::string>{"FRG", "Federal Republic of Germany", "GER"});
}

TEST_CASE("phi of target, specific and wildcard nodes") {
  const auto f = sgq::testing::load_fixture("cars");
  const NodeMatcher phi(f.graph, f.library);
  CHECK(names(f.graph, phi.matches(target({"Car"}))) ==
        std::vector<std::string>{"Audi_TT", "BMW_Z4", "BYD_Song", "Hyundai_Tucsun", "KIA_K5"});
  CHECK(phi.matches(target({"automobile"})).size() == 5);
  CHECK(names(f.graph, phi.matches(target({"Person", "City"}))).size() == 6);
  CHECK(names(f.graph, phi.matches(specific({"Country"}, "GER"))) == std::vector<std::string>{"Germany"});
  CHECK(names(f.graph, phi.matches(specific({"Country"}, "Germany"))) == std::vector<std::string>{"Germany"});
  // A name whose entity lacks the requested type matches nothing.
  CHECK(phi.matches(specific({"City"}, "Germany")).empty());
  CHECK(phi.matches(specific({"Country"}, "Atlantis")).empty());
  CHECK(phi.matches(QueryNodeSpec{}).size() == f.graph.entity_count());
}

TEST_CASE("node specs validate their shape") {
  CHECK_THROWS_AS((QueryNodeSpec{NodeKind::Specific, {"Country"}, std::nullopt}.validate()), ValidationError);
  CHECK_THROWS_AS((QueryNodeSpec{NodeKind::Specific, {}, "x"}.validate()), ValidationError);
  CHECK_THROWS_AS((QueryNodeSpec{NodeKind::Target, {}, std::nullopt}.validate()), ValidationError);
  CHECK_THROWS_AS((QueryNodeSpec{NodeKind::Target, {"A"}, "x"}.validate()), ValidationError);
  CHECK_THROWS_AS((QueryNodeSpec{NodeKind::Wildcard, {"A"}, std::nullopt}.validate()), ValidationError);
  CHECK_NOTHROW(QueryNodeSpec{}.validate());
}

TEST_CASE("canonicals missing from the graph are reported") {
  const auto f = sgq::testing::load_fixture("cars");
  TransformationLibrary lib = f.library;
  lib.add({"Zep", TransformKind::Synonym, {"Airship"}, LibraryTarget::Type});
  lib.add({"Bonn", TransformKind::Synonym, {"Bonn_City"}, LibraryTarget::Name});
  CHECK(missing_canonicals(f.graph, lib) == std::vector<std::string>{"name:Bonn_City", "type:Airship"});
  CHECK(missing_canonicals(f.graph, f.library).empty());
  CHECK_THROWS_AS(NodeMatcher(f.graph, lib), ValidationError);
}

TEST_CASE("library files reject unknown kinds and targets") {
  CHECK_THROWS_AS(load_library(write_temp("l1.tsv", "a\tAlias\tb\ttype\n")), ParseError);
  CHECK_THROWS_AS(load_library(write_temp("l2.tsv", "a\tSynonym\tb\tnode\n")), ParseError);
  CHECK_THROWS_AS(load_library(write_temp("l3.tsv", "a\tSynonym\tb\n")), ParseError);
  const auto lib = load_library(write_temp("l4.tsv", "# comment\nBig Apple\tSynonym\tNYC|New_York\tname\n"));
  CHECK(lib.canonicals(LibraryTarget::Name, "big apple") == std::vector<std::string>{"NYC", "New_York"});
}
