#include "support.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

#include <unistd.h>

namespace sgq::testing {

std::filesystem::path data_dir() { return SGQ_DATA_DIR; }

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / ("sgq-test-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

Fixture load_fixture(const std::string& name) {
  const auto dir = data_dir() / name;
  Fixture f{load_graph(dir / "triples.tsv", dir / "entities.tsv"), {}, load_weight_table(dir / "weights.tsv"), {}};
  if (std::filesystem::exists(dir / "library.tsv")) f.library = load_library(dir / "library.tsv");
  f.query = load_query(dir / "query.json", &f.weights);
  return f;
}

namespace {

double draw_weight(std::mt19937_64& rng) {
  // A coarse grid half the time so that psi ties are common.
  std::uniform_int_distribution<int> coin(0, 1);
  if (coin(rng)) return std::uniform_int_distribution<int>(5, 10)(rng) / 10.0;
  return std::uniform_real_distribution<double>(0.3, 1.0)(rng);
}

NodeFilter random_filter(std::mt19937_64& rng, std::size_t n, double p, bool allow_any) {
  std::bernoulli_distribution pick(p);
  if (allow_any && std::bernoulli_distribution(0.5)(rng)) return NodeFilter::any();
  std::vector<EntityId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (pick(rng)) ids.push_back(EntityId(static_cast<std::uint32_t>(i)));
  }
  if (ids.empty()) ids.push_back(EntityId(static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng))));
  return NodeFilter::of(n, ids);
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto n = std::uniform_int_distribution<std::size_t>(8, 50)(rng);
  const auto npred = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  const auto m = std::uniform_int_distribution<std::size_t>(1, 3)(rng);

  KnowledgeGraph::Builder b;
  const std::vector<std::string> types{"A"};
  for (std::size_t i = 0; i < n; ++i) b.add_entity("n" + std::to_string(i), types);
  const double density = std::uniform_real_distribution<double>(1.0, 2.2)(rng);
  const auto edges = static_cast<std::size_t>(density * static_cast<double>(n));
  std::uniform_int_distribution<std::size_t> node(0, n - 1), pred(0, npred - 1);
  for (std::size_t e = 0; e < edges; ++e) {
    const auto s = node(rng), t = node(rng);
    if (s == t) continue;
    b.add_triple("n" + std::to_string(s), "r" + std::to_string(pred(rng)), "n" + std::to_string(t));
  }

  RandomInstance inst{std::move(b).build(), {}, {}};
  std::vector<std::string> qnames;
  for (std::size_t j = 0; j < m; ++j) {
    // Occasionally reuse a graph predicate, whose self-weight is exactly 1.
    if (std::bernoulli_distribution(0.2)(rng))
      qnames.push_back("r" + std::to_string(pred(rng)));
    else
      qnames.push_back("q" + std::to_string(j));
  }
  for (std::size_t p = 0; p < npred; ++p) inst.model.add_predicate("r" + std::to_string(p));
  for (const auto& q : qnames) {
    inst.model.add_predicate(q);
    for (std::size_t p = 0; p < npred; ++p) {
      const auto r = "r" + std::to_string(p);
      if (r == q || std::bernoulli_distribution(0.2)(rng)) continue;
      inst.model.set(q, r, draw_weight(rng));
    }
  }
  for (const auto& q : qnames) inst.sub.predicates.push_back(*inst.model.find(q));

  auto seeds = random_filter(rng, n, 2.0 / static_cast<double>(n), false);
  for (std::size_t i = 0; i < n; ++i) {
    if (seeds.member[i]) inst.sub.seeds.push_back(EntityId(static_cast<std::uint32_t>(i)));
  }
  inst.sub.filters.push_back(seeds);
  for (std::size_t j = 1; j < m; ++j) inst.sub.filters.push_back(random_filter(rng, n, 0.5, true));
  inst.sub.filters.push_back(random_filter(rng, n, 0.3, false));
  return inst;
}

std::vector<MatchSet> random_match_sets(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto sets = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
  const auto pool = std::uniform_int_distribution<std::uint32_t>(10, 60)(rng);
  const bool ties = std::bernoulli_distribution(0.3)(rng);
  std::vector<MatchSet> out(sets);
  std::uint32_t edge = 0;
  for (auto& set : out) {
    const auto size = std::bernoulli_distribution(0.05)(rng) ? 0 : std::uniform_int_distribution<std::size_t>(1, 150)(rng);
    for (std::size_t i = 0; i < size; ++i) {
      Match m;
      m.nodes = {EntityId(1000 + static_cast<std::uint32_t>(i)),
                 EntityId(std::uniform_int_distribution<std::uint32_t>(0, pool - 1)(rng))};
      m.edges = {edge++};
      m.psi = ties ? std::uniform_int_distribution<int>(1, 10)(rng) / 10.0
                   : std::uniform_real_distribution<double>(0.05, 1.0)(rng);
      m.segment = {0};
      m.weights = {m.psi};
      set.push_back(std::move(m));
    }
    sort_matches(set);
  }
  return out;
}

World synthetic_world(std::uint64_t seed, std::size_t entities) {
  std::mt19937_64 rng(seed);
  const auto countries = std::max<std::size_t>(4, entities / 200);
  const auto states = countries * 3;
  const auto cities = entities * 15 / 100;
  const auto persons = entities / 4;
  const auto cars = entities - countries - states - cities - persons;

  auto country_name = [](std::size_t i) {
    if (i == 0) return std::string("Germany");
    if (i == 1) return std::string("South_Korea");
    return "Country_" + std::to_string(i);
  };
  // Germany carries a fifth of everything so the answer set is not tiny.
  auto draw_country = [&] {
    if (std::bernoulli_distribution(0.2)(rng)) return std::size_t{0};
    return std::uniform_int_distribution<std::size_t>(0, countries - 1)(rng);
  };

  KnowledgeGraph::Builder b;
  auto typed = [&](const std::string& name, const char* type) {
    const std::vector<std::string> t{type};
    b.add_entity(name, t);
  };
  for (std::size_t c = 0; c < countries; ++c) typed(country_name(c), "Country");
  std::vector<std::size_t> state_country(states);
  for (std::size_t s = 0; s < states; ++s) {
    typed("State_" + std::to_string(s), "State");
    state_country[s] = s % countries;
    b.add_triple("State_" + std::to_string(s), "country", country_name(state_country[s]));
  }
  std::vector<std::size_t> city_country(cities);
  for (std::size_t c = 0; c < cities; ++c) {
    const auto name = "City_" + std::to_string(c);
    typed(name, "City");
    city_country[c] = draw_country();
    if (std::bernoulli_distribution(0.6)(rng)) {
      b.add_triple(name, "country", country_name(city_country[c]));
    } else {
      // Reachable from its country only through a state.
      const auto s = city_country[c] + countries * std::uniform_int_distribution<std::size_t>(0, 2)(rng);
      b.add_triple(name, "federalState", "State_" + std::to_string(s));
    }
  }
  std::vector<std::size_t> person_country(persons);
  std::uniform_int_distribution<std::size_t> any_city(0, cities - 1), any_person(0, persons - 1);
  for (std::size_t p = 0; p < persons; ++p) {
    const auto name = "Person_" + std::to_string(p);
    typed(name, "Person");
    person_country[p] = draw_country();
    b.add_triple(name, "nationality", country_name(person_country[p]));
    b.add_triple(name, "birthPlace", "City_" + std::to_string(any_city(rng)));
  }
  World w;
  for (std::size_t c = 0; c < cars; ++c) {
    const auto name = "Car_" + std::to_string(c);
    typed(name, "Automobile");
    const auto city = any_city(rng);
    b.add_triple(name, "assembly", "City_" + std::to_string(city));
    bool german_designer = false;
    const auto designers = std::uniform_int_distribution<int>(1, 2)(rng);
    for (int d = 0; d < designers; ++d) {
      const auto p = any_person(rng);
      b.add_triple(name, "designer", "Person_" + std::to_string(p));
      german_designer = german_designer || person_country[p] == 0;
    }
    if (german_designer && city_country[city] == 0) w.truth.push_back(name);
  }
  w.graph = std::move(b).build();
  const auto dir = data_dir() / "cars";
  w.library = load_library(dir / "library.tsv");
  w.weights = load_weight_table(dir / "weights.tsv");
  w.query = load_query(dir / "query.json", &w.weights);
  return w;
}

std::vector<std::pair<std::string, double>> walkthrough_solved_weights() {
  auto p4 = [](double x) { return (x * x) * (x * x); };
  const double a = 0.62, b = 0.7, c = 0.5, f = 0.6, g = 0.9;
  const double d = (0.74 * 0.74) / b;
  const double e = p4(0.81) / a;
  const double h = p4(0.75) / ((a * e) * g);
  return {
      {"p_u1_u2", a},   {"p_u1_u3", b},   {"p_u1_u4", c},
      {"p_u2_u5", e},   {"p_u2_u6", f},   {"p_u3_u7", d},
      {"p_u4_u8", p4(0.73) / c},          {"p_u5_u9", g},
      {"p_u6_u10", p4(0.73) / (a * f)},   {"p_u7_u11", 0.3},
      {"p_u8_u10", 0.4},                  {"p_u9_u12", h},
      {"p_u10_u11", 0.2},
  };
}

void Digest::bytes(const void* p, std::size_t n) {
  const auto* c = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h_ ^= c[i];
    h_ *= 1099511628211ull;
  }
}

void Digest::add(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  bytes(&bits, sizeof bits);
}

void Digest::add(std::uint64_t x) { bytes(&x, sizeof x); }

void Digest::add(const std::string& s) {
  add(static_cast<std::uint64_t>(s.size()));
  bytes(s.data(), s.size());
}

void Digest::add(const Match& m) {
  add(m.psi);
  for (auto u : m.nodes) add(static_cast<std::uint64_t>(to_index(u)));
  for (auto e : m.edges) add(static_cast<std::uint64_t>(e));
  for (auto s : m.segment) add(static_cast<std::uint64_t>(s));
}

}  // namespace sgq::testing
