#include "sgq/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "sgq/error.hpp"

namespace sgq {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

const Entity& KnowledgeGraph::entity(EntityId id) const {
  if (!contains(id)) throw ContractViolation("entity id out of range: " + std::to_string(to_index(id)));
  return entities_[to_index(id)];
}

const Edge& KnowledgeGraph::edge(EdgeIndex index) const {
  if (index >= edges_.size()) throw ContractViolation("edge index out of range: " + std::to_string(index));
  return edges_[index];
}

const std::string& KnowledgeGraph::predicate_name(PredicateId id) const {
  if (to_index(id) >= predicate_names_.size())
    throw ContractViolation("predicate id out of range: " + std::to_string(to_index(id)));
  return predicate_names_[to_index(id)];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
  auto it = name_index_.find(std::string(name));
  if (it == name_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<PredicateId> KnowledgeGraph::find_predicate(std::string_view name) const {
  auto it = predicate_index_.find(std::string(name));
  if (it == predicate_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const EntityId> KnowledgeGraph::entities_of_type(std::string_view type) const {
  auto it = type_index_.find(std::string(type));
  if (it == type_index_.end()) return {};
  return it->second;
}

std::vector<std::string> KnowledgeGraph::type_names() const {
  std::vector<std::string> out;
  out.reserve(type_index_.size());
  for (const auto& [type, _] : type_index_) out.push_back(type);
  std::sort(out.begin(), out.end());
  return out;
}

bool KnowledgeGraph::has_type(EntityId u, std::string_view type) const {
  const auto& types = entity(u).types;
  return std::find(types.begin(), types.end(), type) != types.end();
}

std::size_t KnowledgeGraph::Builder::TripleHash::operator()(
    const std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>& t) const noexcept {
  std::uint64_t h = std::get<0>(t);
  h = h * 0x9E3779B97F4A7C15ULL ^ std::get<1>(t);
  h = h * 0x9E3779B97F4A7C15ULL ^ std::get<2>(t);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

EntityId KnowledgeGraph::Builder::add_entity(std::string_view name, std::span<const std::string> types) {
  std::string key(name);
  auto it = name_index_.find(key);
  EntityId id;
  if (it == name_index_.end()) {
    id = static_cast<EntityId>(entities_.size());
    entities_.push_back(Entity{id, key, {}});
    name_index_.emplace(std::move(key), id);
  } else {
    id = it->second;
  }
  auto& own = entities_[to_index(id)].types;
  for (const auto& t : types) {
    if (std::find(own.begin(), own.end(), t) == own.end()) own.push_back(t);
  }
  return id;
}

PredicateId KnowledgeGraph::Builder::add_predicate(std::string_view name) {
  std::string key(name);
  auto it = predicate_index_.find(key);
  if (it != predicate_index_.end()) return it->second;
  const auto id = static_cast<PredicateId>(predicate_names_.size());
  predicate_names_.push_back(key);
  predicate_index_.emplace(std::move(key), id);
  return id;
}

bool KnowledgeGraph::Builder::add_triple(std::string_view head, std::string_view predicate, std::string_view tail) {
  const auto h = add_entity(head);
  const auto t = add_entity(tail);
  const auto p = add_predicate(predicate);
  auto key = std::make_tuple(static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(t),
                             static_cast<std::uint32_t>(p));
  if (seen_.contains(key)) return false;
  seen_.emplace(key, static_cast<EdgeIndex>(edges_.size()));
  edges_.push_back(Edge{h, t, p});
  return true;
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  if (entities_.empty()) throw LoadError("knowledge graph has no entities");

  KnowledgeGraph g;
  for (auto& e : entities_) {
    if (e.types.empty()) e.types.emplace_back(kPlaceholderType);
  }
  g.entities_ = std::move(entities_);
  g.edges_ = std::move(edges_);
  g.predicate_names_ = std::move(predicate_names_);
  g.name_index_ = std::move(name_index_);
  g.predicate_index_ = std::move(predicate_index_);

  const auto n = g.entities_.size();
  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : g.edges_) {
    ++degree[to_index(e.src)];
    if (e.dst != e.src) ++degree[to_index(e.dst)];
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.incidence_.resize(g.offsets_[n]);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (EdgeIndex i = 0; i < g.edges_.size(); ++i) {
    const auto& e = g.edges_[i];
    if (e.src == e.dst) {
      g.incidence_[cursor[to_index(e.src)]++] = Incidence{i, e.src, e.predicate, Direction::SelfLoop};
      continue;
    }
    g.incidence_[cursor[to_index(e.src)]++] = Incidence{i, e.dst, e.predicate, Direction::Out};
    g.incidence_[cursor[to_index(e.dst)]++] = Incidence{i, e.src, e.predicate, Direction::In};
  }

  for (const auto& e : g.entities_) {
    for (const auto& t : e.types) g.type_index_[t].push_back(e.id);
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return g.entities_[a].name < g.entities_[b].name; });
  g.name_rank_.resize(n);
  for (std::uint32_t r = 0; r < n; ++r) g.name_rank_[order[r]] = r;
  return g;
}

std::vector<Neighbor> neighbors(const KnowledgeGraph& g, EntityId u) {
  if (!g.contains(u)) throw ContractViolation("entity id out of range: " + std::to_string(to_index(u)));
  std::vector<Neighbor> out;
  for (const auto& inc : g.incidence(u)) out.push_back(Neighbor{g.edge(inc.edge), inc.edge, inc.other});
  return out;
}

double average_degree(const KnowledgeGraph& g) {
  if (g.entity_count() == 0) throw ContractViolation("average degree of an empty graph");
  return 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(g.entity_count());
}

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::optional<std::filesystem::path>& entities_path) {
  KnowledgeGraph::Builder builder;

  if (entities_path) {
    std::ifstream in(*entities_path);
    if (!in) throw LoadError("cannot open entities file: " + entities_path->string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(std::move(line));
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) {
        throw ParseError(entities_path->string(), lineno,
                         "expected 2 tab-separated columns, got " + std::to_string(cols.size()));
      }
      if (cols[0].empty()) throw ParseError(entities_path->string(), lineno, "empty entity name");
      auto types = split(cols[1], '|');
      std::erase_if(types, [](const std::string& t) { return t.empty(); });
      if (types.empty()) throw ParseError(entities_path->string(), lineno, "entity without types");
      builder.add_entity(cols[0], types);
    }
  }

  std::ifstream in(triples_path);
  if (!in) throw LoadError("cannot open triples file: " + triples_path.string());
  std::string line;
  std::size_t lineno = 0;
  std::size_t triples = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3) {
      throw ParseError(triples_path.string(), lineno,
                       "expected 3 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (cols[0].empty() || cols[1].empty() || cols[2].empty())
      throw ParseError(triples_path.string(), lineno, "empty field");
    builder.add_triple(cols[0], cols[1], cols[2]);
    ++triples;
  }
  if (triples == 0) throw LoadError("triples file contains no triples: " + triples_path.string());
  return std::move(builder).build();
}

void save_triples(const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& e : g.edges()) {
    out << g.entity(e.src).name << '\t' << g.predicate_name(e.predicate) << '\t' << g.entity(e.dst).name << '\n';
  }
}

void save_entities(const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& e : g.entities()) {
    out << e.name << '\t';
    for (std::size_t i = 0; i < e.types.size(); ++i) out << (i ? "|" : "") << e.types[i];
    out << '\n';
  }
}

}  // namespace sgq
