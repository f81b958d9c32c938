#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace sgq {

enum class EntityId : std::uint32_t {};
enum class PredicateId : std::uint32_t {};
using EdgeIndex = std::uint32_t;

constexpr std::size_t to_index(EntityId id) noexcept { return static_cast<std::size_t>(id); }
constexpr std::size_t to_index(PredicateId id) noexcept { return static_cast<std::size_t>(id); }

inline constexpr std::string_view kPlaceholderType = "Thing";

struct Entity {
  EntityId id;
  std::string name;
  std::vector<std::string> types;
};

struct Edge {
  EntityId src;
  EntityId dst;
  PredicateId predicate;
};

enum class Direction : std::uint8_t { Out, In, SelfLoop };

// One incidence record per (entity, edge); self-loops appear once.
struct Incidence {
  EdgeIndex edge;
  EntityId other;
  PredicateId predicate;
  Direction direction;
};

struct Neighbor {
  Edge edge;
  EdgeIndex index;
  EntityId other;
};

/// Immutable entity graph with predicate-labelled directed edges and an
/// undirected incidence index. Entities carry a unique name and at least one
/// type label; types are node labels, never edges.
class KnowledgeGraph {
 public:
  class Builder;

  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t predicate_count() const noexcept { return predicate_names_.size(); }

  const Entity& entity(EntityId id) const;
  const Edge& edge(EdgeIndex index) const;
  std::span<const Entity> entities() const noexcept { return entities_; }
  std::span<const Edge> edges() const noexcept { return edges_; }

  const std::string& predicate_name(PredicateId id) const;
  std::span<const std::string> predicate_names() const noexcept { return predicate_names_; }

  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<PredicateId> find_predicate(std::string_view name) const;

  // Sorted ids of entities labelled with `type` (exact match).
  std::span<const EntityId> entities_of_type(std::string_view type) const;
  std::vector<std::string> type_names() const;

  // Unchecked fast path for the search loop.
  std::span<const Incidence> incidence(EntityId u) const noexcept {
    const auto i = to_index(u);
    return {incidence_.data() + offsets_[i], incidence_.data() + offsets_[i + 1]};
  }

  bool contains(EntityId u) const noexcept { return to_index(u) < entities_.size(); }
  bool has_type(EntityId u, std::string_view type) const;
  // Position of u's name in lexicographic name order.
  std::uint32_t name_rank(EntityId u) const noexcept { return name_rank_[to_index(u)]; }

 private:
  std::vector<Entity> entities_;
  std::vector<Edge> edges_;
  std::vector<std::string> predicate_names_;
  std::vector<std::size_t> offsets_;
  std::vector<Incidence> incidence_;
  std::vector<std::uint32_t> name_rank_;
  std::unordered_map<std::string, EntityId> name_index_;
  std::unordered_map<std::string, PredicateId> predicate_index_;
  std::unordered_map<std::string, std::vector<EntityId>> type_index_;
};

class KnowledgeGraph::Builder {
 public:
  // Adds or extends an entity; repeated names merge their type sets.
  EntityId add_entity(std::string_view name, std::span<const std::string> types = {});
  PredicateId add_predicate(std::string_view name);
  // Returns false when the triple was already present.
  bool add_triple(std::string_view head, std::string_view predicate, std::string_view tail);

  KnowledgeGraph build() &&;

 private:
  struct TripleHash {
    std::size_t operator()(const std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>& t) const noexcept;
  };

  std::vector<Entity> entities_;
  std::unordered_map<std::string, EntityId> name_index_;
  std::vector<std::string> predicate_names_;
  std::unordered_map<std::string, PredicateId> predicate_index_;
  std::vector<Edge> edges_;
  std::unordered_map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, EdgeIndex, TripleHash> seen_;
};

// Incident edges of `u` in both directions, ordered by edge index.
std::vector<Neighbor> neighbors(const KnowledgeGraph& g, EntityId u);

double average_degree(const KnowledgeGraph& g);

// Triples: `head<TAB>predicate<TAB>tail`. Entities: `name<TAB>type1|type2|...`.
KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::optional<std::filesystem::path>& entities_path = std::nullopt);

void save_triples(const KnowledgeGraph& g, const std::filesystem::path& path);
void save_entities(const KnowledgeGraph& g, const std::filesystem::path& path);

// Splits on a single-character separator, keeping empty fields.
std::vector<std::string> split(std::string_view line, char sep);

}  // namespace sgq
