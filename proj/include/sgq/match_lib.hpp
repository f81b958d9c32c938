#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sgq/graph.hpp"

namespace sgq {

enum class TransformKind { Identical, Synonym, Abbreviation };
enum class LibraryTarget { Type, Name };

std::string_view to_string(TransformKind kind);

// Trim, collapse whitespace runs to one space, ASCII case-fold.
std::string normalize_term(std::string_view term);

struct LibraryEntry {
  std::string surface;
  TransformKind kind;
  std::vector<std::string> canonicals;
  LibraryTarget target;
};

/// Synonym and abbreviation surface forms for graph types and names.
/// Identical mappings are implicit and never stored.
class TransformationLibrary {
 public:
  void add(LibraryEntry entry);

  std::span<const LibraryEntry> entries() const noexcept { return entries_; }

  // Canonical values recorded for `surface` (normalized lookup), without the identical case.
  std::vector<std::string> canonicals(LibraryTarget target, std::string_view surface) const;

  // Surface forms that map onto `canonical`.
  std::vector<std::string> surfaces_for(LibraryTarget target, std::string_view canonical) const;

 private:
  std::vector<LibraryEntry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_surface_[2];
  std::unordered_map<std::string, std::vector<std::size_t>> by_canonical_[2];
};

// Rows: `surface<TAB>kind<TAB>canonical1|canonical2<TAB>type|name`.
TransformationLibrary load_library(const std::filesystem::path& path);

enum class NodeKind { Specific, Target, Wildcard };

struct QueryNodeSpec {
  NodeKind kind = NodeKind::Wildcard;
  std::vector<std::string> type_terms;
  std::optional<std::string> name_term;

  void validate() const;
};

/// The node-match relation phi bound to one graph. Construction resolves
/// every library canonical against the graph.
class NodeMatcher {
 public:
  // Throws ValidationError when a canonical value is absent from the graph.
  NodeMatcher(const KnowledgeGraph& g, const TransformationLibrary& lib);

  const KnowledgeGraph& graph() const noexcept { return *graph_; }
  const TransformationLibrary& library() const noexcept { return *library_; }

  // Sorted, duplicate-free candidate entities for a query node.
  std::vector<EntityId> matches(const QueryNodeSpec& spec) const;

  std::vector<std::string> resolve_types(std::string_view term) const;
  std::vector<std::string> resolve_names(std::string_view term) const;

 private:
  std::vector<std::string> resolve(LibraryTarget target, std::string_view term) const;

  const KnowledgeGraph* graph_;
  const TransformationLibrary* library_;
  std::unordered_map<std::string, std::vector<std::string>> graph_types_;  // normalized -> exact
  std::unordered_map<std::string, std::vector<std::string>> graph_names_;
};

// Canonical values in the library that the graph does not contain, as "type:X" / "name:X".
std::vector<std::string> missing_canonicals(const KnowledgeGraph& g, const TransformationLibrary& lib);

std::vector<EntityId> node_matches(const QueryNodeSpec& spec, const TransformationLibrary& lib,
                                   const KnowledgeGraph& g);

}  // namespace sgq
