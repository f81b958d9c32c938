#include "sgq/match_lib.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "sgq/error.hpp"

namespace sgq {

namespace {

std::size_t slot(LibraryTarget target) { return target == LibraryTarget::Type ? 0 : 1; }

std::unordered_map<std::string, std::vector<std::string>> normalized_index(std::vector<std::string> values) {
  std::unordered_map<std::string, std::vector<std::string>> index;
  for (auto& v : values) index[normalize_term(v)].push_back(std::move(v));
  return index;
}

}  // namespace

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::Identical: return "Identical";
    case TransformKind::Synonym: return "Synonym";
    case TransformKind::Abbreviation: return "Abbreviation";
  }
  return "?";
}

std::string normalize_term(std::string_view term) {
  std::string out;
  out.reserve(term.size());
  bool pending_space = false;
  for (char c : term) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : c);
  }
  return out;
}

void TransformationLibrary::add(LibraryEntry entry) {
  const auto s = slot(entry.target);
  const auto index = entries_.size();
  by_surface_[s][normalize_term(entry.surface)].push_back(index);
  for (const auto& c : entry.canonicals) by_canonical_[s][normalize_term(c)].push_back(index);
  entries_.push_back(std::move(entry));
}

std::vector<std::string> TransformationLibrary::canonicals(LibraryTarget target, std::string_view surface) const {
  std::vector<std::string> out;
  const auto& index = by_surface_[slot(target)];
  auto it = index.find(normalize_term(surface));
  if (it == index.end()) return out;
  for (auto i : it->second) {
    for (const auto& c : entries_[i].canonicals) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> TransformationLibrary::surfaces_for(LibraryTarget target, std::string_view canonical) const {
  std::vector<std::string> out;
  const auto& index = by_canonical_[slot(target)];
  auto it = index.find(normalize_term(canonical));
  if (it == index.end()) return out;
  for (auto i : it->second) out.push_back(entries_[i].surface);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TransformationLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open transformation library: " + path.string());
  TransformationLibrary lib;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw ParseError(path.string(), lineno, "expected 4 tab-separated columns");
    LibraryEntry entry;
    entry.surface = cols[0];
    if (cols[1] == "Identical") {
      entry.kind = TransformKind::Identical;
    } else if (cols[1] == "Synonym") {
      entry.kind = TransformKind::Synonym;
    } else if (cols[1] == "Abbreviation") {
      entry.kind = TransformKind::Abbreviation;
    } else {
      throw ParseError(path.string(), lineno, "unknown transformation kind `" + cols[1] + "`");
    }
    entry.canonicals = split(cols[2], '|');
    std::erase_if(entry.canonicals, [](const std::string& c) { return c.empty(); });
    if (entry.surface.empty() || entry.canonicals.empty())
      throw ParseError(path.string(), lineno, "empty surface form or canonical list");
    if (cols[3] == "type") {
      entry.target = LibraryTarget::Type;
    } else if (cols[3] == "name") {
      entry.target = LibraryTarget::Name;
    } else {
      throw ParseError(path.string(), lineno, "target column must be `type` or `name`");
    }
    lib.add(std::move(entry));
  }
  return lib;
}

void QueryNodeSpec::validate() const {
  switch (kind) {
    case NodeKind::Specific:
      if (!name_term || name_term->empty()) throw ValidationError("specific node requires a name");
      if (type_terms.empty()) throw ValidationError("specific node requires at least one type");
      break;
    case NodeKind::Target:
      if (type_terms.empty()) throw ValidationError("target node requires at least one type");
      if (name_term) throw ValidationError("target node must not carry a name");
      break;
    case NodeKind::Wildcard:
      if (!type_terms.empty() || name_term) throw ValidationError("wildcard node carries no type or name");
      break;
  }
}

std::vector<std::string> missing_canonicals(const KnowledgeGraph& g, const TransformationLibrary& lib) {
  const auto types = normalized_index(g.type_names());
  std::vector<std::string> names;
  for (const auto& e : g.entities()) names.push_back(e.name);
  const auto name_index = normalized_index(std::move(names));

  std::set<std::string> missing;
  for (const auto& entry : lib.entries()) {
    const auto& index = entry.target == LibraryTarget::Type ? types : name_index;
    for (const auto& c : entry.canonicals) {
      if (!index.contains(normalize_term(c))) {
        missing.insert((entry.target == LibraryTarget::Type ? "type:" : "name:") + c);
      }
    }
  }
  return {missing.begin(), missing.end()};
}

NodeMatcher::NodeMatcher(const KnowledgeGraph& g, const TransformationLibrary& lib)
    : graph_(&g), library_(&lib), graph_types_(normalized_index(g.type_names())) {
  std::vector<std::string> names;
  names.reserve(g.entity_count());
  for (const auto& e : g.entities()) names.push_back(e.name);
  graph_names_ = normalized_index(std::move(names));

  const auto missing = missing_canonicals(g, lib);
  if (!missing.empty()) {
    std::string msg = "transformation library refers to values absent from the graph:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
}

std::vector<std::string> NodeMatcher::resolve(LibraryTarget target, std::string_view term) const {
  const auto& index = target == LibraryTarget::Type ? graph_types_ : graph_names_;
  std::vector<std::string> out;
  auto take = [&](std::string_view value) {
    auto it = index.find(normalize_term(value));
    if (it != index.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  };
  take(term);
  for (const auto& c : library_->canonicals(target, term)) take(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> NodeMatcher::resolve_types(std::string_view term) const {
  return resolve(LibraryTarget::Type, term);
}

std::vector<std::string> NodeMatcher::resolve_names(std::string_view term) const {
  return resolve(LibraryTarget::Name, term);
}

std::vector<EntityId> NodeMatcher::matches(const QueryNodeSpec& spec) const {
  std::vector<EntityId> out;
  const auto& g = *graph_;
  if (spec.kind == NodeKind::Wildcard) {
    out.reserve(g.entity_count());
    for (const auto& e : g.entities()) out.push_back(e.id);
    return out;
  }

  std::vector<std::string> types;
  for (const auto& t : spec.type_terms) {
    auto resolved = resolve_types(t);
    types.insert(types.end(), resolved.begin(), resolved.end());
  }
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());

  if (spec.kind == NodeKind::Target) {
    for (const auto& t : types) {
      auto ids = g.entities_of_type(t);
      out.insert(out.end(), ids.begin(), ids.end());
    }
  } else {
    if (!spec.name_term) return out;
    for (const auto& name : resolve_names(*spec.name_term)) {
      auto id = g.find_entity(name);
      if (!id) continue;
      const auto& own = g.entity(*id).types;
      const bool typed = std::any_of(own.begin(), own.end(), [&](const std::string& t) {
        return std::binary_search(types.begin(), types.end(), t);
      });
      if (typed) out.push_back(*id);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<EntityId> node_matches(const QueryNodeSpec& spec, const TransformationLibrary& lib,
                                   const KnowledgeGraph& g) {
  return NodeMatcher(g, lib).matches(spec);
}

}  // namespace sgq
