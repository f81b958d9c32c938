#include "sgq/query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "sgq/error.hpp"

namespace sgq {

using nlohmann::json;

std::size_t QueryGraph::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  throw ValidationError("query edge refers to unknown node `" + std::string(id) + "`");
}

std::size_t QueryGraph::other_end(std::size_t edge, std::size_t node) const {
  const auto& e = edges.at(edge);
  if (e.src == node) return e.dst;
  if (e.dst == node) return e.src;
  throw ContractViolation("query node is not an endpoint of the edge");
}

namespace {

NodeKind parse_kind(const std::string& s, const std::string& id) {
  if (s == "specific") return NodeKind::Specific;
  if (s == "target") return NodeKind::Target;
  if (s == "wildcard") return NodeKind::Wildcard;
  throw ValidationError("query node `" + id + "`: unknown kind `" + s + "`");
}

std::string_view kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Specific: return "specific";
    case NodeKind::Target: return "target";
    case NodeKind::Wildcard: return "wildcard";
  }
  return "?";
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw ValidationError(where + ": missing string field `" + key + "`");
  return it->get<std::string>();
}

}  // namespace

QueryGraph parse_query(const json& doc, const SimilarityModel* vocab) {
  if (!doc.is_object()) throw ValidationError("query document must be an object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw ValidationError("query needs a `nodes` array");
  if (!doc.contains("edges") || !doc["edges"].is_array()) throw ValidationError("query needs an `edges` array");

  QueryGraph q;
  std::set<std::string> ids;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_object()) throw ValidationError("query node must be an object");
    QueryNode node;
    node.id = get_string(n, "id", "query node");
    const auto where = "query node `" + node.id + "`";
    if (!ids.insert(node.id).second) throw ValidationError(where + ": duplicate id");
    node.spec.kind = parse_kind(get_string(n, "kind", where), node.id);
    if (n.contains("types")) {
      if (!n["types"].is_array()) throw ValidationError(where + ": `types` must be an array");
      for (const auto& t : n["types"]) {
        if (!t.is_string()) throw ValidationError(where + ": type terms must be strings");
        node.spec.type_terms.push_back(t.get<std::string>());
      }
    }
    if (n.contains("name") && !n["name"].is_null()) node.spec.name_term = get_string(n, "name", where);
    try {
      node.spec.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    q.nodes.push_back(std::move(node));
  }

  for (const auto& e : doc["edges"]) {
    if (!e.is_object()) throw ValidationError("query edge must be an object");
    const auto src = get_string(e, "src", "query edge");
    const auto dst = get_string(e, "dst", "query edge");
    const auto where = "query edge " + src + "->" + dst;
    QueryEdge edge{q.node_index(src), q.node_index(dst), get_string(e, "predicate", where)};
    if (edge.src == edge.dst) throw ValidationError(where + ": self-loop");
    if (edge.predicate.empty()) throw ValidationError(where + ": empty predicate");
    if (vocab && !vocab->find(edge.predicate))
      throw ValidationError(where + ": unknown predicate `" + edge.predicate + "`");
    q.edges.push_back(std::move(edge));
  }

  if (q.edges.empty()) throw ValidationError("query has no edges");
  if (q.edges.size() > kMaxQueryEdges)
    throw ValidationError("query has more than " + std::to_string(kMaxQueryEdges) + " edges");
  const bool has_specific = std::any_of(q.nodes.begin(), q.nodes.end(),
                                        [](const QueryNode& n) { return n.spec.kind == NodeKind::Specific; });
  if (!has_specific) throw ValidationError("query has no specific node");
  const bool has_target = std::any_of(q.nodes.begin(), q.nodes.end(),
                                      [](const QueryNode& n) { return n.spec.kind == NodeKind::Target; });
  if (!has_target) throw ValidationError("query has no target node");

  // connectivity
  std::vector<char> seen(q.nodes.size(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (std::size_t i = 0; i < q.edges.size(); ++i) {
      const auto& e = q.edges[i];
      if (e.src != v && e.dst != v) continue;
      const auto w = q.other_end(i, v);
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (!seen[i]) throw ValidationError("query is disconnected: node `" + q.nodes[i].id + "` is unreachable");
  }
  return q;
}

QueryGraph load_query(const std::filesystem::path& path, const SimilarityModel* vocab) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open query file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_query(doc, vocab);
}

json to_json(const QueryGraph& q) {
  json doc{{"nodes", json::array()}, {"edges", json::array()}};
  for (const auto& n : q.nodes) {
    json node{{"id", n.id}, {"kind", kind_name(n.spec.kind)}};
    if (!n.spec.type_terms.empty()) node["types"] = n.spec.type_terms;
    if (n.spec.name_term) node["name"] = *n.spec.name_term;
    doc["nodes"].push_back(std::move(node));
  }
  for (const auto& e : q.edges) {
    doc["edges"].push_back({{"src", q.nodes[e.src].id}, {"dst", q.nodes[e.dst].id}, {"predicate", e.predicate}});
  }
  return doc;
}

double cost_formula(std::size_t start_matches, double avg_degree, std::size_t edges) {
  if (start_matches == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(start_matches) * std::pow(avg_degree, static_cast<double>(edges));
}

double estimate_cost(const SubQueryGraph& sub, const QueryGraph& q, const KnowledgeGraph& g,
                     const NodeMatcher& matcher) {
  const auto phi = matcher.matches(q.nodes.at(sub.start()).spec);
  return cost_formula(phi.size(), average_degree(g), sub.edges.size());
}

std::vector<SubQueryGraph> pivot_paths(const QueryGraph& q, std::size_t pivot) {
  std::vector<SubQueryGraph> out;
  std::vector<char> on_path(q.nodes.size(), 0);
  SubQueryGraph cur;

  auto dfs = [&](auto&& self, std::size_t v) -> void {
    if (v == pivot) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = 0; i < q.edges.size(); ++i) {
      const auto& e = q.edges[i];
      if (e.src != v && e.dst != v) continue;
      const auto w = q.other_end(i, v);
      if (on_path[w]) continue;
      on_path[w] = 1;
      cur.nodes.push_back(w);
      cur.edges.push_back(i);
      self(self, w);
      cur.nodes.pop_back();
      cur.edges.pop_back();
      on_path[w] = 0;
    }
  };

  for (std::size_t s = 0; s < q.nodes.size(); ++s) {
    if (s == pivot || q.nodes[s].spec.kind != NodeKind::Specific) continue;
    cur = SubQueryGraph{{s}, {}};
    on_path[s] = 1;
    dfs(dfs, s);
    on_path[s] = 0;
  }
  std::sort(out.begin(), out.end(),
            [](const SubQueryGraph& a, const SubQueryGraph& b) { return a.edges < b.edges; });
  return out;
}

Decomposition decompose(const QueryGraph& q, const std::function<DecompositionCost(const SubQueryGraph&)>& cost) {
  const auto m = q.edges.size();
  if (m == 0 || m > kMaxQueryEdges) throw ValidationError("query edge count out of range");
  const std::uint32_t full = (std::uint32_t{1} << m) - 1;

  std::optional<Decomposition> best;
  for (std::size_t pivot = 0; pivot < q.nodes.size(); ++pivot) {
    if (q.nodes[pivot].spec.kind != NodeKind::Target) continue;
    const auto paths = pivot_paths(q, pivot);
    if (paths.empty()) continue;
    std::vector<std::uint32_t> masks;
    std::vector<DecompositionCost> costs;
    for (const auto& p : paths) {
      std::uint32_t mask = 0;
      for (auto e : p.edges) mask |= std::uint32_t{1} << e;
      masks.push_back(mask);
      costs.push_back(cost(p));
    }

    // f[mask]: cheapest cover of the edges missing from mask; choice[mask]: path taken.
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::optional<DecompositionCost>> f(std::size_t{full} + 1);
    std::vector<std::size_t> choice(std::size_t{full} + 1, kNone);
    std::vector<char> done(std::size_t{full} + 1, 0);
    auto solve = [&](auto&& self, std::uint32_t mask) -> std::optional<DecompositionCost> {
      if (mask == full) return DecompositionCost{};
      if (done[mask]) return f[mask];
      done[mask] = 1;
      std::uint32_t first = 0;
      while (mask & (std::uint32_t{1} << first)) ++first;
      for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!(masks[i] & (std::uint32_t{1} << first))) continue;
        auto rest = self(self, mask | masks[i]);
        if (!rest) continue;
        DecompositionCost total = costs[i];
        total += *rest;
        if (!f[mask] || total < *f[mask]) {
          f[mask] = total;
          choice[mask] = i;
        }
      }
      return f[mask];
    };

    auto total = solve(solve, 0);
    if (!total) continue;
    if (best && !(*total < best->cost)) continue;
    Decomposition d;
    d.pivot = pivot;
    d.cost = *total;
    for (std::uint32_t mask = 0; mask != full; mask |= masks[choice[mask]]) d.sub_queries.push_back(paths[choice[mask]]);
    std::sort(d.sub_queries.begin(), d.sub_queries.end(),
              [](const SubQueryGraph& a, const SubQueryGraph& b) { return a.edges < b.edges; });
    best = std::move(d);
  }
  if (!best) throw ValidationError("unsupported query shape: no target pivot is reachable by paths covering every edge");
  return *best;
}

Decomposition decompose(const QueryGraph& q, const KnowledgeGraph& g, const NodeMatcher& matcher) {
  const double dbar = average_degree(g);
  std::map<std::size_t, std::size_t> phi_size;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (q.nodes[i].spec.kind == NodeKind::Specific) phi_size[i] = matcher.matches(q.nodes[i].spec).size();
  }
  return decompose(q, [&](const SubQueryGraph& sub) {
    const auto n = phi_size.at(sub.start());
    if (n == 0) return DecompositionCost{1, 0.0};
    return DecompositionCost{0, cost_formula(n, dbar, sub.edges.size())};
  });
}

}  // namespace sgq
