#include "sgq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "sgq/error.hpp"

namespace sgq {

namespace {

bool oracle_better(const Match& a, const Match& b) {
  if (a.psi > b.psi) return true;
  if (a.psi < b.psi) return false;
  if (a.edges.size() != b.edges.size()) return a.edges.size() < b.edges.size();
  if (a.nodes != b.nodes) return std::lexicographical_compare(a.nodes.begin(), a.nodes.end(), b.nodes.begin(), b.nodes.end());
  return std::lexicographical_compare(a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end());
}

class Enumerator {
 public:
  Enumerator(const ResolvedSubQuery& sub, const KnowledgeGraph& g, const SimilarityModel& model, std::size_t nhat,
             std::size_t max_paths)
      : sub_(sub), g_(g), model_(model), nhat_(nhat), max_paths_(max_paths) {
    for (const auto& name : g.predicate_names()) vocab_.push_back(model.find(name));
  }

  double w(std::size_t j, EdgeIndex e) const {
    const auto p = vocab_[to_index(g_.edge(e).predicate)];
    return p ? model_.weight(sub_.predicates[j], *p) : 0.0;
  }

  // Best segmentation by trying every placement of the m - 1 cuts.
  std::optional<Match> best_alignment(const std::vector<EntityId>& nodes, const std::vector<EdgeIndex>& edges) const {
    const std::size_t n = edges.size();
    const std::size_t m = sub_.predicates.size();
    if (n < m) return std::nullopt;
    std::optional<Match> best;
    std::vector<std::size_t> cuts(m);  // cuts[j] = first edge of segment j
    auto place = [&](auto&& self, std::size_t j) -> void {
      if (j == m) {
        std::vector<std::size_t> seg(n);
        for (std::size_t s = 0; s < m; ++s) {
          const auto end = s + 1 < m ? cuts[s + 1] : n;
          for (std::size_t i = cuts[s]; i < end; ++i) seg[i] = s;
        }
        std::vector<double> weights(n);
        double prod = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          weights[i] = w(seg[i], edges[i]);
          prod *= weights[i];
        }
        if (!(prod > 0.0)) return;
        if (best && !(prod > best->psi)) return;
        Match cand;
        cand.nodes = nodes;
        cand.edges = edges;
        cand.segment = std::move(seg);
        cand.weights = std::move(weights);
        cand.psi = prod;  // product for now, root taken by the caller
        best = std::move(cand);
        return;
      }
      const std::size_t lo = j == 0 ? 0 : cuts[j - 1] + 1;
      const std::size_t hi = j == 0 ? 0 : n - (m - j);
      for (std::size_t c = lo; c <= hi; ++c) {
        if (j > 0 && !sub_.filters[j].contains(nodes[c])) continue;
        cuts[j] = c;
        self(self, j + 1);
      }
    };
    place(place, 0);
    if (best) best->psi = std::pow(best->psi, 1.0 / static_cast<double>(n));
    return best;
  }

  // Complete match for this path, if it is one.
  std::optional<Match> complete(const std::vector<EntityId>& nodes, const std::vector<EdgeIndex>& edges) const {
    if (edges.empty() || !sub_.targets().contains(nodes.back())) return std::nullopt;
    return best_alignment(nodes, edges);
  }

  void walk(std::vector<EntityId>& nodes, std::vector<EdgeIndex>& edges, std::vector<Match>& out) {
    if (++visited_ > max_paths_) throw OracleError("path enumeration exceeded its budget");
    if (auto m = complete(nodes, edges)) {
      out.push_back(std::move(*m));
      return;  // complete matches are not extended
    }
    if (edges.size() >= nhat_) return;
    for (const auto& nb : neighbors(g_, nodes.back())) {
      if (std::find(nodes.begin(), nodes.end(), nb.other) != nodes.end()) continue;
      nodes.push_back(nb.other);
      edges.push_back(nb.index);
      walk(nodes, edges, out);
      nodes.pop_back();
      edges.pop_back();
    }
  }

 private:
  const ResolvedSubQuery& sub_;
  const KnowledgeGraph& g_;
  const SimilarityModel& model_;
  std::size_t nhat_;
  std::size_t max_paths_;
  std::size_t visited_ = 0;
  std::vector<std::optional<std::size_t>> vocab_;
};

}  // namespace

std::vector<Match> oracle_path_enum(const ResolvedSubQuery& sub, const KnowledgeGraph& g, const SimilarityModel& model,
                                    double tau, std::size_t nhat, OracleLimits limits) {
  if (g.entity_count() > limits.max_nodes) throw OracleError("graph too large for path enumeration");
  if (sub.predicates.empty() || sub.filters.size() != sub.predicates.size() + 1)
    throw OracleError("malformed sub-query");
  Enumerator en(sub, g, model, nhat, limits.max_paths);
  std::vector<Match> all;
  for (auto s : sub.seeds) {
    std::vector<EntityId> nodes{s};
    std::vector<EdgeIndex> edges;
    en.walk(nodes, edges, all);
  }
  std::vector<Match> out;
  for (auto& m : all) {
    if (m.psi >= tau) out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), oracle_better);
  return out;
}

std::vector<Match> oracle_completions(const ResolvedSubQuery& sub, const KnowledgeGraph& g,
                                      const SimilarityModel& model, std::span<const EntityId> nodes,
                                      std::span<const EdgeIndex> edges, std::size_t nhat) {
  Enumerator en(sub, g, model, nhat, std::numeric_limits<std::size_t>::max());
  std::vector<EntityId> n(nodes.begin(), nodes.end());
  std::vector<EdgeIndex> e(edges.begin(), edges.end());
  std::vector<Match> out;
  en.walk(n, e, out);
  return out;
}

std::vector<OracleAnswer> oracle_full_join(std::span<const MatchSet> sets, std::size_t k,
                                           const std::function<bool(EntityId, EntityId)>& pivot_less) {
  std::map<EntityId, std::vector<const Match*>> table;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (const auto& m : sets[i]) {
      auto& row = table[m.pivot()];
      row.resize(sets.size(), nullptr);
      if (!row[i] || oracle_better(m, *row[i])) row[i] = &m;
    }
  }
  std::vector<OracleAnswer> out;
  for (auto& [pivot, row] : table) {
    OracleAnswer a{pivot, 0.0, row};
    for (const auto* m : row) {
      if (m) a.score += m->psi;
    }
    out.push_back(std::move(a));
  }
  std::sort(out.begin(), out.end(), [&](const OracleAnswer& a, const OracleAnswer& b) {
    if (a.score != b.score) return a.score > b.score;
    return pivot_less ? pivot_less(a.pivot, b.pivot) : a.pivot < b.pivot;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

OracleDecomposition oracle_decompose(const QueryGraph& q,
                                     const std::function<DecompositionCost(const SubQueryGraph&)>& cost) {
  const auto m = q.edges.size();
  std::optional<OracleDecomposition> best;
  for (std::size_t pivot = 0; pivot < q.nodes.size(); ++pivot) {
    if (q.nodes[pivot].spec.kind != NodeKind::Target) continue;

    std::vector<SubQueryGraph> paths;
    for (std::size_t s = 0; s < q.nodes.size(); ++s) {
      if (s == pivot || q.nodes[s].spec.kind != NodeKind::Specific) continue;
      SubQueryGraph cur{{s}, {}};
      auto dfs = [&](auto&& self) -> void {
        const auto v = cur.nodes.back();
        if (v == pivot) {
          paths.push_back(cur);
          return;
        }
        for (std::size_t e = 0; e < m; ++e) {
          std::size_t w;
          if (q.edges[e].src == v) {
            w = q.edges[e].dst;
          } else if (q.edges[e].dst == v) {
            w = q.edges[e].src;
          } else {
            continue;
          }
          if (std::find(cur.nodes.begin(), cur.nodes.end(), w) != cur.nodes.end()) continue;
          cur.nodes.push_back(w);
          cur.edges.push_back(e);
          self(self);
          cur.nodes.pop_back();
          cur.edges.pop_back();
        }
      };
      dfs(dfs);
    }
    if (paths.empty()) continue;
    if (paths.size() > 24) throw OracleError("too many candidate paths for subset enumeration");

    std::vector<std::uint64_t> masks;
    std::vector<DecompositionCost> costs;
    for (const auto& p : paths) {
      std::uint64_t mask = 0;
      for (auto e : p.edges) mask |= std::uint64_t{1} << e;
      masks.push_back(mask);
      costs.push_back(cost(p));
    }
    const std::uint64_t full = (std::uint64_t{1} << m) - 1;
    for (std::uint64_t subset = 1; subset < (std::uint64_t{1} << paths.size()); ++subset) {
      std::uint64_t covered = 0;
      DecompositionCost total;
      for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!(subset >> i & 1)) continue;
        covered |= masks[i];
        total += costs[i];
      }
      if (covered != full) continue;
      if (best && !(total < best->cost)) continue;
      OracleDecomposition d{pivot, total, {}};
      for (std::size_t i = 0; i < paths.size(); ++i) {
        if (subset >> i & 1) d.sub_queries.push_back(paths[i]);
      }
      best = std::move(d);
    }
  }
  if (!best) throw OracleError("no pivot admits a path cover");
  std::sort(best->sub_queries.begin(), best->sub_queries.end(),
            [](const SubQueryGraph& a, const SubQueryGraph& b) { return a.edges < b.edges; });
  return *best;
}

}  // namespace sgq
