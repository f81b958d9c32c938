#include "sgq/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <queue>

#include "sgq/error.hpp"

namespace sgq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Absorbs rounding in the estimate bound; matches themselves use exact comparisons.
constexpr double kSlack = 1e-12;

}  // namespace

NodeFilter NodeFilter::of(std::size_t entity_count, std::span<const EntityId> ids) {
  NodeFilter f;
  f.member.assign(entity_count, 0);
  for (auto id : ids) {
    if (to_index(id) < entity_count) f.member[to_index(id)] = 1;
  }
  return f;
}

ResolvedSubQuery resolve_sub_query(const SubQueryGraph& sub, const QueryGraph& q, const NodeMatcher& matcher,
                                   const SimilarityModel& model) {
  if (sub.edges.empty() || sub.nodes.size() != sub.edges.size() + 1)
    throw ContractViolation("malformed sub-query");
  const auto& g = matcher.graph();
  ResolvedSubQuery r;
  for (auto e : sub.edges) {
    const auto& pred = q.edges.at(e).predicate;
    auto idx = model.find(pred);
    if (!idx) throw LookupError("similarity model has no predicate `" + pred + "`");
    r.predicates.push_back(*idx);
  }
  for (std::size_t pos = 0; pos < sub.nodes.size(); ++pos) {
    const auto& spec = q.nodes.at(sub.nodes[pos]).spec;
    if (spec.kind == NodeKind::Wildcard && pos != 0) {
      r.filters.push_back(NodeFilter::any());
      continue;
    }
    auto ids = matcher.matches(spec);
    if (pos == 0) r.seeds = ids;
    r.filters.push_back(NodeFilter::of(g.entity_count(), ids));
  }
  return r;
}

SemanticGraph::SemanticGraph(const KnowledgeGraph& g, const SimilarityModel& model,
                             std::vector<std::size_t> query_predicates)
    : graph_(&g),
      model_(&model),
      query_predicates_(std::move(query_predicates)),
      binding_(bind_predicates(g, model)),
      weights_(query_predicates_.size() * g.predicate_count(), kNaN),
      max_weights_(g.predicate_count(), kNaN) {}

double SemanticGraph::weight(std::size_t query_edge, PredicateId p) {
  auto& slot = weights_[query_edge * graph_->predicate_count() + to_index(p)];
  if (std::isnan(slot)) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& bound = binding_[to_index(p)];
    slot = bound ? model_->weight(query_predicates_[query_edge], *bound) : 0.0;
    ++misses_;
    memo_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return slot;
}

double SemanticGraph::max_weight(PredicateId p) {
  auto& slot = max_weights_[to_index(p)];
  if (std::isnan(slot)) {
    double best = 0.0;
    for (std::size_t j = 0; j < query_predicates_.size(); ++j) best = std::max(best, weight(j, p));
    slot = best;
  }
  return slot;
}

double SemanticGraph::max_adjacent_weight(EntityId u) {
  if (adjacent_.empty()) adjacent_.assign(graph_->entity_count(), kNaN);
  auto& slot = adjacent_[to_index(u)];
  if (std::isnan(slot)) {
    double best = 0.0;
    for (const auto& inc : graph_->incidence(u)) best = std::max(best, max_weight(inc.predicate));
    slot = best;
  }
  return slot;
}

double max_adjacent_weight(const KnowledgeGraph& g, const SimilarityModel& model, EntityId u,
                           const ResolvedSubQuery& sub) {
  if (!g.contains(u)) throw ContractViolation("entity id out of range");
  SemanticGraph sg(g, model, sub.predicates);
  return sg.max_adjacent_weight(u);
}

double estimate_pss(double best_product, double m_u, std::size_t nhat) {
  if (nhat == 0) throw ContractViolation("nhat must be positive");
  const double x = best_product * m_u;
  if (x <= 0.0) return 0.0;
  return std::pow(x, 1.0 / static_cast<double>(nhat));
}

void SearchConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0, 1]");
  if (nhat < 1) throw ValidationError("nhat must be at least 1");
  if (k < 1) throw ValidationError("k must be at least 1");
  if (overfetch < 1) throw ValidationError("overfetch must be at least 1");
  if (!(alert_ratio > 0.0 && alert_ratio <= 100.0)) throw ValidationError("alert ratio must lie in (0, 100]");
  if (time_bound && !(*time_bound >= 0.0)) throw ValidationError("time bound must be non-negative");
  if (!(assembly_tick >= 0.0)) throw ValidationError("assembly tick must be non-negative");
}

bool time_estimate(std::span<const ProgressReport> reports, const SearchConfig& cfg) {
  if (!cfg.time_bound) return false;
  double longest = 0.0;
  double join = 0.0;
  for (const auto& r : reports) {
    longest = std::max(longest, r.elapsed);
    join += static_cast<double>(r.matches) * cfg.assembly_tick;
  }
  return longest + join >= *cfg.time_bound * cfg.alert_ratio / 100.0;
}

std::optional<Match> align_path(const ResolvedSubQuery& sub, SemanticGraph& sg, std::span<const EntityId> nodes,
                                std::span<const EdgeIndex> edges) {
  const auto n = edges.size();
  const auto m = sub.edge_count();
  if (n == 0 || nodes.size() != n + 1) throw ContractViolation("malformed path");
  if (!sub.filters.front().contains(nodes.front()) || !sub.targets().contains(nodes.back())) return std::nullopt;
  const auto& g = sg.graph();

  std::vector<double> dp(n * m, 0.0);
  std::vector<std::size_t> from(n * m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = g.edge(edges[i]).predicate;
    for (std::size_t j = 0; j < m; ++j) {
      double best;
      std::size_t arg = j;
      if (i == 0) {
        best = j == 0 ? 1.0 : 0.0;
      } else {
        best = dp[(i - 1) * m + j];
        if (j > 0 && sub.filters[j].contains(nodes[i])) {
          const double adv = dp[(i - 1) * m + j - 1];
          if (adv > best) {
            best = adv;
            arg = j - 1;
          }
        }
      }
      dp[i * m + j] = best * sg.weight(j, p);
      from[i * m + j] = arg;
    }
  }
  const double product = dp[(n - 1) * m + m - 1];
  if (!(product > 0.0)) return std::nullopt;

  Match out;
  out.nodes.assign(nodes.begin(), nodes.end());
  out.edges.assign(edges.begin(), edges.end());
  out.segment.assign(n, 0);
  out.weights.assign(n, 0.0);
  std::size_t j = m - 1;
  for (std::size_t i = n; i-- > 0;) {
    out.segment[i] = j;
    out.weights[i] = sg.weight(j, g.edge(edges[i]).predicate);
    j = from[i * m + j];
  }
  out.psi = pss_from_product(product, n);
  return out;
}

namespace {

/// Partial paths stored in flat pools, plus the frontier heap over them.
class SearchCore {
 public:
  SearchCore(const ResolvedSubQuery& sub, SemanticGraph& sg, const SearchConfig& cfg)
      : sub_(sub), sg_(sg), cfg_(cfg), m_(sub.edge_count()) {
    if (m_ == 0 || sub.filters.size() != m_ + 1) throw ContractViolation("malformed resolved sub-query");
    if (sg.query_edges() != m_) throw ContractViolation("semantic graph does not match the sub-query");
  }

  SearchStats stats;

  void seed() {
    for (auto s : sub_.seeds) {
      const double key = estimate_pss(1.0, sg_.max_adjacent_weight(s), cfg_.nhat);
      if (key < cfg_.tau - kSlack) {
        ++stats.prunes;
        continue;
      }
      Entry e{key, 0, false, nodes_.size(), edges_.size(), align_.size()};
      nodes_.push_back(s);
      align_.insert(align_.end(), m_, 0.0);
      push(add(e));
    }
  }

  bool empty() const { return heap_.empty(); }
  double top_key() const { return entries_[heap_.front()].key; }
  std::size_t frontier_size() const { return heap_.size(); }

  std::size_t pop() {
    std::pop_heap(heap_.begin(), heap_.end(), [this](std::size_t a, std::size_t b) { return worse_than(a, b); });
    const auto idx = heap_.back();
    heap_.pop_back();
    ++stats.pops;
    return idx;
  }

  void push(std::size_t idx) {
    heap_.push_back(idx);
    std::push_heap(heap_.begin(), heap_.end(), [this](std::size_t a, std::size_t b) { return worse_than(a, b); });
    ++stats.pushes;
    stats.max_frontier = std::max(stats.max_frontier, heap_.size());
  }

  bool complete(std::size_t idx) const { return entries_[idx].complete; }
  double key(std::size_t idx) const { return entries_[idx].key; }

  std::span<const EntityId> nodes(std::size_t idx) const {
    const auto& e = entries_[idx];
    return {nodes_.data() + e.node_off, e.hops + 1};
  }
  std::span<const EdgeIndex> edges(std::size_t idx) const {
    const auto& e = entries_[idx];
    return {edges_.data() + e.edge_off, e.hops};
  }

  // Generates the children of idx; each surviving child goes to on_child.
  template <typename OnChild>
  void expand(std::size_t idx, OnChild&& on_child) {
    ++stats.expansions;
    const Entry parent = entries_[idx];
    const auto u = nodes_[parent.node_off + parent.hops];
    const auto& g = sg_.graph();
    std::vector<double> next(m_);

    for (const auto& inc : g.incidence(u)) {
      const auto v = inc.other;
      const auto path = nodes(idx);
      if (std::find(path.begin(), path.end(), v) != path.end()) continue;
      if (sg_.max_weight(inc.predicate) == 0.0) continue;

      const double* prev = align_.data() + parent.align_off;
      double best = 0.0;
      for (std::size_t j = 0; j < m_; ++j) {
        double base;
        if (parent.hops == 0) {
          base = j == 0 ? 1.0 : 0.0;
        } else {
          base = prev[j];
          if (j > 0 && sub_.filters[j].contains(u)) base = std::max(base, prev[j - 1]);
        }
        next[j] = base > 0.0 ? base * sg_.weight(j, inc.predicate) : 0.0;
        best = std::max(best, next[j]);
      }
      if (best == 0.0) continue;

      const auto hops = parent.hops + 1;
      double key;
      bool done = false;
      if (next[m_ - 1] > 0.0 && sub_.targets().contains(v)) {
        key = pss_from_product(next[m_ - 1], hops);
        if (key < cfg_.tau) {
          ++stats.prunes;
          continue;
        }
        done = true;
      } else {
        if (hops >= cfg_.nhat) {
          ++stats.prunes;
          continue;
        }
        key = estimate_pss(best, sg_.max_adjacent_weight(v), cfg_.nhat);
        if (key < cfg_.tau - kSlack) {
          ++stats.prunes;
          continue;
        }
      }

      Entry child{key, hops, done, nodes_.size(), edges_.size(), align_.size()};
      // copy before appending: the pools may reallocate
      const auto node_off = parent.node_off;
      const auto edge_off = parent.edge_off;
      for (std::size_t i = 0; i < parent.hops + 1; ++i) nodes_.push_back(nodes_[node_off + i]);
      nodes_.push_back(v);
      for (std::size_t i = 0; i < parent.hops; ++i) edges_.push_back(edges_[edge_off + i]);
      edges_.push_back(inc.edge);
      align_.insert(align_.end(), next.begin(), next.end());
      on_child(add(child));
    }
  }

  Match make_match(std::size_t idx) {
    auto m = align_path(sub_, sg_, nodes(idx), edges(idx));
    if (!m) throw ContractViolation("complete path lost its alignment");
    return std::move(*m);
  }

  std::vector<double> frontier_keys() const {
    std::vector<double> keys;
    keys.reserve(heap_.size());
    for (auto i : heap_) keys.push_back(entries_[i].key);
    std::sort(keys.begin(), keys.end(), std::greater<>());
    return keys;
  }

 private:
  struct Entry {
    double key;
    std::size_t hops;
    bool complete;
    std::size_t node_off;
    std::size_t edge_off;
    std::size_t align_off;
  };

  std::size_t add(const Entry& e) {
    entries_.push_back(e);
    return entries_.size() - 1;
  }

  // Heap order: the top is the best entry (higher key, fewer hops, smaller nodes, older).
  bool worse_than(std::size_t a, std::size_t b) const {
    const auto& ea = entries_[a];
    const auto& eb = entries_[b];
    if (ea.key != eb.key) return ea.key < eb.key;
    if (ea.hops != eb.hops) return ea.hops > eb.hops;
    const auto na = nodes(a);
    const auto nb = nodes(b);
    const auto c = std::lexicographical_compare_three_way(na.begin(), na.end(), nb.begin(), nb.end());
    if (c != 0) return c > 0;
    return a > b;
  }

  const ResolvedSubQuery& sub_;
  SemanticGraph& sg_;
  const SearchConfig& cfg_;
  std::size_t m_;
  std::vector<Entry> entries_;
  std::vector<EntityId> nodes_;
  std::vector<EdgeIndex> edges_;
  std::vector<double> align_;
  std::vector<std::size_t> heap_;
};

TraceStep trace_step(const SearchCore& core, std::size_t idx) {
  TraceStep s;
  const auto nodes = core.nodes(idx);
  const auto edges = core.edges(idx);
  s.nodes.assign(nodes.begin(), nodes.end());
  s.edges.assign(edges.begin(), edges.end());
  s.key = core.key(idx);
  s.complete = core.complete(idx);
  return s;
}

}  // namespace

SearchResult astar_search(const ResolvedSubQuery& sub, SemanticGraph& sg, const SearchConfig& cfg,
                          SearchTrace* trace) {
  cfg.validate();
  SearchResult result;
  if (sub.seeds.empty()) {
    result.no_seeds = true;
    return result;
  }
  SearchCore core(sub, sg, cfg);
  core.seed();
  const auto K = cfg.capacity();
  // min-heap of the K best psi values found so far
  std::priority_queue<double, std::vector<double>, std::greater<>> best;

  while (!core.empty()) {
    if (best.size() >= K && core.top_key() < best.top() - kSlack) break;
    const auto idx = core.pop();
    std::optional<TraceStep> step;
    if (trace) step = trace_step(core, idx);
    if (core.complete(idx)) {
      result.matches.push_back(core.make_match(idx));
      best.push(core.key(idx));
      if (best.size() > K) best.pop();
    } else {
      core.expand(idx, [&](std::size_t child) {
        core.push(child);
        if (step) step->children.emplace_back(core.nodes(child).back(), core.edges(child).back());
      });
    }
    if (trace) {
      step->frontier = core.frontier_keys();
      trace->steps.push_back(std::move(*step));
    }
  }
  sort_matches(result.matches);
  if (result.matches.size() > K) result.matches.resize(K);
  result.stats = core.stats;
  return result;
}

struct TimeBoundedSearch::Impl {
  Impl(const ResolvedSubQuery& s, SemanticGraph& sg, const SearchConfig& c) : cfg(c), core(s, sg, cfg) {
    cfg.validate();
    core.seed();
  }

  void offer(std::size_t idx) {
    auto m = core.make_match(idx);
    const auto K = cfg.capacity();
    if (found.size() == K) {
      if (!match_before(m, found.front())) return;
      std::pop_heap(found.begin(), found.end(), match_before);
      found.pop_back();
    }
    found.push_back(std::move(m));
    std::push_heap(found.begin(), found.end(), match_before);
  }

  bool exhausted() const {
    if (core.empty()) return true;
    // nothing left on the frontier can displace the worst kept match
    return found.size() == cfg.capacity() && core.top_key() < found.front().psi - kSlack;
  }

  SearchConfig cfg;
  SearchCore core;
  std::vector<Match> found;  // heap, worst on top
};

TimeBoundedSearch::TimeBoundedSearch(const ResolvedSubQuery& sub, SemanticGraph& sg, const SearchConfig& cfg)
    : impl_(std::make_unique<Impl>(sub, sg, cfg)) {}
TimeBoundedSearch::~TimeBoundedSearch() = default;
TimeBoundedSearch::TimeBoundedSearch(TimeBoundedSearch&&) noexcept = default;
TimeBoundedSearch& TimeBoundedSearch::operator=(TimeBoundedSearch&&) noexcept = default;

bool TimeBoundedSearch::step() {
  auto& s = *impl_;
  if (s.exhausted()) return false;
  const auto idx = s.core.pop();
  s.core.expand(idx, [&](std::size_t child) {
    if (s.core.complete(child)) {
      s.offer(child);
    } else {
      s.core.push(child);
    }
  });
  return true;
}

bool TimeBoundedSearch::finished() const { return impl_->exhausted(); }
std::size_t TimeBoundedSearch::match_count() const { return impl_->found.size(); }
const SearchStats& TimeBoundedSearch::stats() const { return impl_->core.stats; }

MatchSet TimeBoundedSearch::snapshot() const {
  MatchSet out(impl_->found.begin(), impl_->found.end());
  sort_matches(out);
  return out;
}

MatchSet TimeBoundedSearch::take() {
  MatchSet out = std::move(impl_->found);
  impl_->found.clear();
  sort_matches(out);
  return out;
}

}  // namespace sgq
