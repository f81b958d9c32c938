#include "sgq/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "sgq/error.hpp"

namespace sgq {

using Clock = std::chrono::steady_clock;

namespace {

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// Worker -> coordinator messages.
struct WorkerMessage {
  std::size_t sub = 0;
  std::size_t matches = 0;
  bool final = false;
  MatchSet set;
  SearchStats stats;
  std::exception_ptr error;
};

class Channel {
 public:
  void push(WorkerMessage msg) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(msg));
    }
    cv_.notify_one();
  }

  std::optional<WorkerMessage> pop_for(std::chrono::microseconds wait) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, wait, [&] { return !queue_.empty(); })) return std::nullopt;
    auto msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<WorkerMessage> queue_;
};

constexpr std::size_t kReportEvery = 64;

struct SearchOutcome {
  std::vector<MatchSet> sets;
  std::vector<SearchStats> stats;
  double clock = 0.0;
  bool fired = false;
};

SearchOutcome run_virtual(std::vector<std::unique_ptr<TimeBoundedSearch>>& searches, const SearchConfig& cfg) {
  const auto n = searches.size();
  SearchOutcome out;
  std::vector<ProgressReport> reports(n);
  while (!out.fired) {
    bool any = false;
    for (std::size_t i = 0; i < n && !out.fired; ++i) {
      if (searches[i]->finished()) continue;
      searches[i]->step();
      any = true;
      reports[i].elapsed += 1.0;
      reports[i].matches = searches[i]->match_count();
      out.fired = time_estimate(reports, cfg);
    }
    if (!any) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.sets.push_back(searches[i]->snapshot());
    out.stats.push_back(searches[i]->stats());
    out.clock = std::max(out.clock, reports[i].elapsed);
  }
  return out;
}

SearchOutcome run_threaded(std::vector<std::unique_ptr<TimeBoundedSearch>>& searches, const SearchConfig& cfg,
                           Clock::time_point query_start) {
  const auto n = searches.size();
  SearchOutcome out;
  out.sets.resize(n);
  out.stats.resize(n);
  Channel channel;
  std::vector<ProgressReport> reports(n);
  std::vector<char> done(n, 0);
  std::exception_ptr error;
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      workers.emplace_back([&channel, &searches, i](std::stop_token stop) {
        auto& s = *searches[i];
        try {
          std::size_t since = 0;
          std::size_t last = 0;
          while (!stop.stop_requested() && s.step()) {
            if (s.match_count() != last || ++since >= kReportEvery) {
              since = 0;
              last = s.match_count();
              channel.push(WorkerMessage{i, last, false, {}, {}, nullptr});
            }
          }
          channel.push(WorkerMessage{i, s.match_count(), true, s.take(), s.stats(), nullptr});
        } catch (...) {
          channel.push(WorkerMessage{i, 0, true, {}, {}, std::current_exception()});
        }
      });
    }

    std::size_t finals = 0;
    while (finals < n) {
      auto msg = channel.pop_for(std::chrono::microseconds(500));
      const double now = ms_between(query_start, Clock::now());
      for (std::size_t i = 0; i < n; ++i) {
        if (!done[i]) reports[i].elapsed = now;
      }
      if (msg) {
        const auto i = msg->sub;
        reports[i].matches = msg->matches;
        if (msg->final) {
          done[i] = 1;
          ++finals;
          out.sets[i] = std::move(msg->set);
          out.stats[i] = msg->stats;
          if (msg->error && !error) error = msg->error;
        }
      }
      if (!out.fired && time_estimate(reports, cfg)) {
        out.fired = true;
        for (auto& w : workers) w.request_stop();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  for (const auto& r : reports) out.clock = std::max(out.clock, r.elapsed);
  return out;
}

}  // namespace

void QueryRequest::validate() const {
  config.validate();
  if (mode == QueryMode::TimeBounded && !config.time_bound)
    throw ValidationError("time-bounded mode needs a time bound");
}

PivotLess pivot_name_order(const KnowledgeGraph& g) {
  return [&g](EntityId a, EntityId b) { return g.name_rank(a) < g.name_rank(b); };
}

QueryResult run_query(const QueryRequest& req, const KnowledgeGraph& g, const SimilarityModel& model,
                      const NodeMatcher& matcher) {
  req.validate();
  const auto start = Clock::now();
  QueryResult out;
  auto& rep = out.report;
  const bool timed = req.mode == QueryMode::TimeBounded;

  if (timed && *req.config.time_bound == 0.0) {
    rep.deadline_zero = true;
    rep.diagnostics.push_back("time bound is zero; no search was run");
    rep.times.total = ms_between(start, Clock::now());
    return out;
  }

  out.decomposition = decompose(req.query, g, matcher);
  const auto t1 = Clock::now();
  rep.times.c1_decompose = ms_between(start, t1);

  const auto n = out.decomposition.sub_queries.size();
  std::vector<ResolvedSubQuery> subs;
  std::vector<std::unique_ptr<SemanticGraph>> graphs;
  subs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    subs.push_back(resolve_sub_query(out.decomposition.sub_queries[i], req.query, matcher, model));
    graphs.push_back(std::make_unique<SemanticGraph>(g, model, subs.back().predicates));
    if (subs.back().seeds.empty())
      rep.diagnostics.push_back("sub-query " + std::to_string(i) + ": specific node has no candidate entities");
  }
  const auto t2 = Clock::now();
  rep.times.c2_semantic = ms_between(t1, t2);

  SearchConfig cfg = req.config;
  std::vector<MatchSet> sets;
  if (!timed) {
    for (std::size_t i = 0; i < n; ++i) {
      auto r = astar_search(subs[i], *graphs[i], cfg);
      sets.push_back(std::move(r.matches));
      rep.sub_query_stats.push_back(r.stats);
    }
  } else {
    if (!req.deterministic && cfg.assembly_tick == 0.0) cfg.assembly_tick = calibrated_assembly_tick();
    std::vector<std::unique_ptr<TimeBoundedSearch>> searches;
    for (std::size_t i = 0; i < n; ++i) searches.push_back(std::make_unique<TimeBoundedSearch>(subs[i], *graphs[i], cfg));
    auto outcome = req.deterministic ? run_virtual(searches, cfg) : run_threaded(searches, cfg, start);
    sets = std::move(outcome.sets);
    rep.sub_query_stats = std::move(outcome.stats);
    rep.search_clock = outcome.clock;
    rep.stopped_early = outcome.fired;
  }
  rep.assembly_tick = cfg.assembly_tick;
  const auto t3 = Clock::now();

  double memo_ms = 0.0;
  for (const auto& sg : graphs) {
    memo_ms += sg->memo_seconds() * 1000.0;
    rep.weight_evaluations += sg->memo_misses();
  }
  // weights are computed lazily inside the search; charge them to C2
  memo_ms = std::min(memo_ms, ms_between(t2, t3));
  rep.times.c2_semantic += memo_ms;
  rep.times.c3_search = ms_between(t2, t3) - memo_ms;
  for (const auto& s : rep.sub_query_stats) {
    rep.expansions += s.expansions;
    rep.prunes += s.prunes;
  }
  for (const auto& s : sets) rep.sub_query_matches.push_back(s.size());

  const bool any = std::any_of(sets.begin(), sets.end(), [](const MatchSet& s) { return !s.empty(); });
  if (!any) rep.diagnostics.push_back("no sub-query produced a match");
  TaAssembler ta(std::move(sets), cfg.k, req.threshold, pivot_name_order(g));
  ta.run();
  out.matches = ta.result();
  rep.assembly = ta.cost();
  const auto t4 = Clock::now();
  rep.times.c4_assembly = ms_between(t3, t4);
  rep.times.total = ms_between(start, t4);

  if (timed && std::isfinite(*cfg.time_bound)) {
    rep.deadline_met = req.deterministic ? rep.search_clock <= *cfg.time_bound : rep.times.total <= *cfg.time_bound;
  }
  return out;
}

QueryResult run_query(const QueryRequest& req, const KnowledgeGraph& g, const SimilarityModel& model,
                      const TransformationLibrary& lib) {
  NodeMatcher matcher(g, lib);
  return run_query(req, g, model, matcher);
}

namespace {

std::string identity(const FinalMatch& m) {
  std::string key = std::to_string(to_index(m.pivot));
  for (const auto& slot : m.slots) {
    key += '|';
    if (!slot) continue;
    key += std::to_string(to_index(slot->start()));
    for (auto e : slot->edges) key += ',' + std::to_string(e);
  }
  return key;
}

}  // namespace

double jaccard(const std::vector<FinalMatch>& approx, const std::vector<FinalMatch>& exact) {
  std::set<std::string> a;
  std::set<std::string> b;
  for (const auto& m : approx) a.insert(identity(m));
  for (const auto& m : exact) b.insert(identity(m));
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double jaccard(const QueryResult& approx, const QueryResult& exact) { return jaccard(approx.matches, exact.matches); }

Evaluation evaluate(const std::vector<std::string>& returned, const std::vector<std::string>& truth) {
  if (truth.empty()) throw EvaluationError("truth list is empty");
  const std::set<std::string> r(returned.begin(), returned.end());
  const std::set<std::string> t(truth.begin(), truth.end());
  std::size_t hit = 0;
  for (const auto& x : r) hit += t.count(x);
  Evaluation e;
  e.precision = r.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(r.size());
  e.recall = static_cast<double>(hit) / static_cast<double>(t.size());
  e.f1 = e.precision + e.recall == 0.0 ? 0.0 : 2.0 * e.precision * e.recall / (e.precision + e.recall);
  return e;
}

Evaluation evaluate(const QueryResult& result, const KnowledgeGraph& g, const std::vector<std::string>& truth) {
  std::vector<std::string> names;
  for (const auto& m : result.matches) names.push_back(g.entity(m.pivot).name);
  return evaluate(names, truth);
}

std::vector<std::string> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open truth file: " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  if (out.empty()) throw EvaluationError("truth file is empty: " + path.string());
  return out;
}

namespace {

// Other surface forms of the canonical values `term` stands for.
std::vector<std::string> alternatives(const TransformationLibrary& lib, LibraryTarget target, const std::string& term) {
  auto canon = lib.canonicals(target, term);
  canon.push_back(term);
  std::set<std::string> out;
  for (const auto& c : canon) {
    out.insert(c);
    for (auto& s : lib.surfaces_for(target, c)) out.insert(std::move(s));
  }
  const auto self = normalize_term(term);
  std::vector<std::string> result;
  for (const auto& s : out) {
    if (normalize_term(s) != self) result.push_back(s);
  }
  return result;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

}  // namespace

NoiseResult add_noise(const QueryGraph& q, NoiseKind kind, std::uint64_t seed, const TransformationLibrary& lib,
                      const SimilarityModel& model) {
  std::mt19937_64 rng(seed);
  NoiseResult out{q, false, {}};

  if (kind == NoiseKind::Node) {
    struct Option {
      std::size_t node;
      std::optional<std::size_t> type_slot;  // nullopt: the name
      std::string value;
    };
    std::vector<std::vector<Option>> per_node;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const auto& spec = q.nodes[i].spec;
      std::vector<Option> opts;
      if (spec.name_term) {
        for (auto& s : alternatives(lib, LibraryTarget::Name, *spec.name_term)) opts.push_back({i, std::nullopt, s});
      }
      for (std::size_t t = 0; t < spec.type_terms.size(); ++t) {
        for (auto& s : alternatives(lib, LibraryTarget::Type, spec.type_terms[t])) opts.push_back({i, t, s});
      }
      if (!opts.empty()) per_node.push_back(std::move(opts));
    }
    if (per_node.empty()) {
      out.description = "warning: no node has a synonym or abbreviation; query unchanged";
      return out;
    }
    const auto& opts = pick(per_node, rng);
    const auto& o = pick(opts, rng);
    auto& spec = out.query.nodes[o.node].spec;
    std::string before;
    if (o.type_slot) {
      before = spec.type_terms[*o.type_slot];
      spec.type_terms[*o.type_slot] = o.value;
    } else {
      before = *spec.name_term;
      spec.name_term = o.value;
    }
    out.changed = true;
    out.description = "node " + q.nodes[o.node].id + ": " + before + " -> " + o.value;
    return out;
  }

  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> options;
  for (std::size_t i = 0; i < q.edges.size(); ++i) {
    auto idx = model.find(q.edges[i].predicate);
    if (!idx) continue;
    auto near = nearest_predicates(model, *idx, 10);
    if (!near.empty()) options.emplace_back(i, std::move(near));
  }
  if (options.empty()) {
    out.description = "warning: no predicate has neighbours in the similarity model; query unchanged";
    return out;
  }
  const auto& [edge, near] = pick(options, rng);
  const auto replacement = model.name(pick(near, rng));
  out.description = "edge " + std::to_string(edge) + ": " + q.edges[edge].predicate + " -> " + replacement;
  out.query.edges[edge].predicate = replacement;
  out.changed = true;
  return out;
}

std::string format_path(const Match& m, const KnowledgeGraph& g) {
  std::string s = g.entity(m.nodes.front()).name;
  for (std::size_t i = 0; i < m.edges.size(); ++i) {
    s += " -" + g.predicate_name(g.edge(m.edges[i]).predicate) + "- " + g.entity(m.nodes[i + 1]).name;
  }
  return s;
}

nlohmann::json match_record(const FinalMatch& m, std::size_t rank, const KnowledgeGraph& g) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : m.slots) slots.push_back(s ? nlohmann::json(format_path(*s, g)) : nlohmann::json());
  return {{"type", "match"}, {"rank", rank}, {"pivot", g.entity(m.pivot).name}, {"score", m.score()},
          {"slots", slots}};
}

nlohmann::json report_record(const QueryResult& r, const QueryGraph& q) {
  const auto& rep = r.report;
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& sub : r.decomposition.sub_queries) {
    nlohmann::json preds = nlohmann::json::array();
    for (auto e : sub.edges) preds.push_back(q.edges[e].predicate);
    subs.push_back({{"start", q.nodes[sub.start()].id}, {"predicates", preds}});
  }
  nlohmann::json out{
      {"type", "report"},
      {"times_ms",
       {{"c1_decompose", rep.times.c1_decompose},
        {"c2_semantic", rep.times.c2_semantic},
        {"c3_search", rep.times.c3_search},
        {"c4_assembly", rep.times.c4_assembly},
        {"total", rep.times.total}}},
      {"sub_queries", subs},
      {"sub_query_matches", rep.sub_query_matches},
      {"expansions", rep.expansions},
      {"prunes", rep.prunes},
      {"weight_evaluations", rep.weight_evaluations},
      {"assembly", {{"accesses", rep.assembly.accesses}, {"candidates", rep.assembly.candidates}, {"rounds", rep.assembly.rounds}}},
      {"assembly_tick", rep.assembly_tick},
      {"search_clock", rep.search_clock},
      {"stopped_early", rep.stopped_early},
      {"deadline_met", rep.deadline_met},
      {"deadline_zero", rep.deadline_zero},
      {"diagnostics", rep.diagnostics},
  };
  if (!rep.deadline_zero) {
    out["pivot"] = q.nodes[r.decomposition.pivot].id;
    out["decomposition_cost"] = r.decomposition.cost.value();
  }
  return out;
}

}  // namespace sgq
