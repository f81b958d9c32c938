#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sgq/engine.hpp"
#include "sgq/error.hpp"
#include "sgq/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GraphArgs {
  fs::path triples;
  std::optional<fs::path> entities;
  std::optional<fs::path> library;
  std::optional<fs::path> weights;
  std::optional<fs::path> embedding;
};

void add_graph_options(CLI::App* cmd, GraphArgs& a, bool similarity) {
  cmd->add_option("--triples", a.triples, "triples TSV (head, predicate, tail)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--entities", a.entities, "entities TSV (name, types)")->check(CLI::ExistingFile);
  cmd->add_option("--library", a.library, "transformation library TSV")->check(CLI::ExistingFile);
  if (similarity) {
    auto* w = cmd->add_option("--weights", a.weights, "predicate weight table TSV")->check(CLI::ExistingFile);
    auto* e = cmd->add_option("--embedding", a.embedding, "predicate embedding file")->check(CLI::ExistingFile);
    w->excludes(e);
  }
}

struct Loaded {
  sgq::KnowledgeGraph graph;
  sgq::TransformationLibrary library;
  std::unique_ptr<sgq::SimilarityModel> model;
};

Loaded load_all(const GraphArgs& a, bool need_model) {
  Loaded l{sgq::load_graph(a.triples, a.entities), {}, nullptr};
  if (a.library) l.library = sgq::load_library(*a.library);
  if (a.weights) {
    l.model = std::make_unique<sgq::WeightTable>(sgq::load_weight_table(*a.weights));
  } else if (a.embedding) {
    auto space = sgq::load_embedding(*a.embedding);
    space.check_covers(l.graph);
    l.model = std::make_unique<sgq::EmbeddingSpace>(std::move(space));
  } else if (need_model) {
    throw sgq::ValidationError("one of --weights or --embedding is required");
  }
  return l;
}

struct QueryArgs {
  fs::path query;
  std::size_t k = 10;
  double tau = 0.8;
  std::size_t nhat = 4;
  std::optional<double> time_bound_ms;
  double alert_ratio = 90.0;
  std::size_t overfetch = 3;
  double assembly_tick = 0.0;
  bool deterministic = false;
  bool literal_ta = false;
};

void add_query_options(CLI::App* cmd, QueryArgs& q) {
  cmd->add_option("--query", q.query, "query JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--k", q.k, "number of answers")->capture_default_str();
  cmd->add_option("--tau", q.tau, "pss threshold")->capture_default_str();
  cmd->add_option("--nhat", q.nhat, "maximum path length per query edge sequence")->capture_default_str();
  cmd->add_option("--time-bound-ms", q.time_bound_ms,
                  "time bound; selects the time-bounded mode (expansion ticks with --deterministic)");
  cmd->add_option("--alert-ratio", q.alert_ratio, "percent of the bound at which search stops")->capture_default_str();
  cmd->add_option("--overfetch", q.overfetch, "matches kept per sub-query, as a multiple of k")->capture_default_str();
  cmd->add_option("--assembly-tick", q.assembly_tick,
                  "per-match assembly cost; 0 calibrates it (real clock) or ignores it (deterministic)")
      ->capture_default_str();
  cmd->add_flag("--deterministic", q.deterministic, "single-threaded round-robin search on a virtual clock");
  cmd->add_flag("--literal-ta", q.literal_ta, "stop assembly on the original threshold");
}

sgq::QueryRequest make_request(const QueryArgs& a, const sgq::SimilarityModel& model) {
  sgq::QueryRequest req;
  req.query = sgq::load_query(a.query, &model);
  req.config.k = a.k;
  req.config.tau = a.tau;
  req.config.nhat = a.nhat;
  req.config.overfetch = a.overfetch;
  req.config.alert_ratio = a.alert_ratio;
  req.config.assembly_tick = a.assembly_tick;
  req.config.time_bound = a.time_bound_ms;
  req.mode = a.time_bound_ms ? sgq::QueryMode::TimeBounded : sgq::QueryMode::Exact;
  req.deterministic = a.deterministic;
  req.threshold = a.literal_ta ? sgq::ThresholdMode::Literal : sgq::ThresholdMode::Corrected;
  return req;
}

void print_result(const sgq::QueryResult& r, const sgq::QueryGraph& q, const sgq::KnowledgeGraph& g) {
  for (std::size_t i = 0; i < r.matches.size(); ++i) std::cout << sgq::match_record(r.matches[i], i + 1, g).dump() << '\n';
  std::cout << sgq::report_record(r, q).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic top-k query engine over knowledge graphs"};
  app.require_subcommand(1);

  GraphArgs load_args;
  auto* load_cmd = app.add_subcommand("load", "load a graph and print its statistics");
  add_graph_options(load_cmd, load_args, false);

  GraphArgs embed_args;
  fs::path embed_out;
  bool embed_text = false;
  sgq::TrainConfig train_cfg;
  auto* embed_cmd = app.add_subcommand("embed", "train predicate embeddings and save them");
  add_graph_options(embed_cmd, embed_args, false);
  embed_cmd->add_option("--out", embed_out, "output file")->required();
  embed_cmd->add_option("--dim", train_cfg.dim)->capture_default_str();
  embed_cmd->add_option("--margin", train_cfg.margin)->capture_default_str();
  embed_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  embed_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  embed_cmd->add_option("--negatives", train_cfg.negatives_per_positive)->capture_default_str();
  embed_cmd->add_option("--seed", train_cfg.rng_seed)->capture_default_str();
  embed_cmd->add_flag("--text", embed_text, "write the text format instead of binary");

  GraphArgs query_graph;
  QueryArgs query_args;
  auto* query_cmd = app.add_subcommand("query", "answer a query graph");
  add_graph_options(query_cmd, query_graph, true);
  add_query_options(query_cmd, query_args);

  GraphArgs eval_graph;
  QueryArgs eval_args;
  fs::path truth_path;
  auto* eval_cmd = app.add_subcommand("eval", "answer a query and score it against a truth file");
  add_graph_options(eval_cmd, eval_graph, true);
  add_query_options(eval_cmd, eval_args);
  eval_cmd->add_option("--truth", truth_path, "one correct pivot name per line")->required()->check(CLI::ExistingFile);

  GraphArgs noise_graph;
  std::vector<fs::path> noise_queries;
  std::string noise_kind = "node";
  double noise_percent = 100.0;
  std::uint64_t noise_seed = 1;
  fs::path noise_out;
  auto* noise_cmd = app.add_subcommand("noise", "perturb query files with synonyms or similar predicates");
  add_graph_options(noise_cmd, noise_graph, true);
  noise_cmd->add_option("--query", noise_queries, "query JSON files")->required()->check(CLI::ExistingFile);
  noise_cmd->add_option("--kind", noise_kind)->check(CLI::IsMember({"node", "edge"}))->capture_default_str();
  noise_cmd->add_option("--percent", noise_percent, "share of the queries to perturb")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  noise_cmd->add_option("--seed", noise_seed)->capture_default_str();
  noise_cmd->add_option("--out-dir", noise_out, "directory for the perturbed queries")->required();

  GraphArgs oracle_graph;
  QueryArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "answer a query by brute-force enumeration");
  add_graph_options(oracle_cmd, oracle_graph, true);
  add_query_options(oracle_cmd, oracle_args);

  GraphArgs validate_args;
  auto* validate_cmd = app.add_subcommand("validate", "report library values missing from the graph");
  add_graph_options(validate_cmd, validate_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*load_cmd) {
      const auto l = load_all(load_args, false);
      std::cout << json{{"entities", l.graph.entity_count()},
                        {"edges", l.graph.edge_count()},
                        {"predicates", l.graph.predicate_count()},
                        {"types", l.graph.type_names().size()},
                        {"average_degree", sgq::average_degree(l.graph)}}
                       .dump()
                << '\n';
    } else if (*embed_cmd) {
      const auto l = load_all(embed_args, false);
      train_cfg.validate();
      const auto r = sgq::train(l.graph, train_cfg);
      if (embed_text) {
        sgq::save_embedding_text(r.space, embed_out);
      } else {
        sgq::save_embedding(r.space, embed_out);
      }
      std::cout << json{{"predicates", r.space.size()},
                        {"dim", r.space.dim()},
                        {"first_epoch_loss", r.report.epoch_loss.front()},
                        {"last_epoch_loss", r.report.epoch_loss.back()}}
                       .dump()
                << '\n';
    } else if (*query_cmd) {
      const auto l = load_all(query_graph, true);
      const auto req = make_request(query_args, *l.model);
      const auto r = sgq::run_query(req, l.graph, *l.model, l.library);
      print_result(r, req.query, l.graph);
    } else if (*eval_cmd) {
      const auto l = load_all(eval_graph, true);
      const auto req = make_request(eval_args, *l.model);
      const auto truth = sgq::load_truth(truth_path);
      const auto r = sgq::run_query(req, l.graph, *l.model, l.library);
      const auto e = sgq::evaluate(r, l.graph, truth);
      print_result(r, req.query, l.graph);
      std::cout << json{{"type", "evaluation"}, {"precision", e.precision}, {"recall", e.recall}, {"f1", e.f1}}.dump()
                << '\n';
    } else if (*noise_cmd) {
      const auto l = load_all(noise_graph, true);
      const auto kind = noise_kind == "node" ? sgq::NoiseKind::Node : sgq::NoiseKind::Edge;
      fs::create_directories(noise_out);
      const auto count = static_cast<std::size_t>(std::llround(noise_percent / 100.0 * noise_queries.size()));
      std::vector<std::size_t> order(noise_queries.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::mt19937_64 rng(noise_seed);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<char> chosen(order.size(), 0);
      for (std::size_t i = 0; i < count; ++i) chosen[order[i]] = 1;
      for (std::size_t i = 0; i < noise_queries.size(); ++i) {
        auto q = sgq::load_query(noise_queries[i], l.model.get());
        json record{{"type", "noise"}, {"query", noise_queries[i].string()}, {"changed", false}};
        if (chosen[i]) {
          auto r = sgq::add_noise(q, kind, noise_seed + i, l.library, *l.model);
          if (!r.changed) std::cerr << noise_queries[i].string() << ": " << r.description << '\n';
          record["changed"] = r.changed;
          record["description"] = r.description;
          q = std::move(r.query);
        }
        const auto out = noise_out / noise_queries[i].filename();
        std::ofstream(out) << sgq::to_json(q).dump(2) << '\n';
        record["output"] = out.string();
        std::cout << record.dump() << '\n';
      }
    } else if (*oracle_cmd) {
      const auto l = load_all(oracle_graph, true);
      const auto req = make_request(oracle_args, *l.model);
      req.validate();
      sgq::NodeMatcher matcher(l.graph, l.library);
      const auto d = sgq::oracle_decompose(req.query, [&](const sgq::SubQueryGraph& sub) {
        const auto c = sgq::estimate_cost(sub, req.query, l.graph, matcher);
        return std::isinf(c) ? sgq::DecompositionCost{1, 0.0} : sgq::DecompositionCost{0, c};
      });
      std::vector<sgq::MatchSet> sets;
      for (const auto& sub : d.sub_queries) {
        const auto r = sgq::resolve_sub_query(sub, req.query, matcher, *l.model);
        auto all = sgq::oracle_path_enum(r, l.graph, *l.model, req.config.tau, req.config.nhat,
                                         sgq::OracleLimits{l.graph.entity_count(), 50'000'000});
        if (all.size() > req.config.capacity()) all.resize(req.config.capacity());
        sets.push_back(std::move(all));
      }
      const auto answers = sgq::oracle_full_join(sets, req.config.k, sgq::pivot_name_order(l.graph));
      for (std::size_t i = 0; i < answers.size(); ++i) {
        json slots = json::array();
        for (const auto* m : answers[i].slots) slots.push_back(m ? json(sgq::format_path(*m, l.graph)) : json());
        std::cout << json{{"type", "match"},
                          {"rank", i + 1},
                          {"pivot", l.graph.entity(answers[i].pivot).name},
                          {"score", answers[i].score},
                          {"slots", slots}}
                         .dump()
                  << '\n';
      }
      std::cout << json{{"type", "report"}, {"pivot", req.query.nodes[d.pivot].id}, {"oracle", true}}.dump() << '\n';
    } else if (*validate_cmd) {
      const auto l = load_all(validate_args, false);
      const auto missing = sgq::missing_canonicals(l.graph, l.library);
      std::cout << json{{"missing", missing}}.dump() << '\n';
      return missing.empty() ? 0 : 2;
    }
  } catch (const sgq::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const sgq::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
