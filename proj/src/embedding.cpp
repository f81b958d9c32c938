#include "sgq/embedding.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace sgq {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'G', 'Q', 'V', 'E', 'C', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  write_u64(out, bits);
}

template <std::size_t N>
bool read_bytes(std::istream& in, std::array<unsigned char, N>& bytes) {
  in.read(reinterpret_cast<char*>(bytes.data()), N);
  return static_cast<std::size_t>(in.gcount()) == N;
}

std::uint64_t read_u64(std::istream& in, const std::string& what) {
  std::array<unsigned char, 8> b{};
  if (!read_bytes(in, b)) throw LoadError("truncated embedding file while reading " + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!read_bytes(in, b)) throw LoadError("truncated embedding file while reading " + what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double read_f64(std::istream& in) {
  const auto bits = read_u64(in, "vector component");
  double d = 0.0;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

EmbeddingSpace load_binary(std::istream& in) {
  const auto dim = read_u64(in, "dimension");
  const auto count = read_u64(in, "predicate count");
  if (dim == 0 || dim > (1u << 20)) throw LoadError("corrupt embedding header: dim " + std::to_string(dim));
  if (count > (1u << 26)) throw LoadError("corrupt embedding header: count " + std::to_string(count));
  std::vector<std::string> names;
  names.reserve(count);
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (std::uint64_t c = 0; c < count; ++c) {
    const auto len = read_u32(in, "name length");
    if (len > (1u << 16)) throw LoadError("corrupt embedding record: name length " + std::to_string(len));
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (static_cast<std::uint64_t>(in.gcount()) != len) throw LoadError("truncated embedding file while reading name");
    names.push_back(std::move(name));
    for (std::uint64_t d = 0; d < dim; ++d) {
      vectors(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = read_f64(in);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after embedding records");
  return EmbeddingSpace(std::move(names), std::move(vectors));
}

EmbeddingSpace load_text(std::istream& in, const std::string& source) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError(source, lineno, "expected `predicate<TAB>v1,v2,...`");
    std::vector<double> values;
    for (const auto& field : split(cols[1], ',')) {
      double v = 0.0;
      const auto* first = field.data();
      const auto* last = field.data() + field.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || ptr != last) throw ParseError(source, lineno, "bad number `" + field + "`");
      values.push_back(v);
    }
    if (!rows.empty() && values.size() != rows.front().size())
      throw ParseError(source, lineno, "dimension mismatch");
    names.push_back(cols[0]);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw LoadError("embedding file has no vectors: " + source);
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    vectors.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(rows[c].data(), rows[c].size());
  }
  return EmbeddingSpace(std::move(names), std::move(vectors));
}

}  // namespace

EmbeddingSpace::EmbeddingSpace(std::vector<std::string> names, Eigen::MatrixXd vectors)
    : names_(std::move(names)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.cols()) != names_.size())
    throw ContractViolation("embedding names and vectors disagree in count");
  if (vectors_.rows() == 0 && !names_.empty()) throw ContractViolation("embedding dimension must be positive");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (vectors_.col(static_cast<Eigen::Index>(i)).squaredNorm() == 0.0)
      throw ContractViolation("zero vector for predicate " + names_[i]);
    if (!index_.emplace(names_[i], i).second) throw ContractViolation("duplicate predicate " + names_[i]);
  }
}

const std::string& EmbeddingSpace::name(std::size_t index) const {
  if (index >= names_.size()) throw LookupError("predicate index out of range");
  return names_[index];
}

std::optional<std::size_t> EmbeddingSpace::find(std::string_view predicate) const {
  auto it = index_.find(std::string(predicate));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double EmbeddingSpace::weight(std::size_t a, std::size_t b) const { return edge_weight(*this, a, b); }

void EmbeddingSpace::check_covers(const KnowledgeGraph& g) const {
  for (const auto& p : g.predicate_names()) {
    if (!find(p)) throw LoadError("embedding has no vector for graph predicate " + p);
  }
}

double edge_weight(const EmbeddingSpace& space, std::size_t query_predicate, std::size_t graph_predicate) {
  if (query_predicate >= space.size() || graph_predicate >= space.size())
    throw LookupError("unknown predicate index");
  if (query_predicate == graph_predicate) return 1.0;
  return std::clamp(cosine(space.vector(query_predicate), space.vector(graph_predicate)), 0.0, 1.0);
}

std::size_t WeightTable::add_predicate(std::string_view name) {
  std::string key(name);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  names_.push_back(key);
  index_.emplace(std::move(key), names_.size() - 1);
  return names_.size() - 1;
}

void WeightTable::set(std::string_view a, std::string_view b, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) throw ContractViolation("weight outside [0, 1]");
  const auto ia = add_predicate(a);
  const auto ib = add_predicate(b);
  weights_[std::minmax(ia, ib)] = weight;
}

const std::string& WeightTable::name(std::size_t index) const {
  if (index >= names_.size()) throw LookupError("predicate index out of range");
  return names_[index];
}

std::optional<std::size_t> WeightTable::find(std::string_view predicate) const {
  auto it = index_.find(std::string(predicate));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double WeightTable::weight(std::size_t a, std::size_t b) const {
  if (a >= names_.size() || b >= names_.size()) throw LookupError("unknown predicate index");
  if (a == b) return 1.0;
  auto it = weights_.find(std::minmax(a, b));
  return it == weights_.end() ? 0.0 : it->second;
}

WeightTable load_weight_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open weight table: " + path.string());
  WeightTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3) throw ParseError(path.string(), lineno, "expected 3 tab-separated columns");
    double w = 0.0;
    const auto* last = cols[2].data() + cols[2].size();
    auto [ptr, ec] = std::from_chars(cols[2].data(), last, w);
    if (ec != std::errc{} || ptr != last) throw ParseError(path.string(), lineno, "bad weight `" + cols[2] + "`");
    if (w < 0.0 || w > 1.0) throw ParseError(path.string(), lineno, "weight outside [0, 1]");
    table.set(cols[0], cols[1], w);
  }
  return table;
}

void TrainConfig::validate() const {
  if (dim == 0) throw ContractViolation("dim must be positive");
  if (!(margin > 0.0)) throw ContractViolation("margin must be positive");
  if (!(learning_rate >= 0.0)) throw ContractViolation("learning rate must be non-negative");
  if (epochs == 0) throw ContractViolation("epochs must be at least 1");
  if (negatives_per_positive == 0) throw ContractViolation("negatives_per_positive must be at least 1");
}

namespace {

void normalize_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double n = m.col(c).norm();
    if (n > 0.0) m.col(c) /= n;
  }
}

struct Init {
  Eigen::MatrixXd entities;
  Eigen::MatrixXd relations;
};

Init initialize(const KnowledgeGraph& g, const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Init init{Eigen::MatrixXd(d, static_cast<Eigen::Index>(g.entity_count())),
            Eigen::MatrixXd(d, static_cast<Eigen::Index>(g.predicate_count()))};
  for (Eigen::Index c = 0; c < init.relations.cols(); ++c)
    for (Eigen::Index r = 0; r < d; ++r) init.relations(r, c) = unif(rng);
  for (Eigen::Index c = 0; c < init.entities.cols(); ++c)
    for (Eigen::Index r = 0; r < d; ++r) init.entities(r, c) = unif(rng);
  normalize_columns(init.relations);
  normalize_columns(init.entities);
  return init;
}

std::vector<std::string> predicate_name_list(const KnowledgeGraph& g) {
  return {g.predicate_names().begin(), g.predicate_names().end()};
}

}  // namespace

TrainResult initial_embedding(const KnowledgeGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rng_seed);
  auto init = initialize(g, cfg, rng);
  return TrainResult{EmbeddingSpace(predicate_name_list(g), std::move(init.relations)), std::move(init.entities), {}};
}

TrainResult train(const KnowledgeGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  if (g.edge_count() == 0) throw TrainingError("cannot train embeddings on a graph without edges");

  std::mt19937_64 rng(cfg.rng_seed);
  auto [ent, rel] = initialize(g, cfg, rng);

  const auto edges = g.edges();
  std::unordered_set<std::uint64_t> positives;
  auto key = [&](std::size_t h, std::size_t r, std::size_t t) {
    return (static_cast<std::uint64_t>(h) * g.predicate_count() + r) * g.entity_count() + t;
  };
  for (const auto& e : edges) positives.insert(key(to_index(e.src), to_index(e.predicate), to_index(e.dst)));

  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::uniform_int_distribution<std::size_t> pick_entity(0, g.entity_count() - 1);
  std::bernoulli_distribution corrupt_head(0.5);

  TrainingReport report;
  const double lr = cfg.learning_rate;
  Eigen::VectorXd pos_diff(static_cast<Eigen::Index>(cfg.dim));
  Eigen::VectorXd neg_diff(static_cast<Eigen::Index>(cfg.dim));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    normalize_columns(ent);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (const auto i : order) {
      const auto h = static_cast<Eigen::Index>(to_index(edges[i].src));
      const auto r = static_cast<Eigen::Index>(to_index(edges[i].predicate));
      const auto t = static_cast<Eigen::Index>(to_index(edges[i].dst));
      for (std::size_t n = 0; n < cfg.negatives_per_positive; ++n) {
        Eigen::Index nh = h;
        Eigen::Index nt = t;
        // Reject corruptions that happen to be true triples; give up after a few tries.
        for (int attempt = 0; attempt < 10; ++attempt) {
          nh = h;
          nt = t;
          if (corrupt_head(rng)) {
            nh = static_cast<Eigen::Index>(pick_entity(rng));
          } else {
            nt = static_cast<Eigen::Index>(pick_entity(rng));
          }
          if (!positives.contains(key(nh, r, nt))) break;
        }
        pos_diff = ent.col(h) + rel.col(r) - ent.col(t);
        neg_diff = ent.col(nh) + rel.col(r) - ent.col(nt);
        const double pos_dist = pos_diff.norm();
        const double neg_dist = neg_diff.norm();
        const double loss = cfg.margin + pos_dist - neg_dist;
        if (loss <= 0.0) continue;
        epoch_loss += loss;
        if (lr == 0.0) continue;
        if (pos_dist > 0.0) pos_diff /= pos_dist;
        if (neg_dist > 0.0) neg_diff /= neg_dist;
        ent.col(h) -= lr * pos_diff;
        ent.col(t) += lr * pos_diff;
        ent.col(nh) += lr * neg_diff;
        ent.col(nt) -= lr * neg_diff;
        rel.col(r) -= lr * (pos_diff - neg_diff);
      }
    }
    report.epoch_loss.push_back(epoch_loss);
  }

  return TrainResult{EmbeddingSpace(predicate_name_list(g), std::move(rel)), std::move(ent), std::move(report)};
}

void save_embedding(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, space.dim());
  write_u64(out, space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& name = space.name(i);
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto v = space.vector(i);
    for (Eigen::Index d = 0; d < v.size(); ++d) write_f64(out, v(d));
  }
  if (!out) throw LoadError("failed writing " + path.string());
}

void save_embedding_text(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.name(i) << '\t';
    const auto v = space.vector(i);
    for (Eigen::Index d = 0; d < v.size(); ++d) out << (d ? "," : "") << v(d);
    out << '\n';
  }
}

EmbeddingSpace load_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open embedding file: " + path.string());
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  if (in.gcount() == static_cast<std::streamsize>(head.size()) && head == kMagic) {
    try {
      return load_binary(in);
    } catch (const ContractViolation& e) {
      throw LoadError(std::string("corrupt embedding file: ") + e.what());
    }
  }
  in.clear();
  in.seekg(0);
  return load_text(in, path.string());
}

std::vector<std::optional<std::size_t>> bind_predicates(const KnowledgeGraph& g, const SimilarityModel& model) {
  std::vector<std::optional<std::size_t>> out;
  out.reserve(g.predicate_count());
  for (const auto& p : g.predicate_names()) out.push_back(model.find(p));
  return out;
}

std::vector<std::size_t> nearest_predicates(const SimilarityModel& model, std::size_t predicate, std::size_t count) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (i == predicate) continue;
    scored.emplace_back(model.weight(predicate, i), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return model.name(a.second) < model.name(b.second);
  });
  if (scored.size() > count) scored.resize(count);
  std::vector<std::size_t> out;
  for (const auto& [_, i] : scored) out.push_back(i);
  return out;
}

}  // namespace sgq
