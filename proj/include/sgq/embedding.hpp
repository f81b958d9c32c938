#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sgq/error.hpp"
#include "sgq/graph.hpp"

namespace sgq {

/// Source of predicate-to-predicate semantic similarity. Indices address the
/// model's own predicate vocabulary, which may be larger than a graph's.
class SimilarityModel {
 public:
  virtual ~SimilarityModel() = default;

  virtual std::size_t size() const = 0;
  virtual const std::string& name(std::size_t index) const = 0;
  virtual std::optional<std::size_t> find(std::string_view predicate) const = 0;

  // Similarity clamped to [0, 1]; identical indices give exactly 1.
  virtual double weight(std::size_t a, std::size_t b) const = 0;
};

template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw ContractViolation("cosine of vectors with different lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ContractViolation("cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Predicate vectors, one column per predicate.
class EmbeddingSpace final : public SimilarityModel {
 public:
  EmbeddingSpace() = default;
  EmbeddingSpace(std::vector<std::string> names, Eigen::MatrixXd vectors);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t size() const override { return names_.size(); }
  const std::string& name(std::size_t index) const override;
  std::optional<std::size_t> find(std::string_view predicate) const override;
  double weight(std::size_t a, std::size_t b) const override;

  auto vector(std::size_t index) const { return vectors_.col(static_cast<Eigen::Index>(index)); }
  const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  // Throws LoadError when some graph predicate has no vector.
  void check_covers(const KnowledgeGraph& g) const;

  friend bool operator==(const EmbeddingSpace& a, const EmbeddingSpace& b) {
    return a.names_ == b.names_ && a.vectors_.rows() == b.vectors_.rows() &&
           a.vectors_.cols() == b.vectors_.cols() && a.vectors_ == b.vectors_;
  }

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// clamp(cosine, 0, 1) with an exact 1 for identical ids.
double edge_weight(const EmbeddingSpace& space, std::size_t query_predicate, std::size_t graph_predicate);

/// Hand-authored symmetric weight table; unlisted pairs weigh 0.
class WeightTable final : public SimilarityModel {
 public:
  std::size_t add_predicate(std::string_view name);
  void set(std::string_view a, std::string_view b, double weight);

  std::size_t size() const override { return names_.size(); }
  const std::string& name(std::size_t index) const override;
  std::optional<std::size_t> find(std::string_view predicate) const override;
  double weight(std::size_t a, std::size_t b) const override;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::pair<std::size_t, std::size_t>, double> weights_;
};

// Rows: `predicate_a<TAB>predicate_b<TAB>weight`, weight in [0, 1].
WeightTable load_weight_table(const std::filesystem::path& path);

struct TrainConfig {
  std::size_t dim = 50;
  double margin = 1.0;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  std::size_t negatives_per_positive = 1;
  std::uint64_t rng_seed = 42;

  void validate() const;
};

struct TrainingReport {
  std::vector<double> epoch_loss;
};

struct TrainResult {
  EmbeddingSpace space;
  Eigen::MatrixXd entity_vectors;
  TrainingReport report;
};

// TransE with margin-ranking loss and uniformly corrupted heads or tails.
TrainResult train(const KnowledgeGraph& g, const TrainConfig& cfg);

// The normalized random initialization `train` starts from.
TrainResult initial_embedding(const KnowledgeGraph& g, const TrainConfig& cfg);

void save_embedding(const EmbeddingSpace& space, const std::filesystem::path& path);
void save_embedding_text(const EmbeddingSpace& space, const std::filesystem::path& path);
// Accepts the binary format or `predicate<TAB>v1,v2,...` text.
EmbeddingSpace load_embedding(const std::filesystem::path& path);

// Vocabulary index of every graph predicate (nullopt when the model lacks it).
std::vector<std::optional<std::size_t>> bind_predicates(const KnowledgeGraph& g, const SimilarityModel& model);

// Up to `count` most similar other predicates, ties broken by name.
std::vector<std::size_t> nearest_predicates(const SimilarityModel& model, std::size_t predicate, std::size_t count);

}  // namespace sgq
