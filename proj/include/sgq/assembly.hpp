#pragma once

#include <cstddef>
#include <functional>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "sgq/graph.hpp"
#include "sgq/paths.hpp"

namespace sgq {

/// Answer joined at one pivot entity; slot i holds the sub-query i match, if seen.
struct FinalMatch {
  EntityId pivot{};
  std::vector<std::optional<Match>> slots;
  double lower = 0.0;
  double upper = 0.0;
  bool complete = false;

  double score() const noexcept { return lower; }
};

using PivotLess = std::function<bool(EntityId, EntityId)>;

enum class ThresholdMode {
  Corrected,      // U also covers pivots not seen yet; top-k must be exact before stopping
  Literal,  // U = best upper bound among the other candidates, stop on L >= U
};

struct AssemblyCost {
  std::size_t accesses = 0;
  std::size_t candidates = 0;
  std::size_t rounds = 0;
};

struct Bounds {
  double lower;
  double upper;
};

// Sum over slots of the filled psi (lower) or the filled psi / cursor value (upper),
// taken in slot order. Exhausted sets carry a cursor of 0.
Bounds bounds(const FinalMatch& c, std::span<const double> cursors);

/// Threshold-algorithm join over match sets sorted best first. Each step is one
/// round of sorted access, one match from every set in index order.
class TaAssembler {
 public:
  TaAssembler(std::vector<MatchSet> sets, std::size_t k, ThresholdMode mode = ThresholdMode::Corrected,
              PivotLess pivot_less = {});
  TaAssembler(const TaAssembler&) = delete;
  TaAssembler& operator=(const TaAssembler&) = delete;

  // One round. Returns false once the stop condition holds.
  bool step();
  void run();
  bool stopped() const noexcept { return stopped_; }

  static constexpr double kNone = -std::numeric_limits<double>::infinity();
  double lower_threshold() const noexcept { return L_; }
  double upper_threshold() const noexcept { return U_; }
  // Best possible score of a pivot that has not been accessed yet.
  double unseen_bound() const noexcept;

  // Current psi at each set's cursor (1 before the first access, 0 once exhausted).
  std::span<const double> cursors() const noexcept { return cursors_; }
  bool exhausted(std::size_t set) const noexcept { return next_[set] >= sets_[set].size(); }
  // Every pivot seen so far with bounds under the current cursors.
  std::vector<FinalMatch> candidates() const;

  // Ranked top-k: score descending, ties by pivot order.
  std::vector<FinalMatch> result() const;
  const AssemblyCost& cost() const noexcept { return cost_; }

 private:
  // Rank order: lower bound descending, then pivot order.
  struct RankLess {
    const TaAssembler* self;
    bool operator()(std::size_t a, std::size_t b) const;
  };
  using Ranked = std::set<std::size_t, RankLess>;

  void detach(std::size_t c);
  void attach(std::size_t c);
  void check_stop();
  FinalMatch snapshot(std::size_t c) const;

  std::vector<MatchSet> sets_;
  std::size_t k_;
  ThresholdMode mode_;
  PivotLess less_;
  std::vector<std::size_t> next_;
  std::vector<double> cursors_;
  struct Candidate {
    EntityId pivot;
    double lower = 0.0;
    std::uint32_t missing = 0;  // bit i set while slot i is empty
    bool in_top = false;
  };
  static constexpr std::size_t kEmpty = std::numeric_limits<std::size_t>::max();
  std::vector<Candidate> candidates_;
  std::vector<std::size_t> slots_;  // candidate * sets + set -> index into that set, or kEmpty
  std::unordered_map<std::uint32_t, std::size_t> by_pivot_;
  // The current top-k; the others are grouped by missing-slot pattern and only
  // exist once the top is full.
  Ranked top_;
  std::map<std::uint32_t, Ranked> rest_by_missing_;
  std::map<std::uint32_t, std::size_t> top_by_missing_;
  std::uint32_t exhausted_mask_ = 0;
  double L_ = kNone;
  double U_ = std::numeric_limits<double>::infinity();
  bool stopped_ = false;
  AssemblyCost cost_;
};

std::vector<FinalMatch> ta_assemble(std::vector<MatchSet> sets, std::size_t k,
                                    ThresholdMode mode = ThresholdMode::Corrected, PivotLess pivot_less = {},
                                    AssemblyCost* cost = nullptr);

// Per-match join cost t in milliseconds: median per-access time of a warm-up join over
// two sets of 1000 four-hop matches, measured once per process.
double calibrated_assembly_tick();

}  // namespace sgq
