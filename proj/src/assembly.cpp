#include "sgq/assembly.hpp"

#include <algorithm>
#include <chrono>

#include "sgq/error.hpp"

namespace sgq {

namespace {
constexpr double kSumSlack = 1e-12;
}  // namespace

Bounds bounds(const FinalMatch& c, std::span<const double> cursors) {
  if (c.slots.size() != cursors.size()) throw ContractViolation("candidate and cursor counts differ");
  Bounds b{0.0, 0.0};
  for (std::size_t i = 0; i < cursors.size(); ++i) {
    if (c.slots[i]) {
      b.lower += c.slots[i]->psi;
      b.upper += c.slots[i]->psi;
    } else {
      b.upper += cursors[i];
    }
  }
  return b;
}

TaAssembler::TaAssembler(std::vector<MatchSet> sets, std::size_t k, ThresholdMode mode, PivotLess pivot_less)
    : sets_(std::move(sets)),
      k_(k),
      mode_(mode),
      less_(std::move(pivot_less)),
      top_(RankLess{this}) {
  if (k_ == 0) throw ContractViolation("k must be positive");
  if (sets_.size() > 32) throw ContractViolation("at most 32 match sets");
  if (!less_) less_ = [](EntityId a, EntityId b) { return a < b; };
  next_.assign(sets_.size(), 0);
  cursors_.resize(sets_.size());
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    cursors_[i] = sets_[i].empty() ? 0.0 : 1.0;
    if (sets_[i].empty()) exhausted_mask_ |= std::uint32_t{1} << i;
  }
  check_stop();
}

bool TaAssembler::RankLess::operator()(std::size_t a, std::size_t b) const {
  const auto& ca = self->candidates_[a];
  const auto& cb = self->candidates_[b];
  if (ca.lower != cb.lower) return ca.lower > cb.lower;
  return self->less_(ca.pivot, cb.pivot);
}

double TaAssembler::unseen_bound() const noexcept {
  double sum = 0.0;
  for (double c : cursors_) sum += c;
  return sum;
}

void TaAssembler::detach(std::size_t c) {
  auto& cand = candidates_[c];
  if (cand.in_top) {
    top_.erase(c);
    if (--top_by_missing_[cand.missing] == 0) top_by_missing_.erase(cand.missing);
    return;
  }
  auto it = rest_by_missing_.find(cand.missing);
  it->second.erase(c);
  if (it->second.empty()) rest_by_missing_.erase(it);
}

// Lower bounds only grow, so a re-attached candidate can only move up; spilling
// the worst of the top keeps it the k best.
void TaAssembler::attach(std::size_t c) {
  top_.insert(c);
  candidates_[c].in_top = true;
  ++top_by_missing_[candidates_[c].missing];
  if (top_.size() <= k_) return;
  const auto worst = *std::prev(top_.end());
  top_.erase(std::prev(top_.end()));
  auto& w = candidates_[worst];
  w.in_top = false;
  if (--top_by_missing_[w.missing] == 0) top_by_missing_.erase(w.missing);
  rest_by_missing_.try_emplace(w.missing, RankLess{this}).first->second.insert(worst);
}

void TaAssembler::check_stop() {
  const bool all_exhausted = std::all_of(cursors_.begin(), cursors_.end(), [](double c) { return c == 0.0; });
  L_ = top_.size() >= k_ ? candidates_[*std::prev(top_.end())].lower : kNone;

  // Best upper bound outside the top-k: per missing-slot pattern, the best
  // lower bound plus the cursors of the missing sets.
  double outside = kNone;
  for (const auto& [mask, ranked] : rest_by_missing_) {
    double u = candidates_[*ranked.begin()].lower;
    for (std::size_t i = 0; i < cursors_.size(); ++i) {
      if (mask >> i & 1) u += cursors_[i];
    }
    outside = std::max(outside, u);
  }

  if (mode_ == ThresholdMode::Literal) {
    U_ = outside;
    stopped_ = all_exhausted || (top_.size() >= k_ && L_ >= U_);
    return;
  }
  U_ = std::max(outside, unseen_bound());
  bool top_exact = top_.size() >= k_;
  for (const auto& [mask, count] : top_by_missing_) top_exact = top_exact && (mask & ~exhausted_mask_) == 0;
  // Strict: with L == U an unseen pivot could tie and win on pivot order. The
  // slack covers summation-order rounding between U and final scores.
  stopped_ = all_exhausted || (top_exact && L_ > U_ + kSumSlack);
}

bool TaAssembler::step() {
  if (stopped_) return false;
  ++cost_.rounds;
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    if (exhausted(i)) continue;
    const Match& m = sets_[i][next_[i]++];
    ++cost_.accesses;
    if (exhausted(i)) {
      cursors_[i] = 0.0;
      exhausted_mask_ |= std::uint32_t{1} << i;
    } else {
      cursors_[i] = m.psi;
    }

    const auto n = sets_.size();
    const auto key = static_cast<std::uint32_t>(m.pivot());
    auto it = by_pivot_.find(key);
    std::size_t c;
    if (it == by_pivot_.end()) {
      c = candidates_.size();
      candidates_.push_back({m.pivot(), 0.0, n == 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << n) - 1, false});
      slots_.resize(slots_.size() + n, kEmpty);
      by_pivot_.emplace(key, c);
      ++cost_.candidates;
    } else {
      c = it->second;
      // Later matches of the same pivot in this set are worse.
      if (slots_[c * n + i] != kEmpty) continue;
      detach(c);
    }
    auto& cand = candidates_[c];
    slots_[c * n + i] = next_[i] - 1;
    cand.missing &= ~(std::uint32_t{1} << i);
    cand.lower = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (slots_[c * n + s] != kEmpty) cand.lower += sets_[s][slots_[c * n + s]].psi;
    }
    attach(c);
  }
  check_stop();
  return !stopped_;
}

void TaAssembler::run() {
  while (step()) {
  }
}

FinalMatch TaAssembler::snapshot(std::size_t c) const {
  const auto n = sets_.size();
  FinalMatch out;
  out.pivot = candidates_[c].pivot;
  out.slots.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (slots_[c * n + s] != kEmpty) out.slots[s] = sets_[s][slots_[c * n + s]];
  }
  const auto b = bounds(out, cursors_);
  out.lower = b.lower;
  out.upper = b.upper;
  out.complete = (candidates_[c].missing & ~exhausted_mask_) == 0;
  return out;
}

std::vector<FinalMatch> TaAssembler::candidates() const {
  std::vector<FinalMatch> out;
  out.reserve(candidates_.size());
  for (std::size_t c = 0; c < candidates_.size(); ++c) out.push_back(snapshot(c));
  return out;
}

std::vector<FinalMatch> TaAssembler::result() const {
  std::vector<FinalMatch> out;
  for (auto c : top_) out.push_back(snapshot(c));
  return out;
}

std::vector<FinalMatch> ta_assemble(std::vector<MatchSet> sets, std::size_t k, ThresholdMode mode,
                                    PivotLess pivot_less, AssemblyCost* cost) {
  TaAssembler ta(std::move(sets), k, mode, std::move(pivot_less));
  ta.run();
  if (cost) *cost = ta.cost();
  return ta.result();
}

double calibrated_assembly_tick() {
  static const double tick = [] {
    // Two sets of 6-hop matches whose pivots rarely coincide, which is the
    // expensive case: almost every access opens a new candidate. The estimate
    // multiplies t by set sizes, so time is divided by matches, not accesses.
    constexpr std::size_t kMatches = 2000;
    constexpr std::size_t kHops = 6;
    std::vector<MatchSet> sets(2);
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::size_t i = 0; i < 2 * kMatches; ++i) {
      h ^= h << 13;
      h ^= h >> 7;
      h ^= h << 17;
      Match m;
      for (std::size_t j = 0; j < kHops; ++j) m.nodes.push_back(static_cast<EntityId>(100000 + i * kHops + j));
      m.nodes.push_back(static_cast<EntityId>(h % (8 * kMatches)));
      for (std::size_t j = 0; j < kHops; ++j) {
        m.edges.push_back(static_cast<EdgeIndex>(i * kHops + j));
        m.segment.push_back(0);
      }
      m.psi = 1.0 - static_cast<double>(i / 2) / (2 * kMatches);
      m.weights.assign(kHops, m.psi);
      sets[i % 2].push_back(std::move(m));
    }
    std::vector<double> per_match;
    for (int rep = 0; rep < 5; ++rep) {
      auto copy = sets;
      const auto t0 = std::chrono::steady_clock::now();
      TaAssembler ta(std::move(copy), kMatches / 2);
      ta.run();
      const auto r = ta.result();
      const auto t1 = std::chrono::steady_clock::now();
      if (r.empty()) throw ContractViolation("calibration join produced nothing");
      per_match.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                           static_cast<double>(2 * kMatches));
    }
    std::sort(per_match.begin(), per_match.end());
    return per_match[per_match.size() / 2];
  }();
  return tick;
}

}  // namespace sgq
