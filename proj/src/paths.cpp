#include "sgq/paths.hpp"

#include <algorithm>
#include <cmath>

#include "sgq/error.hpp"

namespace sgq {

double weight_product(std::span<const double> weights) {
  double p = 1.0;
  for (double w : weights) p *= w;
  return p;
}

double pss_from_product(double product, std::size_t n) {
  if (n == 0) throw ContractViolation("pss of an empty path");
  if (n == 1) return product;
  return std::pow(product, 1.0 / static_cast<double>(n));
}

double exact_pss(std::span<const double> weights) {
  if (weights.empty()) throw ContractViolation("pss of an empty path");
  return pss_from_product(weight_product(weights), weights.size());
}

double exact_pss(const Match& m) { return exact_pss(m.weights); }

bool match_before(const Match& a, const Match& b) {
  if (a.psi != b.psi) return a.psi > b.psi;
  if (a.hops() != b.hops()) return a.hops() < b.hops();
  if (a.nodes != b.nodes) return a.nodes < b.nodes;
  return a.edges < b.edges;
}

void sort_matches(MatchSet& set) { std::sort(set.begin(), set.end(), match_before); }

}  // namespace sgq
