#pragma once
#include <string>

#include "metastab/fields.hpp"

namespace metastab {

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  bool assumed = false;  // undecidable from samples, recorded rather than tested
  double margin = 0;     // signed slack; <= 0 means the inequality holds
  Vec worst;             // sample realizing the margin
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool pass = false;
  const AssumptionCheck* find(const std::string& name) const;
};

// Sample-based verification of the structural assumptions: drift pinned and
// inward, uniform ellipticity over the level interval, boundary-data levels
// consistent with the declared scalars.
AssumptionReport validate(const ProblemSpec& spec, const Grid& grid);

// H^c(x, p) = a(x,c) p . p + b(x) . p
double hamiltonian(const ProblemSpec& spec, Vec x, double c, Vec p);

// Legendre dual: L(x, c, q) = (q - b) . a^{ -1 }(q - b) / 4
double lagrangian(const ProblemSpec& spec, Vec x, double c, Vec q);

}  // namespace metastab
