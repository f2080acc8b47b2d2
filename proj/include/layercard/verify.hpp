#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layercard/io.hpp"
#include "layercard/linalg.hpp"

namespace layercard {

// One audited inequality lhs <= rhs on one random instance. margin is
// rhs - lhs; pass allows a relative roundoff slack.
struct CheckRow {
  std::uint64_t seed = 0;
  std::string check;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckRow> rows;  // instances x 9, instance-major in seed order
  Index violations = 0;
};

// Randomized audit of every proved bound on coupled quadratic instances of
// dimension at most 40. Instance i draws from seed base_seed + i; the nine
// checks per instance are, in row order: the additivity gap against the
// coupling bound, the two gain-sandwich sides, the freeze-penalty lower and
// upper bounds and its compensation-slack floor, the two sides of the
// interaction-norm inequality, and the covariance coupling lower bound.
VerifyReport run_verify(Index instances, std::uint64_t base_seed);

Csv verify_to_csv(const VerifyReport& report);

}  // namespace layercard
