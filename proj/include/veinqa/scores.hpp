#pragma once

#include <string>
#include <vector>

namespace veinqa {

/// One template comparison; key_a < key_b are canonical record keys.
struct ScoredComparison {
  std::string key_a;
  std::string key_b;
  double score = 0.0;

  friend bool operator==(const ScoredComparison&, const ScoredComparison&) = default;
};

struct ScoreSet {
  std::vector<ScoredComparison> genuine;
  std::vector<ScoredComparison> impostor;

  /// Sorts both lists by (key_a, key_b) so output order never depends on
  /// how the comparisons were scheduled.
  void canonicalize();

  friend bool operator==(const ScoreSet&, const ScoreSet&) = default;
};

}  // namespace veinqa
