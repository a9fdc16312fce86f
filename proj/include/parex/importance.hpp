#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace parex {

// Ordered first-order importance map for one objective, descending by
// importance with alphabetical tie-breaks.  trial_count stamps the number of
// completed trials the report was computed from.
struct ImportanceReport {
  std::vector<std::pair<std::string, double>> entries;
  std::int64_t trial_count = 0;
  int objective_index = 0;
  bool degenerate = false;  // all targets equal; importances forced to zero

  bool operator==(const ImportanceReport&) const = default;
};

}  // namespace parex
