#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kanlab/common.hpp"

namespace kanlab {

/// Fully numeric dataset: feature matrix with binary labels.
struct Dataset {
  Matrix features;                        // n x d
  std::vector<int> labels;                // n entries of 0/1
  std::vector<std::string> column_names;  // d entries
  std::string label_name;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }
};

/// Raw table as loaded from CSV: string cells, labels already mapped to 0/1.
/// encode_numeric turns this into a Dataset.
struct RawTable {
  std::vector<std::string> column_names;
  std::string label_name;
  std::vector<std::vector<std::string>> rows;  // n rows of d cells
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct SplitDataset {
  Dataset train;
  Dataset valid;
  Dataset test;
  std::uint64_t split_seed = 0;
  std::array<double, 3> fractions{0.7, 0.1, 0.2};
};

enum class BalanceRule { cap, match_minority };

struct BalanceReport {
  std::size_t original_fraud = 0;
  std::size_t original_nonfraud = 0;
  std::size_t kept_fraud = 0;
  std::size_t kept_nonfraud = 0;
  BalanceRule rule_applied = BalanceRule::match_minority;
};

inline const char* to_string(BalanceRule r) {
  return r == BalanceRule::cap ? "cap-7500" : "match-minority";
}

}  // namespace kanlab
