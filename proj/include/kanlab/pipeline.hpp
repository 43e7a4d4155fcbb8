#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "kanlab/csv.hpp"
#include "kanlab/dataset.hpp"
#include "kanlab/rng.hpp"

namespace kanlab {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

namespace detail {

inline bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "N/A" || cell == "NaN" ||
         cell == "nan" || cell == "null" || cell == "NULL";
}

inline bool parse_numeric_cell(const std::string& cell, double& out) {
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e && std::isfinite(out);
}

}  // namespace detail

/// Load a CSV file with a header row; rows become string cells, the label
/// column is mapped to 1 where it equals positive_label, else 0.
inline RawTable load_csv(const std::string& path, const std::string& label_column,
                         const std::string& positive_label) {
  const csv::Table table = csv::parse_file(path);
  if (table.records.empty()) throw DataError("empty csv: " + path);
  const auto& header = table.records[0];

  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == label_column) label_idx = i;
  if (label_idx == header.size())
    throw DataError("missing column '" + label_column + "' in " + path);

  RawTable raw;
  raw.label_name = label_column;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != label_idx) raw.column_names.push_back(trim(header[i]));

  for (std::size_t r = 1; r < table.records.size(); ++r) {
    const auto& rec = table.records[r];
    if (rec.size() != header.size())
      throw DataError("unparseable row " + std::to_string(r + 1) + " in " + path +
                      ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(rec.size()));
    std::vector<std::string> cells;
    cells.reserve(header.size() - 1);
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (i != label_idx) cells.push_back(trim(rec[i]));
    raw.labels.push_back(trim(rec[label_idx]) == positive_label ? 1 : 0);
    raw.rows.push_back(std::move(cells));
  }
  return raw;
}

/// Encode a raw table into a fully numeric Dataset.
///   numeric columns: kept in original order; missing values imputed with the
///     column median plus a generated "<col>__missing" indicator column.
///   categorical columns: one-hot "<col>=<value>" up to 32 distinct values,
///     frequency-encoded "<col>__freq" beyond that.
/// Generated columns follow the originals, sorted alphabetically.
inline Dataset encode_numeric(const RawTable& raw) {
  const std::size_t n = raw.size();
  const std::size_t d = raw.column_names.size();
  if (n == 0) throw DataError("encode_numeric: empty table");

  struct Generated {
    std::string name;
    std::vector<double> values;
  };
  std::vector<std::string> numeric_names;
  std::vector<std::vector<double>> numeric_cols;
  std::vector<Generated> generated;

  for (std::size_t c = 0; c < d; ++c) {
    bool numeric = true;
    std::size_t missing = 0;
    std::vector<double> parsed(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = raw.rows[r][c];
      if (detail::is_missing_token(cell)) {
        ++missing;
        parsed[r] = std::numeric_limits<double>::quiet_NaN();
      } else if (!detail::parse_numeric_cell(cell, parsed[r])) {
        numeric = false;
        break;
      }
    }
    if (numeric && missing == n)
      throw DataError("all-missing column '" + raw.column_names[c] + "'");

    if (numeric) {
      if (missing > 0) {
        std::vector<double> present;
        present.reserve(n - missing);
        for (double v : parsed)
          if (!std::isnan(v)) present.push_back(v);
        std::sort(present.begin(), present.end());
        const std::size_t m = present.size();
        const double median = (m % 2 == 1)
                                  ? present[m / 2]
                                  : 0.5 * (present[m / 2 - 1] + present[m / 2]);
        Generated ind{raw.column_names[c] + "__missing", std::vector<double>(n, 0.0)};
        for (std::size_t r = 0; r < n; ++r)
          if (std::isnan(parsed[r])) {
            parsed[r] = median;
            ind.values[r] = 1.0;
          }
        generated.push_back(std::move(ind));
      }
      numeric_names.push_back(raw.column_names[c]);
      numeric_cols.push_back(std::move(parsed));
    } else {
      std::map<std::string, std::size_t> counts;  // ordered: deterministic
      for (std::size_t r = 0; r < n; ++r) ++counts[raw.rows[r][c]];
      if (counts.size() <= 32) {
        for (const auto& [value, count] : counts) {
          (void)count;
          Generated g{raw.column_names[c] + "=" + value, std::vector<double>(n, 0.0)};
          for (std::size_t r = 0; r < n; ++r)
            if (raw.rows[r][c] == value) g.values[r] = 1.0;
          generated.push_back(std::move(g));
        }
      } else {
        Generated g{raw.column_names[c] + "__freq", std::vector<double>(n, 0.0)};
        for (std::size_t r = 0; r < n; ++r)
          g.values[r] = static_cast<double>(counts[raw.rows[r][c]]) /
                        static_cast<double>(n);
        generated.push_back(std::move(g));
      }
    }
  }

  std::stable_sort(generated.begin(), generated.end(),
                   [](const Generated& a, const Generated& b) { return a.name < b.name; });

  Dataset out;
  out.label_name = raw.label_name;
  out.labels = raw.labels;
  out.column_names = numeric_names;
  for (const auto& g : generated) out.column_names.push_back(g.name);
  out.features = Matrix(n, out.column_names.size());
  for (std::size_t c = 0; c < numeric_cols.size(); ++c)
    for (std::size_t r = 0; r < n; ++r) out.features(r, c) = numeric_cols[c][r];
  for (std::size_t g = 0; g < generated.size(); ++g)
    for (std::size_t r = 0; r < n; ++r)
      out.features(r, numeric_cols.size() + g) = generated[g].values[r];
  return out;
}

/// Render a numeric Dataset back to a RawTable (used to show encode_numeric
/// is a passthrough on already-numeric data).
inline RawTable to_table(const Dataset& data) {
  RawTable raw;
  raw.column_names = data.column_names;
  raw.label_name = data.label_name;
  raw.labels = data.labels;
  raw.rows.resize(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    raw.rows[r].reserve(data.dim());
    for (std::size_t c = 0; c < data.dim(); ++c)
      raw.rows[r].push_back(format_double(data.features(r, c)));
  }
  return raw;
}

inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.column_names = data.column_names;
  out.label_name = data.label_name;
  out.features = Matrix(rows.size(), data.dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < data.dim(); ++c)
      out.features(i, c) = data.features(rows[i], c);
    out.labels.push_back(data.labels[rows[i]]);
  }
  return out;
}

/// Class-balancing protocol: when the positive class holds at least `cap`
/// rows, keep `cap` of each class; otherwise keep every positive row and an
/// equal-size random sample of negatives.
inline std::pair<Dataset, BalanceReport> balance(const Dataset& data,
                                                 std::size_t cap,
                                                 std::uint64_t seed) {
  BalanceReport report;
  for (int label : data.labels)
    (label == 1 ? report.original_fraud : report.original_nonfraud)++;
  if (report.original_fraud == 0 || report.original_nonfraud == 0)
    throw DataError("balance: single-class input");

  std::size_t keep;
  if (report.original_fraud >= cap) {
    report.rule_applied = BalanceRule::cap;
    keep = std::min(cap, report.original_nonfraud);
  } else {
    report.rule_applied = BalanceRule::match_minority;
    keep = std::min(report.original_fraud, report.original_nonfraud);
  }
  report.kept_fraud = keep;
  report.kept_nonfraud = keep;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, seed_stream::balance));
  rng.shuffle(order);

  std::vector<std::size_t> selected;
  selected.reserve(2 * keep);
  std::size_t quota[2] = {keep, keep};
  for (std::size_t idx : order) {
    std::size_t& q = quota[data.labels[idx]];
    if (q > 0) {
      --q;
      selected.push_back(idx);
    }
  }
  return {subset(data, selected), report};
}

/// Per-column standardization statistics, fitted on the training split only.
struct Scaler {
  std::vector<double> mean;            // per original column
  std::vector<double> stddev;          // population std, per original column
  std::vector<std::size_t> kept;       // original indices of surviving columns
  std::vector<std::string> dropped;    // names of zero-variance columns
  std::vector<std::string> input_columns;
};

inline Scaler standardize_fit(const Dataset& data) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (n == 0) throw DataError("standardize_fit: empty dataset");
  Scaler scaler;
  scaler.input_columns = data.column_names;
  scaler.mean.assign(d, 0.0);
  scaler.stddev.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += data.features(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dv = data.features(r, c) - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(n);
    scaler.mean[c] = mean;
    scaler.stddev[c] = std::sqrt(var);
    if (scaler.stddev[c] < 1e-12)
      scaler.dropped.push_back(data.column_names[c]);
    else
      scaler.kept.push_back(c);
  }
  return scaler;
}

inline Dataset standardize_apply(const Scaler& scaler, const Dataset& data) {
  if (data.dim() != scaler.mean.size())
    throw DataError("standardize_apply: dimension mismatch");
  Dataset out;
  out.label_name = data.label_name;
  out.labels = data.labels;
  out.features = Matrix(data.size(), scaler.kept.size());
  for (std::size_t k = 0; k < scaler.kept.size(); ++k) {
    const std::size_t c = scaler.kept[k];
    out.column_names.push_back(data.column_names[c]);
    for (std::size_t r = 0; r < data.size(); ++r)
      out.features(r, k) = (data.features(r, c) - scaler.mean[c]) / scaler.stddev[c];
  }
  return out;
}

namespace detail {

/// Largest-remainder allocation of n items over the fractions.
inline std::vector<std::size_t> allocate_counts(std::size_t n,
                                                std::span<const double> fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    const double exact = static_cast<double>(n) * fractions[s];
    counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-12));
    assigned += counts[s];
    remainders.push_back({exact - static_cast<double>(counts[s]), s});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned)
    ++counts[remainders[i % remainders.size()].second];
  return counts;
}

}  // namespace detail

/// Stratified, seeded train/valid/test split with largest-remainder rounding
/// per class.
inline SplitDataset split(const Dataset& data, std::array<double, 3> fractions,
                          std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split: fractions must sum to 1");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[data.labels[i]].push_back(i);

  Rng rng(derive_seed(seed, seed_stream::split));
  std::vector<std::size_t> parts[3];
  for (auto& cls : by_class) {
    rng.shuffle(cls);
    const auto counts = detail::allocate_counts(cls.size(), fractions);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      if (counts[s] == 0)
        throw DataError("split: class too small, a split would receive zero rows of a class");
      parts[s].insert(parts[s].end(), cls.begin() + offset,
                      cls.begin() + offset + counts[s]);
      offset += counts[s];
    }
  }
  for (auto& part : parts) rng.shuffle(part);

  SplitDataset out;
  out.split_seed = seed;
  out.fractions = fractions;
  out.train = subset(data, parts[0]);
  out.valid = subset(data, parts[1]);
  out.test = subset(data, parts[2]);
  return out;
}

}  // namespace kanlab
