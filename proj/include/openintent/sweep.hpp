#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "openintent/common.hpp"

namespace openintent {

/// One (dataset, kir, lr) cell with its metric values.
struct SweepRow {
  std::string dataset;
  double kir = 0.0;
  double lr = 0.0;
  std::map<std::string, double> metrics;
};

/// One line-chart series: a metric of a dataset over the sorted (kir, lr) grid.
struct SweepSeries {
  std::string dataset;
  std::string metric;
  std::vector<std::pair<double, double>> points;  // (kir, lr)
  std::vector<double> values;

  json to_json() const;
};

/// Series ordered by dataset then metric; points sorted by kir then lr.
/// Rejects empty input and duplicate (dataset, kir, lr) keys.
std::vector<SweepSeries> sweep_curves(std::span<const SweepRow> rows);

/// Tab-separated table with a `dataset<TAB>kir<TAB>lr<TAB>metric...` header.
/// Blank lines and lines starting with '#' are skipped.
std::vector<SweepRow> parse_sweep_table(std::string_view text);
std::vector<SweepRow> load_sweep_table(const std::filesystem::path& path);

json sweep_payload(std::span<const SweepSeries> series);

}  // namespace openintent
