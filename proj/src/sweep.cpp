#include "openintent/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <tuple>

#include "openintent/text.hpp"

namespace openintent {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(trim(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start)));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_number(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::invalid_argument, "sweep table line " + std::to_string(line_no) + ": not a number: '" +
                                          std::string(s) + "'");
  return v;
}

}  // namespace

json SweepSeries::to_json() const {
  json pts = json::array();
  for (std::size_t i = 0; i < points.size(); ++i)
    pts.push_back(json{{"kir", points[i].first}, {"lr", points[i].second}, {"value", values[i]}});
  return json{{"dataset", dataset}, {"metric", metric}, {"points", pts}, {"values", values}};
}

std::vector<SweepSeries> sweep_curves(std::span<const SweepRow> rows) {
  if (rows.empty()) fail(ErrorKind::invalid_argument, "sweep: no rows");
  std::set<std::tuple<std::string, double, double>> keys;
  for (const auto& r : rows)
    if (!keys.emplace(r.dataset, r.kir, r.lr).second) {
      std::ostringstream msg;
      msg << "sweep: duplicate key (dataset=" << r.dataset << ", kir=" << r.kir << ", lr=" << r.lr << ")";
      fail(ErrorKind::invalid_argument, msg.str());
    }

  std::vector<const SweepRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepRow* a, const SweepRow* b) {
    return std::tie(a->dataset, a->kir, a->lr) < std::tie(b->dataset, b->kir, b->lr);
  });

  std::map<std::pair<std::string, std::string>, SweepSeries> series;
  for (const SweepRow* r : sorted)
    for (const auto& [metric, value] : r->metrics) {
      auto& s = series[{r->dataset, metric}];
      s.dataset = r->dataset;
      s.metric = metric;
      s.points.emplace_back(r->kir, r->lr);
      s.values.push_back(value);
    }
  std::vector<SweepSeries> out;
  for (auto& [_, s] : series) out.push_back(std::move(s));
  return out;
}

std::vector<SweepRow> parse_sweep_table(std::string_view text) {
  std::vector<SweepRow> rows;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cells = split_tabs(line);
    if (header.empty()) {
      if (cells.size() < 4 || cells[0] != "dataset" || cells[1] != "kir" || cells[2] != "lr")
        fail(ErrorKind::invalid_argument, "sweep table: header must start with dataset, kir, lr and name a metric");
      for (std::size_t i = 3; i < cells.size(); ++i) header.emplace_back(cells[i]);
      continue;
    }
    if (cells.size() != header.size() + 3)
      fail(ErrorKind::invalid_argument, "sweep table line " + std::to_string(line_no) + ": expected " +
                                            std::to_string(header.size() + 3) + " fields");
    SweepRow row;
    row.dataset = std::string(cells[0]);
    row.kir = parse_number(cells[1], line_no);
    row.lr = parse_number(cells[2], line_no);
    for (std::size_t i = 0; i < header.size(); ++i) row.metrics[header[i]] = parse_number(cells[i + 3], line_no);
    rows.push_back(std::move(row));
  }
  if (header.empty()) fail(ErrorKind::invalid_argument, "sweep table: missing header");
  return rows;
}

std::vector<SweepRow> load_sweep_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::not_found, "sweep table not found: " + path.string());
  return parse_sweep_table(read_file(path.string()));
}

json sweep_payload(std::span<const SweepSeries> series) {
  json out = json::array();
  for (const auto& s : series) out.push_back(s.to_json());
  return json{{"series", out}};
}

}  // namespace openintent
