#include "openintent/views.hpp"

#include "openintent/metrics.hpp"

namespace openintent {

namespace {

json wrap(ViewTag tag, json payload) {
  return json{{"tag", to_string(tag)}, {"schema_version", kViewSchemaVersion}, {"payload", std::move(payload)}};
}

const json& require(const json& analysis, const char* key, const std::string& reason) {
  if (!analysis.contains(key) || analysis.at(key).is_null()) fail(ErrorKind::conflict, reason);
  return analysis.at(key);
}

std::size_t bins_param(const json& params) {
  if (!params.contains("bins")) return 10;
  const json& b = params.at("bins");
  std::size_t bins = 0;
  if (b.is_string()) {
    try {
      bins = static_cast<std::size_t>(std::stoul(b.get<std::string>()));
    } catch (const std::exception&) {
      fail(ErrorKind::invalid_argument, "bins must be an integer");
    }
  } else if (b.is_number_unsigned()) {
    bins = b.get<std::size_t>();
  } else {
    fail(ErrorKind::invalid_argument, "bins must be an integer");
  }
  if (bins < 2 || bins > 1000) fail(ErrorKind::invalid_argument, "bins must be between 2 and 1000");
  return bins;
}

}  // namespace

std::string_view to_string(ViewTag tag) {
  switch (tag) {
    case ViewTag::confidence_histogram: return "confidence_histogram";
    case ViewTag::representation_2d: return "representation_2d";
    case ViewTag::center_2d: return "center_2d";
    case ViewTag::confusion: return "confusion";
    case ViewTag::sweep_curve: return "sweep_curve";
    case ViewTag::keywords: return "keywords";
  }
  return "confusion";
}

const std::vector<ViewTag>& all_view_tags() {
  static const std::vector<ViewTag> tags{ViewTag::confidence_histogram, ViewTag::representation_2d,
                                         ViewTag::center_2d,            ViewTag::confusion,
                                         ViewTag::sweep_curve,          ViewTag::keywords};
  return tags;
}

ViewTag parse_view_tag(std::string_view token) {
  for (ViewTag t : all_view_tags())
    if (to_string(t) == token) return t;
  fail(ErrorKind::not_found, "unknown view: '" + std::string(token) + "'");
}

json build_run_view(ViewTag tag, const json& analysis, const json& params) {
  switch (tag) {
    case ViewTag::confidence_histogram: {
      const json& det = require(analysis, "detection",
                                "confidence_histogram needs a detector; this run has no detection step");
      if (!det.at("threshold_based").get<bool>())
        fail(ErrorKind::conflict, "confidence_histogram needs a threshold-based detector (msp, doc, openmax); "
                                  "this run uses " + det.at("method").get<std::string>());
      const auto scores = det.at("confidence").get<std::vector<double>>();
      std::vector<char> open;
      for (const auto& g : det.at("gold_open")) open.push_back(g.get<bool>() ? 1 : 0);
      const auto h = confidence_histogram(scores, open, bins_param(params));
      json payload = h.to_json();
      payload["semantics"] = det.at("semantics");
      payload["method"] = det.at("method");
      std::size_t open_total = 0;
      for (char o : open) open_total += o != 0;
      payload["known_total"] = open.size() - open_total;
      payload["open_total"] = open_total;
      return wrap(tag, payload);
    }
    case ViewTag::representation_2d: {
      const json& rep = require(analysis, "representation",
                                "representation_2d is unavailable for this run (no projectable representation)");
      return wrap(tag, rep);
    }
    case ViewTag::center_2d: {
      const json& cl = require(analysis, "clusters", "center_2d needs cluster centres; this run has no discovery step");
      if (cl.at("centers_2d").is_null()) fail(ErrorKind::conflict, "center_2d: cluster centres could not be projected");
      const Eigen::MatrixXd xy = matrix_from_json(cl.at("centers_2d"));
      json centers = json::array();
      const json& info = cl.at("info");
      for (Eigen::Index i = 0; i < xy.rows(); ++i) {
        const json& c = info.at(static_cast<std::size_t>(i));
        centers.push_back(json{{"id", c.at("id")},
                               {"x", xy(i, 0)},
                               {"y", xy(i, 1)},
                               {"known", c.at("known")},
                               {"label", c.at("known").get<bool>() ? c.at("label") : json(nullptr)},
                               {"size", c.at("size")}});
      }
      return wrap(tag, json{{"method", cl.at("method")}, {"centers", centers}, {"projection", cl.at("projection")}});
    }
    case ViewTag::confusion: {
      const json& conf = require(analysis, "confusion", "confusion needs a detector; this run has no detection step");
      return wrap(tag, conf);
    }
    case ViewTag::keywords: {
      const json& cl = require(analysis, "clusters", "keywords need discovered clusters; this run has no discovery step");
      json clusters = json::array();
      for (const auto& c : cl.at("info"))
        clusters.push_back(json{{"cluster", c.at("id")},
                                {"known", c.at("known")},
                                {"label", c.at("known").get<bool>() ? c.at("label") : json(nullptr)},
                                {"size", c.at("size")},
                                {"level", c.at("keywords").at("level")},
                                {"keywords", c.at("keywords").at("keywords")}});
      return wrap(tag, json{{"clusters", clusters}});
    }
    case ViewTag::sweep_curve:
      fail(ErrorKind::conflict, "sweep_curve spans runs; request it without a run id");
  }
  fail(ErrorKind::internal, "unhandled view");
}

json build_sweep_view(std::span<const SweepRow> rows) {
  const auto series = sweep_curves(rows);
  return wrap(ViewTag::sweep_curve, sweep_payload(series));
}

}  // namespace openintent
