#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/sweep.hpp"

namespace openintent {

inline constexpr int kViewSchemaVersion = 1;

enum class ViewTag { confidence_histogram, representation_2d, center_2d, confusion, sweep_curve, keywords };

std::string_view to_string(ViewTag tag);
/// Unknown tags are not_found.
ViewTag parse_view_tag(std::string_view token);
const std::vector<ViewTag>& all_view_tags();

/// Builds a per-run view from the analysis artifact written at training time.
/// Throws conflict, with the reason, when the run's methods cannot produce it.
/// Result: {"tag", "schema_version", "payload"}.
json build_run_view(ViewTag tag, const json& analysis, const json& params = json::object());

/// Sweep view over several runs (or a transcribed table).
json build_sweep_view(std::span<const SweepRow> rows);

}  // namespace openintent
