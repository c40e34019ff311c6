#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/featurize.hpp"

namespace openintent {

using StopwordSet = std::unordered_set<std::string>;

/// The bundled English list, one word per line.
std::string_view default_stopwords_text();
StopwordSet default_stopwords();

/// One token per line; blank lines are ignored.
StopwordSet parse_stopwords(std::string_view text);
StopwordSet load_stopwords(const std::filesystem::path& path);

struct NgramRange {
  std::size_t min = 1;
  std::size_t max = 2;
};

/// Distinct n-grams over tokenized texts. An n-gram containing a stopword is
/// dropped. Order: by n, then text, then position of first occurrence.
std::vector<std::string> extract_candidates(std::span<const std::string> texts, NgramRange range,
                                            const StopwordSet& stopwords);

enum class KeywordLevel { cluster, sentence };
std::string_view to_string(KeywordLevel level);
KeywordLevel parse_keyword_level(std::string_view token);

struct Keyword {
  std::string phrase;
  double confidence = 0.0;  // cosine similarity
};

struct KeywordRecommendation {
  int cluster = 0;
  std::vector<Keyword> keywords;  // at most top_n, confidence non-increasing
  KeywordLevel level = KeywordLevel::cluster;
  std::vector<std::string> warnings;

  json to_json() const;
  static KeywordRecommendation from_json(const json& j);
};

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Cluster level scores each candidate against the mean sentence embedding;
/// sentence level takes the best cosine over the individual sentences.
/// Candidates that fail to embed or embed to zero are skipped with a warning.
/// Ties rank shorter phrases first, then lexicographically.
KeywordRecommendation score_keywords(int cluster, std::span<const std::string> candidates,
                                     std::span<const Eigen::VectorXd> sentence_embeddings, const TextEmbedFn& embed,
                                     KeywordLevel level = KeywordLevel::cluster, std::size_t top_n = 3);

}  // namespace openintent
