#include "openintent/keywords.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "openintent/text.hpp"

namespace openintent {

StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto word = trim(text.substr(start, end - start));
    if (!word.empty()) {
      std::string w(word);
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.insert(std::move(w));
    }
    start = end + 1;
  }
  return out;
}

StopwordSet default_stopwords() { return parse_stopwords(default_stopwords_text()); }

StopwordSet load_stopwords(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::not_found, "stopword file not found: " + path.string());
  return parse_stopwords(read_file(path.string()));
}

std::vector<std::string> extract_candidates(std::span<const std::string> texts, NgramRange range,
                                            const StopwordSet& stopwords) {
  if (range.min == 0 || range.max < range.min)
    fail(ErrorKind::invalid_argument, "ngram range must satisfy 1 <= min <= max");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(texts.size());
  for (const auto& t : texts) tokens.push_back(tokenize(t));

  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t n = range.min; n <= range.max; ++n) {
    for (const auto& toks : tokens) {
      for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        bool ok = true;
        std::string phrase;
        for (std::size_t j = i; j < i + n && ok; ++j) {
          if (stopwords.count(toks[j])) ok = false;
          if (j > i) phrase += ' ';
          phrase += toks[j];
        }
        if (ok && seen.insert(phrase).second) out.push_back(std::move(phrase));
      }
    }
  }
  return out;
}

std::string_view to_string(KeywordLevel level) { return level == KeywordLevel::cluster ? "cluster" : "sentence"; }

KeywordLevel parse_keyword_level(std::string_view token) {
  if (token == "cluster") return KeywordLevel::cluster;
  if (token == "sentence") return KeywordLevel::sentence;
  fail(ErrorKind::invalid_argument, "unknown keyword level: '" + std::string(token) + "'");
}

json KeywordRecommendation::to_json() const {
  json kws = json::array();
  for (const auto& k : keywords) kws.push_back(json{{"keyword", k.phrase}, {"confidence", k.confidence}});
  return json{{"cluster", cluster}, {"level", to_string(level)}, {"keywords", kws}, {"warnings", warnings}};
}

KeywordRecommendation KeywordRecommendation::from_json(const json& j) {
  KeywordRecommendation r;
  r.cluster = j.at("cluster").get<int>();
  r.level = parse_keyword_level(j.at("level").get<std::string>());
  for (const auto& k : j.at("keywords"))
    r.keywords.push_back(Keyword{k.at("keyword").get<std::string>(), k.at("confidence").get<double>()});
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

KeywordRecommendation score_keywords(int cluster, std::span<const std::string> candidates,
                                     std::span<const Eigen::VectorXd> sentence_embeddings, const TextEmbedFn& embed,
                                     KeywordLevel level, std::size_t top_n) {
  KeywordRecommendation out;
  out.cluster = cluster;
  out.level = level;
  if (sentence_embeddings.empty()) {
    out.warnings.push_back("cluster has no sentence embeddings");
    return out;
  }
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(sentence_embeddings.front().size());
  for (const auto& s : sentence_embeddings) centroid += s;
  centroid /= static_cast<double>(sentence_embeddings.size());
  if (level == KeywordLevel::cluster && centroid.norm() == 0.0) {
    out.warnings.push_back("cluster centroid has zero norm");
    return out;
  }

  std::vector<Keyword> scored;
  for (const auto& c : candidates) {
    const auto v = embed(c);
    if (!v || v->norm() == 0.0 || v->size() != centroid.size()) {
      out.warnings.push_back("skipped candidate with zero-norm embedding: " + c);
      continue;
    }
    double score = 0.0;
    if (level == KeywordLevel::cluster) {
      score = cosine_similarity(*v, centroid);
    } else {
      score = -std::numeric_limits<double>::infinity();
      for (const auto& s : sentence_embeddings)
        if (s.norm() > 0.0) score = std::max(score, cosine_similarity(*v, s));
      if (!std::isfinite(score)) continue;
    }
    scored.push_back(Keyword{c, score});
  }
  std::sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.phrase.size() != b.phrase.size()) return a.phrase.size() < b.phrase.size();
    return a.phrase < b.phrase;
  });
  if (scored.size() > top_n) scored.resize(top_n);
  out.keywords = std::move(scored);
  return out;
}

}  // namespace openintent
