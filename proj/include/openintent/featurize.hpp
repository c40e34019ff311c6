#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/corpus.hpp"

namespace openintent {

/// n x d utterance representations with row ids. Values are finite and d >= 2.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_ids;

  FeatureMatrix() = default;
  FeatureMatrix(Eigen::MatrixXd v, std::vector<std::string> ids);

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }

  /// Throws invalid_argument when an invariant does not hold.
  void validate() const;

  /// Rows at the given positions, in that order.
  FeatureMatrix select(std::span<const std::size_t> rows) const;
};

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

/// Smooth idf: ln((1 + N) / (1 + df)) + 1. Raw term counts times idf, rows
/// L2-normalised on transform. Columns are in lexicographic term order.
class TfidfVectorizer {
 public:
  TfidfVectorizer() = default;

  /// Keeps the `max_features` terms with the highest document frequency
  /// (ties broken lexicographically).
  static TfidfVectorizer fit(std::span<const std::string> documents, std::size_t max_features);

  Eigen::MatrixXd transform(std::span<const std::string> documents) const;
  Eigen::VectorXd transform_one(std::string_view document) const;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }
  std::size_t document_frequency(std::string_view term) const;
  std::size_t num_documents() const { return num_documents_; }

  json to_json() const;
  static TfidfVectorizer from_json(const json& j);

 private:
  std::vector<std::string> vocabulary_;
  std::vector<double> idf_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t num_documents_ = 0;

  void rebuild_index();
};

// ---------------------------------------------------------------------------
// Word vectors (GloVe text format)
// ---------------------------------------------------------------------------

struct WordVectorTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, Eigen::VectorXd> vectors;

  const Eigen::VectorXd* find(std::string_view token) const;
};

/// Parses `token v1 ... vd` lines. Errors on ragged dimensions or bad floats.
WordVectorTable load_word_vectors(const std::filesystem::path& path);

struct AverageEmbedding {
  FeatureMatrix matrix;
  std::vector<std::string> all_oov_ids;  // rows that fell back to the zero vector
};

/// Mean of in-vocabulary token vectors per utterance.
AverageEmbedding average_embed(const WordVectorTable& table, std::span<const Utterance> utterances);

// ---------------------------------------------------------------------------
// Precomputed embeddings: header `dim=<d>`, then `id<TAB>f1 f2 ... fd`.
// ---------------------------------------------------------------------------

struct EmbeddingFile {
  std::size_t dim = 0;
  std::unordered_map<std::string, Eigen::VectorXd> rows;
};

EmbeddingFile read_embedding_file(const std::filesystem::path& path);

/// Rows for exactly the requested ids, in request order.
FeatureMatrix load_precomputed(const std::filesystem::path& path, std::span<const std::string> ids);
FeatureMatrix select_precomputed(const EmbeddingFile& file, std::span<const std::string> ids);

void write_embedding_file(const std::filesystem::path& path, const FeatureMatrix& features);

// ---------------------------------------------------------------------------
// Pluggable featurizers
// ---------------------------------------------------------------------------

using TextEmbedFn = std::function<std::optional<Eigen::VectorXd>(std::string_view)>;

class Featurizer {
 public:
  virtual ~Featurizer() = default;

  virtual std::string kind() const = 0;
  virtual FeatureMatrix transform(std::span<const Utterance> utterances) const = 0;

  /// Embeds free text (keyword candidates). nullopt when the provider cannot
  /// embed text it has not seen, as with precomputed files.
  virtual std::optional<Eigen::VectorXd> embed_text(std::string_view text) const = 0;

  /// Serializable state; enough to rebuild the featurizer with `load_featurizer`.
  virtual json state() const = 0;

  /// Stable hash of `state()`; models refuse features from a different one.
  std::string fingerprint() const;
};

struct FeaturizerSpec {
  std::string kind = "tfidf";  // tfidf | glove | precomputed
  std::string path;            // glove / precomputed source file
  std::size_t max_features = 2000;
};

/// Builds a featurizer, fitting it on `corpus` where the provider needs it.
std::unique_ptr<Featurizer> make_featurizer(const FeaturizerSpec& spec,
                                            std::span<const Utterance> corpus);
std::unique_ptr<Featurizer> load_featurizer(const json& state);

class TfidfFeaturizer final : public Featurizer {
 public:
  explicit TfidfFeaturizer(TfidfVectorizer vectorizer) : vectorizer_(std::move(vectorizer)) {}
  std::string kind() const override { return "tfidf"; }
  FeatureMatrix transform(std::span<const Utterance> utterances) const override;
  std::optional<Eigen::VectorXd> embed_text(std::string_view text) const override;
  json state() const override;
  const TfidfVectorizer& vectorizer() const { return vectorizer_; }

 private:
  TfidfVectorizer vectorizer_;
};

class WordVectorFeaturizer final : public Featurizer {
 public:
  WordVectorFeaturizer(std::string path, std::shared_ptr<const WordVectorTable> table,
                       std::string content_hash);
  std::string kind() const override { return "glove"; }
  FeatureMatrix transform(std::span<const Utterance> utterances) const override;
  std::optional<Eigen::VectorXd> embed_text(std::string_view text) const override;
  json state() const override;

 private:
  std::string path_;
  std::shared_ptr<const WordVectorTable> table_;
  std::string content_hash_;
};

class PrecomputedFeaturizer final : public Featurizer {
 public:
  PrecomputedFeaturizer(std::string path, std::shared_ptr<const EmbeddingFile> file,
                        std::string content_hash);
  std::string kind() const override { return "precomputed"; }
  FeatureMatrix transform(std::span<const Utterance> utterances) const override;
  std::optional<Eigen::VectorXd> embed_text(std::string_view) const override { return std::nullopt; }
  json state() const override;

 private:
  std::string path_;
  std::shared_ptr<const EmbeddingFile> file_;
  std::string content_hash_;
};

}  // namespace openintent
