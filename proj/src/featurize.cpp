#include "openintent/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "openintent/text.hpp"

namespace openintent {

// ---------------------------------------------------------------------------
// FeatureMatrix
// ---------------------------------------------------------------------------

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd v, std::vector<std::string> ids)
    : values(std::move(v)), row_ids(std::move(ids)) {
  validate();
}

void FeatureMatrix::validate() const {
  if (static_cast<Eigen::Index>(row_ids.size()) != values.rows())
    fail(ErrorKind::invalid_argument, "feature matrix: row id count does not match rows");
  if (values.cols() < 2) fail(ErrorKind::invalid_argument, "feature matrix: dimension must be >= 2");
  if (!values.allFinite()) fail(ErrorKind::invalid_argument, "feature matrix: non-finite value");
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.row_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    out.row_ids.push_back(row_ids.at(rows[i]));
  }
  return out;
}

namespace {

double parse_double(std::string_view token, const std::string& where) {
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    fail(ErrorKind::invalid_argument, where + ": unparseable float '" + std::string(token) + "'");
  return value;
}

std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

}  // namespace

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

TfidfVectorizer TfidfVectorizer::fit(std::span<const std::string> documents, std::size_t max_features) {
  if (documents.empty()) fail(ErrorKind::invalid_argument, "tfidf: empty corpus");
  if (max_features == 0) fail(ErrorKind::invalid_argument, "tfidf: max_features must be positive");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    auto tokens = tokenize(doc);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  if (df.empty()) fail(ErrorKind::invalid_argument, "tfidf: corpus has no tokens after tokenization");

  std::vector<std::pair<std::string, std::size_t>> terms(df.begin(), df.end());
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (terms.size() > max_features) terms.resize(max_features);
  std::sort(terms.begin(), terms.end());

  TfidfVectorizer v;
  v.num_documents_ = documents.size();
  const double n = static_cast<double>(documents.size());
  for (auto& [term, count] : terms) {
    v.vocabulary_.push_back(term);
    v.df_.push_back(count);
    v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  v.rebuild_index();
  return v;
}

void TfidfVectorizer::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_[vocabulary_[i]] = i;
}

std::size_t TfidfVectorizer::document_frequency(std::string_view term) const {
  const auto it = index_.find(std::string(term));
  return it == index_.end() ? 0 : df_[it->second];
}

Eigen::VectorXd TfidfVectorizer::transform_one(std::string_view document) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocabulary_.size()));
  for (const auto& token : tokenize(document)) {
    const auto it = index_.find(token);
    if (it != index_.end()) row(static_cast<Eigen::Index>(it->second)) += 1.0;
  }
  for (Eigen::Index j = 0; j < row.size(); ++j) row(j) *= idf_[static_cast<std::size_t>(j)];
  const double norm = row.norm();
  if (norm > 0.0) row /= norm;
  return row;
}

Eigen::MatrixXd TfidfVectorizer::transform(std::span<const std::string> documents) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(documents.size()),
                      static_cast<Eigen::Index>(vocabulary_.size()));
  for (std::size_t i = 0; i < documents.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = transform_one(documents[i]).transpose();
  return out;
}

json TfidfVectorizer::to_json() const {
  return json{{"vocabulary", vocabulary_}, {"df", df_}, {"idf", idf_}, {"num_documents", num_documents_}};
}

TfidfVectorizer TfidfVectorizer::from_json(const json& j) {
  TfidfVectorizer v;
  v.vocabulary_ = j.at("vocabulary").get<std::vector<std::string>>();
  v.df_ = j.at("df").get<std::vector<std::size_t>>();
  v.idf_ = j.at("idf").get<std::vector<double>>();
  v.num_documents_ = j.at("num_documents").get<std::size_t>();
  if (v.df_.size() != v.vocabulary_.size() || v.idf_.size() != v.vocabulary_.size())
    fail(ErrorKind::invalid_argument, "tfidf state: inconsistent lengths");
  v.rebuild_index();
  return v;
}

// ---------------------------------------------------------------------------
// Word vectors
// ---------------------------------------------------------------------------

const Eigen::VectorXd* WordVectorTable::find(std::string_view token) const {
  const auto it = vectors.find(std::string(token));
  return it == vectors.end() ? nullptr : &it->second;
}

WordVectorTable load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open word vectors: " + path.string());
  WordVectorTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = split_spaces(line);
    if (parts.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (parts.size() < 2) fail(ErrorKind::invalid_argument, where + ": no vector values");
    const std::size_t dim = parts.size() - 1;
    if (table.dim == 0) table.dim = dim;
    if (dim != table.dim)
      fail(ErrorKind::invalid_argument, where + ": ragged dimensions (expected " +
                                            std::to_string(table.dim) + ", got " + std::to_string(dim) + ")");
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) v(static_cast<Eigen::Index>(k)) = parse_double(parts[k + 1], where);
    table.vectors.insert_or_assign(std::string(parts[0]), std::move(v));
  }
  if (table.dim == 0) fail(ErrorKind::invalid_argument, "word vector file is empty: " + path.string());
  return table;
}

namespace {

std::optional<Eigen::VectorXd> mean_vector(const WordVectorTable& table, std::string_view text) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dim));
  std::size_t hits = 0;
  for (const auto& token : tokenize(text)) {
    if (const auto* v = table.find(token)) {
      sum += *v;
      ++hits;
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

}  // namespace

AverageEmbedding average_embed(const WordVectorTable& table, std::span<const Utterance> utterances) {
  AverageEmbedding out;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(utterances.size()), static_cast<Eigen::Index>(table.dim));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    ids.push_back(utterances[i].id);
    if (auto v = mean_vector(table, utterances[i].text)) {
      values.row(static_cast<Eigen::Index>(i)) = v->transpose();
    } else {
      values.row(static_cast<Eigen::Index>(i)).setZero();
      out.all_oov_ids.push_back(utterances[i].id);
    }
  }
  out.matrix = FeatureMatrix(std::move(values), std::move(ids));
  return out;
}

// ---------------------------------------------------------------------------
// Precomputed embeddings
// ---------------------------------------------------------------------------

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open embedding file: " + path.string());
  EmbeddingFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (lineno == 1) {
      if (line.rfind("dim=", 0) != 0) fail(ErrorKind::invalid_argument, where + ": expected header 'dim=<d>'");
      const std::string_view digits = std::string_view(line).substr(4);
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), file.dim);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || file.dim == 0)
        fail(ErrorKind::invalid_argument, where + ": invalid dimension");
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorKind::invalid_argument, where + ": expected 'id<TAB>values'");
    std::string id = line.substr(0, tab);
    const auto parts = split_spaces(std::string_view(line).substr(tab + 1));
    if (parts.size() != file.dim)
      fail(ErrorKind::invalid_argument, where + ": dimension mismatch (expected " + std::to_string(file.dim) +
                                            ", got " + std::to_string(parts.size()) + ")");
    Eigen::VectorXd v(static_cast<Eigen::Index>(file.dim));
    for (std::size_t k = 0; k < file.dim; ++k) v(static_cast<Eigen::Index>(k)) = parse_double(parts[k], where);
    if (!file.rows.emplace(id, std::move(v)).second)
      fail(ErrorKind::invalid_argument, where + ": duplicate embedding id '" + id + "'");
  }
  if (file.dim == 0) fail(ErrorKind::invalid_argument, "embedding file is empty: " + path.string());
  return file;
}

FeatureMatrix select_precomputed(const EmbeddingFile& file, std::span<const std::string> ids) {
  Eigen::MatrixXd values(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(file.dim));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = file.rows.find(ids[i]);
    if (it == file.rows.end()) fail(ErrorKind::invalid_argument, "missing embedding for id '" + ids[i] + "'");
    values.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
  }
  return FeatureMatrix(std::move(values), std::vector<std::string>(ids.begin(), ids.end()));
}

FeatureMatrix load_precomputed(const std::filesystem::path& path, std::span<const std::string> ids) {
  return select_precomputed(read_embedding_file(path), ids);
}

void write_embedding_file(const std::filesystem::path& path, const FeatureMatrix& features) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write embedding file: " + path.string());
  out << "dim=" << features.dim() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << features.row_ids[i] << '\t';
    for (std::size_t k = 0; k < features.dim(); ++k) {
      if (k) out << ' ';
      out << features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Featurizers
// ---------------------------------------------------------------------------

std::string Featurizer::fingerprint() const { return fnv1a_hex(state().dump()); }

namespace {

std::vector<std::string> texts_of(std::span<const Utterance> utterances) {
  std::vector<std::string> texts;
  texts.reserve(utterances.size());
  for (const auto& u : utterances) texts.push_back(u.text);
  return texts;
}

std::vector<std::string> ids_of(std::span<const Utterance> utterances) {
  std::vector<std::string> ids;
  ids.reserve(utterances.size());
  for (const auto& u : utterances) ids.push_back(u.id);
  return ids;
}

}  // namespace

FeatureMatrix TfidfFeaturizer::transform(std::span<const Utterance> utterances) const {
  const auto texts = texts_of(utterances);
  return FeatureMatrix(vectorizer_.transform(texts), ids_of(utterances));
}

std::optional<Eigen::VectorXd> TfidfFeaturizer::embed_text(std::string_view text) const {
  return vectorizer_.transform_one(text);
}

json TfidfFeaturizer::state() const { return json{{"kind", "tfidf"}, {"vectorizer", vectorizer_.to_json()}}; }

WordVectorFeaturizer::WordVectorFeaturizer(std::string path, std::shared_ptr<const WordVectorTable> table,
                                           std::string content_hash)
    : path_(std::move(path)), table_(std::move(table)), content_hash_(std::move(content_hash)) {}

FeatureMatrix WordVectorFeaturizer::transform(std::span<const Utterance> utterances) const {
  return average_embed(*table_, utterances).matrix;
}

std::optional<Eigen::VectorXd> WordVectorFeaturizer::embed_text(std::string_view text) const {
  return mean_vector(*table_, text);
}

json WordVectorFeaturizer::state() const {
  return json{{"kind", "glove"}, {"path", path_}, {"dim", table_->dim}, {"content_hash", content_hash_}};
}

PrecomputedFeaturizer::PrecomputedFeaturizer(std::string path, std::shared_ptr<const EmbeddingFile> file,
                                             std::string content_hash)
    : path_(std::move(path)), file_(std::move(file)), content_hash_(std::move(content_hash)) {}

FeatureMatrix PrecomputedFeaturizer::transform(std::span<const Utterance> utterances) const {
  const auto ids = ids_of(utterances);
  return select_precomputed(*file_, ids);
}

json PrecomputedFeaturizer::state() const {
  return json{{"kind", "precomputed"}, {"path", path_}, {"dim", file_->dim}, {"content_hash", content_hash_}};
}

std::unique_ptr<Featurizer> make_featurizer(const FeaturizerSpec& spec, std::span<const Utterance> corpus) {
  if (spec.kind == "tfidf") {
    const auto texts = texts_of(corpus);
    return std::make_unique<TfidfFeaturizer>(TfidfVectorizer::fit(texts, spec.max_features));
  }
  if (spec.kind == "glove") {
    const std::string hash = fnv1a_hex(read_file(spec.path));
    auto table = std::make_shared<WordVectorTable>(load_word_vectors(spec.path));
    return std::make_unique<WordVectorFeaturizer>(spec.path, std::move(table), hash);
  }
  if (spec.kind == "precomputed") {
    const std::string hash = fnv1a_hex(read_file(spec.path));
    auto file = std::make_shared<EmbeddingFile>(read_embedding_file(spec.path));
    return std::make_unique<PrecomputedFeaturizer>(spec.path, std::move(file), hash);
  }
  fail(ErrorKind::invalid_argument, "unknown featurizer: '" + spec.kind + "'");
}

std::unique_ptr<Featurizer> load_featurizer(const json& state) {
  const auto kind = state.at("kind").get<std::string>();
  if (kind == "tfidf") return std::make_unique<TfidfFeaturizer>(TfidfVectorizer::from_json(state.at("vectorizer")));
  if (kind == "glove" || kind == "precomputed") {
    FeaturizerSpec spec;
    spec.kind = kind;
    spec.path = state.at("path").get<std::string>();
    auto featurizer = make_featurizer(spec, {});
    if (featurizer->fingerprint() != fnv1a_hex(state.dump()))
      fail(ErrorKind::conflict, "featurizer fingerprint mismatch: " + spec.path + " changed since training");
    return featurizer;
  }
  fail(ErrorKind::invalid_argument, "unknown featurizer kind in state: '" + kind + "'");
}

}  // namespace openintent
