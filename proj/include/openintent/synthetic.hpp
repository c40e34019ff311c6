#pragma once

#include <filesystem>

#include "openintent/corpus.hpp"
#include "openintent/featurize.hpp"

namespace openintent {

/// Isotropic Gaussian intents: class centres on a sphere of radius
/// `center_norm`, pairwise at least `min_separation` apart, points at
/// centre + sigma * N(0, I). Texts are drawn from a small per-class
/// vocabulary so keyword extraction has something to find.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t dim = 32;
  std::size_t per_class = 200;
  double sigma = 1.0;
  double center_norm = 10.0;
  double min_separation = 8.0;
  double train_fraction = 0.6;
  double eval_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset dataset;
  FeatureMatrix embeddings;  // every utterance, train then eval then test
  Eigen::MatrixXd centers;   // row per label, label_set order
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Writes train/eval/test.jsonl and embeddings.txt (precomputed format).
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace openintent
