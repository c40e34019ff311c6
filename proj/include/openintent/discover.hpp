#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/mlp.hpp"

namespace openintent {

enum class DiscoverMethod { kmeans, agglomerative, semi_seeded, deep_aligned };

std::string_view to_string(DiscoverMethod method);

/// Case-insensitive. Names from the wider catalogue (DEC, DCN, ...) are
/// registered but throw not_implemented; anything else is invalid_argument.
DiscoverMethod parse_discover_method(std::string_view token);

/// Registered method names without an implementation.
const std::vector<std::string>& unimplemented_discover_methods();

enum class Linkage { average, complete, ward };
std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view token);

struct ClusterAssignment {
  std::vector<int> labels;          // cluster id per row, in [0, k)
  std::optional<double> inertia;    // sum of squared distances to the assigned centre
  std::vector<std::size_t> sizes;   // per cluster

  json to_json() const;
};

class ClusterModel {
 public:
  DiscoverMethod method = DiscoverMethod::kmeans;
  std::size_t k = 0;
  Eigen::MatrixXd centers;             // k x d, in the representation space
  std::optional<Linkage> linkage;      // agglomerative only
  std::optional<MlpEncoder> encoder;   // deep_aligned only
  std::uint64_t seed = 0;
  std::string featurizer_fingerprint;
  json notes = json::object();

  /// Input features mapped into the space the centres live in.
  Eigen::MatrixXd represent(const Eigen::MatrixXd& x) const;

  /// Nearest centre per row, ties to the lower index.
  std::vector<int> assign(const Eigen::MatrixXd& x) const;

  json to_json() const;
  static ClusterModel from_json(const json& j);
};

struct ClusterFit {
  ClusterModel model;
  ClusterAssignment assignment;
  std::vector<double> inertia_history;  // after every centre update (k-means family)
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Nearest centre per row; ties go to the lower index.
std::vector<int> nearest_center(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers);

/// Centre of each cluster as the mean of its members.
Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t k);

double inertia(const Eigen::MatrixXd& x, std::span<const int> labels, const Eigen::MatrixXd& centers);

std::vector<std::size_t> cluster_sizes(std::span<const int> labels, std::size_t k);

/// k-means++ seeding with greedy local trials. `existing` centres (possibly
/// none) count towards the D^2 weights; `candidates` restricts which rows may
/// become centres (all rows when empty). Returns only the new centres.
Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, std::size_t count, const Eigen::MatrixXd& existing,
                              std::span<const std::size_t> candidates, Rng& rng);

/// Lloyd iterations from the given centres until the assignment repeats or
/// `max_iter` updates have run. Empty clusters take the point farthest from
/// the centre of the largest cluster.
ClusterFit lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centers, std::size_t max_iter);

/// Maps each cluster of `current` to a cluster of `previous` by minimum-cost
/// matching on squared centre distances. result[j] = previous id for current j.
std::vector<std::size_t> align_clusters(const Eigen::MatrixXd& previous, const Eigen::MatrixXd& current);

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

ClusterFit kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300);

inline constexpr std::size_t kAgglomerativeMaxRows = 4000;

/// Bottom-up merging with Lance-Williams updates. Ties merge the
/// lexicographically lowest pair. Cluster ids follow first appearance.
ClusterFit agglomerative(const Eigen::MatrixXd& x, std::size_t k, Linkage linkage);

/// `seed_class[i]` is a class index for seeded rows and -1 otherwise. Seeded
/// classes start from their means (ascending class index); the remaining
/// centres come from k-means++ over unseeded rows. With no seeded rows this is
/// exactly `kmeans`.
ClusterFit semi_seeded_kmeans(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k_total,
                              std::uint64_t seed, std::size_t max_iter = 300);

struct DeepAlignedOptions {
  std::size_t epochs = 10;
  std::size_t max_iter = 300;
  /// Encoder shape and optimiser; `epochs` here is the supervised pretraining
  /// budget on seeded rows.
  TrainingOptions classifier;
};

/// Alternates clustering in the encoder space with one training pass against
/// pseudo-labels aligned to the previous epoch. Zero epochs is k-means on the
/// raw features. notes["flip_rate"] is the fraction of pseudo-labels that
/// changed between the last two clusterings (null when undefined).
ClusterFit deep_aligned_train(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k,
                              std::uint64_t seed, const DeepAlignedOptions& options);

/// k-means with k_max, then counts clusters holding at least
/// drop_fraction * n / k_max points. Never below 1.
std::size_t estimate_k(const Eigen::MatrixXd& x, std::size_t k_max, double drop_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Configured discovery
// ---------------------------------------------------------------------------

struct DiscoverOptions {
  DiscoverMethod method = DiscoverMethod::semi_seeded;
  Linkage linkage = Linkage::ward;
  std::size_t max_iter = 300;
  std::size_t deep_epochs = 10;
  double drop_fraction = 0.5;
  std::size_t k_max = 0;  // 0: twice the default k
  TrainingOptions classifier;

  json params_json() const;
  void apply_params(const json& params);
};

/// Runs the configured method. Seeds are ignored by the unsupervised methods.
ClusterFit fit_discovery(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k,
                         std::uint64_t seed, const DiscoverOptions& options, std::string featurizer_fingerprint);

}  // namespace openintent
