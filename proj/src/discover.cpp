#include "openintent/discover.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "openintent/hungarian.hpp"

namespace openintent {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void check_input(const Eigen::MatrixXd& x, std::size_t k, std::string_view what) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k == 0) fail(ErrorKind::invalid_argument, std::string(what) + ": k must be at least 1");
  if (k > n)
    fail(ErrorKind::invalid_argument, std::string(what) + ": k (" + std::to_string(k) +
                                          ") exceeds the number of points (" + std::to_string(n) + ")");
  if (!x.allFinite()) fail(ErrorKind::invalid_argument, std::string(what) + ": non-finite features");
}

// Moves points into empty clusters: each empty cluster takes the point of the
// largest cluster that lies farthest from that cluster's centre.
void repair_empty(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, std::vector<int>& labels) {
  const auto k = static_cast<std::size_t>(centers.rows());
  auto sizes = cluster_sizes(labels, k);
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes[largest] < 2) break;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != static_cast<int>(largest)) continue;
      const double d = squared_distance(x, static_cast<Eigen::Index>(i), centers, static_cast<Eigen::Index>(largest));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[far] = static_cast<int>(c);
    --sizes[largest];
    ++sizes[c];
  }
}

ClusterAssignment make_assignment(std::vector<int> labels, std::size_t k, std::optional<double> sse) {
  ClusterAssignment a;
  a.sizes = cluster_sizes(labels, k);
  a.labels = std::move(labels);
  a.inertia = sse;
  return a;
}

}  // namespace

std::string_view to_string(DiscoverMethod method) {
  switch (method) {
    case DiscoverMethod::kmeans: return "kmeans";
    case DiscoverMethod::agglomerative: return "agglomerative";
    case DiscoverMethod::semi_seeded: return "semi_seeded";
    case DiscoverMethod::deep_aligned: return "deep_aligned";
  }
  return "kmeans";
}

const std::vector<std::string>& unimplemented_discover_methods() {
  static const std::vector<std::string> names{"sae_km", "dec", "dcn", "kcl", "mcl", "dtc", "cdac_plus"};
  return names;
}

DiscoverMethod parse_discover_method(std::string_view token) {
  const std::string t = lower(token);
  if (t == "kmeans" || t == "km") return DiscoverMethod::kmeans;
  if (t == "agglomerative" || t == "ag") return DiscoverMethod::agglomerative;
  if (t == "semi_seeded") return DiscoverMethod::semi_seeded;
  if (t == "deep_aligned" || t == "deepaligned") return DiscoverMethod::deep_aligned;
  std::string canon = t;
  std::replace(canon.begin(), canon.end(), '-', '_');
  if (canon == "cdac+") canon = "cdac_plus";
  const auto& pending = unimplemented_discover_methods();
  if (std::find(pending.begin(), pending.end(), canon) != pending.end())
    fail(ErrorKind::not_implemented, "method registered but not implemented: " + std::string(token) +
                                         " (see docs/plugins.md for adding a discovery method)");
  fail(ErrorKind::invalid_argument, "unknown discovery method: '" + std::string(token) + "'");
}

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::average: return "average";
    case Linkage::complete: return "complete";
    case Linkage::ward: return "ward";
  }
  return "ward";
}

Linkage parse_linkage(std::string_view token) {
  const std::string t = lower(token);
  if (t == "average") return Linkage::average;
  if (t == "complete") return Linkage::complete;
  if (t == "ward") return Linkage::ward;
  fail(ErrorKind::invalid_argument, "unknown linkage: '" + std::string(token) + "'");
}

json ClusterAssignment::to_json() const {
  return json{{"labels", labels}, {"inertia", inertia ? json(*inertia) : json(nullptr)}, {"sizes", sizes}};
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

std::vector<int> nearest_center(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers) {
  if (x.cols() != centers.cols()) fail(ErrorKind::invalid_argument, "cluster assignment: dimension mismatch");
  std::vector<int> out(static_cast<std::size_t>(x.rows()), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = squared_distance(x, i, centers, c);
      if (d < best) {
        best = d;
        out[static_cast<std::size_t>(i)] = static_cast<int>(c);
      }
    }
  }
  return out;
}

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t k) {
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
  std::vector<double> counts(k, 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    centers.row(c) += x.row(i);
    counts[static_cast<std::size_t>(c)] += 1.0;
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0) centers.row(static_cast<Eigen::Index>(c)) /= counts[c];
  return centers;
}

double inertia(const Eigen::MatrixXd& x, std::span<const int> labels, const Eigen::MatrixXd& centers) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sse += squared_distance(x, i, centers, labels[static_cast<std::size_t>(i)]);
  return sse;
}

std::vector<std::size_t> cluster_sizes(std::span<const int> labels, std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (int c : labels) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, std::size_t count, const Eigen::MatrixXd& existing,
                              std::span<const std::size_t> candidates, Rng& rng) {
  std::vector<std::size_t> pool(candidates.begin(), candidates.end());
  if (pool.empty()) {
    pool.resize(static_cast<std::size_t>(x.rows()));
    std::iota(pool.begin(), pool.end(), 0);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), x.cols());
  if (count == 0) return out;
  const std::size_t total_k = count + static_cast<std::size_t>(existing.rows());
  const std::size_t trials = 2 + static_cast<std::size_t>(std::floor(std::log(static_cast<double>(total_k))));

  std::vector<double> d2(pool.size(), std::numeric_limits<double>::infinity());
  const auto absorb = [&](const Eigen::RowVectorXd& c) {
    for (std::size_t p = 0; p < pool.size(); ++p)
      d2[p] = std::min(d2[p], (x.row(static_cast<Eigen::Index>(pool[p])) - c).squaredNorm());
  };
  for (Eigen::Index c = 0; c < existing.rows(); ++c) absorb(existing.row(c));

  std::size_t chosen = 0;
  if (existing.rows() == 0) {
    const std::size_t first = pool[uniform_index(rng, pool.size())];
    out.row(0) = x.row(static_cast<Eigen::Index>(first));
    absorb(out.row(0));
    chosen = 1;
  }
  for (; chosen < count; ++chosen) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (!(total > 0.0)) {
      pick = uniform_index(rng, pool.size());
    } else {
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < trials; ++t) {
        const double r = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t cand = pool.size() - 1;
        for (std::size_t p = 0; p < pool.size(); ++p) {
          acc += d2[p];
          if (r < acc) {
            cand = p;
            break;
          }
        }
        double potential = 0.0;
        const auto row = x.row(static_cast<Eigen::Index>(pool[cand]));
        for (std::size_t p = 0; p < pool.size(); ++p)
          potential += std::min(d2[p], (x.row(static_cast<Eigen::Index>(pool[p])) - row).squaredNorm());
        if (potential < best_potential) {
          best_potential = potential;
          pick = cand;
        }
      }
    }
    out.row(static_cast<Eigen::Index>(chosen)) = x.row(static_cast<Eigen::Index>(pool[pick]));
    absorb(out.row(static_cast<Eigen::Index>(chosen)));
  }
  return out;
}

ClusterFit lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centers, std::size_t max_iter) {
  const auto k = static_cast<std::size_t>(centers.rows());
  ClusterFit fit;
  std::vector<int> labels = nearest_center(x, centers);
  repair_empty(x, centers, labels);
  if (max_iter == 0) fit.inertia_history.push_back(inertia(x, labels, centers));
  for (std::size_t it = 0; it < max_iter; ++it) {
    centers = cluster_means(x, labels, k);
    fit.inertia_history.push_back(inertia(x, labels, centers));
    auto next = nearest_center(x, centers);
    repair_empty(x, centers, next);
    if (next == labels) break;
    labels = std::move(next);
  }
  fit.model.k = k;
  fit.model.centers = std::move(centers);
  fit.assignment = make_assignment(std::move(labels), k, fit.inertia_history.back());
  return fit;
}

std::vector<std::size_t> align_clusters(const Eigen::MatrixXd& previous, const Eigen::MatrixXd& current) {
  if (previous.rows() != current.rows() || previous.cols() != current.cols())
    fail(ErrorKind::invalid_argument, "align_clusters: centre sets differ in shape (cluster count must not change)");
  Eigen::MatrixXd cost(current.rows(), previous.rows());
  for (Eigen::Index j = 0; j < current.rows(); ++j)
    for (Eigen::Index i = 0; i < previous.rows(); ++i) cost(j, i) = squared_distance(current, j, previous, i);
  return hungarian(cost).column_of_row;
}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

ClusterFit kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  check_input(x, k, "kmeans");
  Rng rng(seed);
  ClusterFit fit = lloyd(x, kmeanspp_init(x, k, Eigen::MatrixXd(0, x.cols()), {}, rng), max_iter);
  fit.model.method = DiscoverMethod::kmeans;
  fit.model.seed = seed;
  return fit;
}

ClusterFit agglomerative(const Eigen::MatrixXd& x, std::size_t k, Linkage linkage) {
  check_input(x, k, "agglomerative");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n > kAgglomerativeMaxRows)
    fail(ErrorKind::invalid_argument, "agglomerative clustering keeps an n x n distance matrix and is limited to " +
                                          std::to_string(kAgglomerativeMaxRows) + " points (got " +
                                          std::to_string(n) + "); use kmeans for larger inputs");
  const bool ward = linkage == Linkage::ward;
  Eigen::MatrixXd d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      const double sq = squared_distance(x, i, x, j);
      d(i, j) = ward ? sq : std::sqrt(sq);
    }

  std::vector<std::size_t> size(n, 1);
  std::vector<char> active(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nd(n, std::numeric_limits<double>::infinity());
  const auto rescan = [&](std::size_t i) {
    nn[i] = n;
    nd[i] = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < n; ++j)
      if (active[j] && d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < nd[i]) {
        nd[i] = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        nn[i] = j;
      }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t a = n;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] && nn[i] < n && (a == n || nd[i] < nd[a])) a = i;
    const std::size_t b = nn[a];
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    const double dab = d(ia, ib);
    const double na = static_cast<double>(size[a]), nb = static_cast<double>(size[b]);
    for (std::size_t m = 0; m < n; ++m) {
      if (!active[m] || m == a || m == b) continue;
      const auto im = static_cast<Eigen::Index>(m);
      const double nm = static_cast<double>(size[m]);
      double v = 0.0;
      switch (linkage) {
        case Linkage::average: v = (na * d(ia, im) + nb * d(ib, im)) / (na + nb); break;
        case Linkage::complete: v = std::max(d(ia, im), d(ib, im)); break;
        case Linkage::ward: v = ((na + nm) * d(ia, im) + (nb + nm) * d(ib, im) - nm * dab) / (na + nb + nm); break;
      }
      d(ia, im) = v;
      d(im, ia) = v;
    }
    active[b] = 0;
    size[a] += size[b];
    parent[b] = a;
    for (std::size_t m = 0; m < n; ++m) {
      if (!active[m]) continue;
      if (m == a || nn[m] == a || nn[m] == b) {
        rescan(m);
      } else if (m < a) {
        const double v = d(static_cast<Eigen::Index>(m), ia);
        if (v < nd[m] || (v == nd[m] && a < nn[m])) {
          nd[m] = v;
          nn[m] = a;
        }
      }
    }
  }

  const auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::vector<int> labels(n);
  std::vector<int> id_of_root(n, -1);
  int next_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = root(i);
    if (id_of_root[r] < 0) id_of_root[r] = next_id++;
    labels[i] = id_of_root[r];
  }
  ClusterFit fit;
  fit.model.method = DiscoverMethod::agglomerative;
  fit.model.k = k;
  fit.model.linkage = linkage;
  fit.model.centers = cluster_means(x, labels, k);
  const double sse = inertia(x, labels, fit.model.centers);
  fit.assignment = make_assignment(std::move(labels), k, sse);
  return fit;
}

ClusterFit semi_seeded_kmeans(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k_total,
                              std::uint64_t seed, std::size_t max_iter) {
  check_input(x, k_total, "semi_seeded");
  if (seed_class.size() != static_cast<std::size_t>(x.rows()))
    fail(ErrorKind::invalid_argument, "semi_seeded: seed label count does not match rows");
  std::vector<int> classes;
  std::vector<std::size_t> unseeded;
  for (std::size_t i = 0; i < seed_class.size(); ++i) {
    if (seed_class[i] >= 0) classes.push_back(seed_class[i]);
    else unseeded.push_back(i);
  }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (k_total < classes.size())
    fail(ErrorKind::invalid_argument, "semi_seeded: k (" + std::to_string(k_total) +
                                          ") is smaller than the number of seeded classes (" +
                                          std::to_string(classes.size()) + ")");

  Eigen::MatrixXd seeded = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), x.cols());
  std::vector<double> counts(classes.size(), 0.0);
  for (std::size_t i = 0; i < seed_class.size(); ++i) {
    if (seed_class[i] < 0) continue;
    const auto c = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), seed_class[i]) -
                                            classes.begin());
    seeded.row(static_cast<Eigen::Index>(c)) += x.row(static_cast<Eigen::Index>(i));
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < classes.size(); ++c) seeded.row(static_cast<Eigen::Index>(c)) /= counts[c];

  Rng rng(seed);
  // With every row seeded there is no unseeded pool; fall back to all rows.
  const bool all_rows = unseeded.size() == seed_class.size() || unseeded.empty();
  const Eigen::MatrixXd extra = kmeanspp_init(x, k_total - classes.size(), seeded,
                                              all_rows ? std::span<const std::size_t>{} : std::span(unseeded), rng);
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k_total), x.cols());
  centers.topRows(seeded.rows()) = seeded;
  centers.bottomRows(extra.rows()) = extra;

  ClusterFit fit = lloyd(x, std::move(centers), max_iter);
  fit.model.method = DiscoverMethod::semi_seeded;
  fit.model.seed = seed;
  fit.model.notes["seeded_classes"] = classes.size();
  return fit;
}

ClusterFit deep_aligned_train(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k,
                              std::uint64_t seed, const DeepAlignedOptions& options) {
  check_input(x, k, "deep_aligned");
  if (options.epochs == 0 || k < 2) {
    ClusterFit fit = kmeans(x, k, seed, options.max_iter);
    fit.model.method = DiscoverMethod::deep_aligned;
    fit.model.encoder = MlpEncoder::identity(static_cast<std::size_t>(x.cols()));
    fit.model.notes["flip_rate"] = nullptr;
    fit.model.notes["epochs"] = 0;
    return fit;
  }
  if (seed_class.size() != static_cast<std::size_t>(x.rows()))
    fail(ErrorKind::invalid_argument, "deep_aligned: seed label count does not match rows");

  TrainingOptions opts = options.classifier;
  opts.seed = mix_seed(seed, 11);
  opts.loss = HeadLoss::softmax_cross_entropy;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("cluster-" + std::to_string(c));
  ClassifierHead head = init_classifier(static_cast<std::size_t>(x.cols()), names, opts);

  // Supervised warm start on the seeded rows when they span two classes.
  std::vector<int> seeded_classes;
  for (int c : seed_class)
    if (c >= 0) seeded_classes.push_back(c);
  std::sort(seeded_classes.begin(), seeded_classes.end());
  seeded_classes.erase(std::unique(seeded_classes.begin(), seeded_classes.end()), seeded_classes.end());
  json notes = json::object();
  if (seeded_classes.size() >= 2 && opts.epochs > 0) {
    std::vector<std::string> class_names;
    for (int c : seeded_classes) class_names.push_back("seed-" + std::to_string(c));
    ClassifierHead warm = init_classifier(static_cast<std::size_t>(x.cols()), class_names, opts);
    std::vector<Eigen::Index> rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < seed_class.size(); ++i) {
      if (seed_class[i] < 0) continue;
      rows.push_back(static_cast<Eigen::Index>(i));
      y.push_back(static_cast<int>(std::lower_bound(seeded_classes.begin(), seeded_classes.end(), seed_class[i]) -
                                   seeded_classes.begin()));
    }
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) xs.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    Rng warm_rng(mix_seed(seed, 12));
    train_epochs(warm, xs, y, opts, opts.epochs, warm_rng);
    head.encoder = warm.encoder;
    notes["pretrained_on_seeds"] = rows.size();
  }

  Rng shuffle_rng(mix_seed(seed, 13));
  Eigen::MatrixXd previous_centers;
  std::vector<int> previous_labels;
  std::vector<double> epoch_loss;
  std::optional<double> flip_rate;
  ClusterFit current;
  for (std::size_t epoch = 0; epoch <= options.epochs; ++epoch) {
    const Eigen::MatrixXd z = head.features(x);
    current = kmeans(z, k, seed, options.max_iter);
    if (epoch > 0) {
      const auto map = align_clusters(previous_centers, current.model.centers);
      Eigen::MatrixXd aligned(current.model.centers.rows(), current.model.centers.cols());
      for (std::size_t j = 0; j < map.size(); ++j)
        aligned.row(static_cast<Eigen::Index>(map[j])) = current.model.centers.row(static_cast<Eigen::Index>(j));
      current.model.centers = std::move(aligned);
      for (int& l : current.assignment.labels) l = static_cast<int>(map[static_cast<std::size_t>(l)]);
      current.assignment.sizes = cluster_sizes(current.assignment.labels, k);
      std::size_t flips = 0;
      for (std::size_t i = 0; i < previous_labels.size(); ++i) flips += previous_labels[i] != current.assignment.labels[i];
      flip_rate = static_cast<double>(flips) / static_cast<double>(previous_labels.size());
    }
    previous_centers = current.model.centers;
    previous_labels = current.assignment.labels;
    if (epoch == options.epochs) break;
    TrainingHistory history;
    train_epochs(head, x, previous_labels, opts, 1, shuffle_rng, &history);
    epoch_loss.push_back(history.epoch_loss.back());
  }

  ClusterFit fit = std::move(current);
  fit.model.method = DiscoverMethod::deep_aligned;
  fit.model.seed = seed;
  fit.model.encoder = head.encoder;
  notes["flip_rate"] = flip_rate ? json(*flip_rate) : json(nullptr);
  notes["epochs"] = options.epochs;
  notes["epoch_loss"] = epoch_loss;
  fit.model.notes = std::move(notes);
  return fit;
}

std::size_t estimate_k(const Eigen::MatrixXd& x, std::size_t k_max, double drop_fraction, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) fail(ErrorKind::invalid_argument, "estimate_k: no points");
  k_max = std::clamp<std::size_t>(k_max, 1, n);
  const ClusterFit fit = kmeans(x, k_max, seed);
  const double cutoff = drop_fraction * static_cast<double>(n) / static_cast<double>(k_max);
  std::size_t kept = 0;
  for (std::size_t s : fit.assignment.sizes)
    if (static_cast<double>(s) >= cutoff) ++kept;
  return std::max<std::size_t>(kept, 1);
}

// ---------------------------------------------------------------------------
// ClusterModel
// ---------------------------------------------------------------------------

Eigen::MatrixXd ClusterModel::represent(const Eigen::MatrixXd& x) const {
  return encoder && !encoder->is_identity() ? encoder->forward(x) : x;
}

std::vector<int> ClusterModel::assign(const Eigen::MatrixXd& x) const { return nearest_center(represent(x), centers); }

json ClusterModel::to_json() const {
  return json{{"format", "openintent.cluster"},
              {"version", 1},
              {"method", to_string(method)},
              {"k", k},
              {"centers", matrix_to_json(centers)},
              {"linkage", linkage ? json(to_string(*linkage)) : json(nullptr)},
              {"encoder", encoder ? encoder->to_json() : json(nullptr)},
              {"seed", seed},
              {"featurizer_fingerprint", featurizer_fingerprint},
              {"notes", notes}};
}

ClusterModel ClusterModel::from_json(const json& j) {
  if (j.value("format", "") != "openintent.cluster" || j.value("version", 0) != 1)
    fail(ErrorKind::invalid_argument, "not a version 1 cluster model");
  ClusterModel m;
  m.method = parse_discover_method(j.at("method").get<std::string>());
  m.k = j.at("k").get<std::size_t>();
  m.centers = matrix_from_json(j.at("centers"));
  if (!j.at("linkage").is_null()) m.linkage = parse_linkage(j.at("linkage").get<std::string>());
  if (!j.at("encoder").is_null()) m.encoder = MlpEncoder::from_json(j.at("encoder"));
  m.seed = j.at("seed").get<std::uint64_t>();
  m.featurizer_fingerprint = j.at("featurizer_fingerprint").get<std::string>();
  m.notes = j.value("notes", json::object());
  if (static_cast<std::size_t>(m.centers.rows()) != m.k || m.k == 0)
    fail(ErrorKind::invalid_argument, "cluster model: centre count does not match k");
  return m;
}

// ---------------------------------------------------------------------------
// Configured discovery
// ---------------------------------------------------------------------------

json DiscoverOptions::params_json() const {
  json j{{"max_iter", max_iter}, {"drop_fraction", drop_fraction}, {"k_max", k_max}};
  if (method == DiscoverMethod::agglomerative) j["linkage"] = to_string(linkage);
  if (method == DiscoverMethod::deep_aligned) j["epochs"] = deep_epochs;
  return j;
}

void DiscoverOptions::apply_params(const json& params) {
  if (params.is_null()) return;
  reject_unknown_keys(params, {"max_iter", "drop_fraction", "k_max", "linkage", "epochs"}, "discover_params");
  if (params.contains("linkage")) {
    if (method != DiscoverMethod::agglomerative)
      fail(ErrorKind::invalid_argument, "discover_params.linkage applies to agglomerative only");
    linkage = parse_linkage(params["linkage"].get<std::string>());
  }
  if (params.contains("epochs")) {
    if (method != DiscoverMethod::deep_aligned)
      fail(ErrorKind::invalid_argument, "discover_params.epochs applies to deep_aligned only");
    deep_epochs = params["epochs"].get<std::size_t>();
  }
  if (params.contains("max_iter")) max_iter = params["max_iter"].get<std::size_t>();
  if (params.contains("drop_fraction")) drop_fraction = params["drop_fraction"].get<double>();
  if (params.contains("k_max")) k_max = params["k_max"].get<std::size_t>();
  if (max_iter == 0) fail(ErrorKind::invalid_argument, "discover_params.max_iter must be positive");
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0))
    fail(ErrorKind::invalid_argument, "discover_params.drop_fraction must be in [0, 1]");
}

ClusterFit fit_discovery(const Eigen::MatrixXd& x, std::span<const int> seed_class, std::size_t k,
                         std::uint64_t seed, const DiscoverOptions& options, std::string featurizer_fingerprint) {
  ClusterFit fit;
  switch (options.method) {
    case DiscoverMethod::kmeans: fit = kmeans(x, k, seed, options.max_iter); break;
    case DiscoverMethod::agglomerative: fit = agglomerative(x, k, options.linkage); break;
    case DiscoverMethod::semi_seeded: fit = semi_seeded_kmeans(x, seed_class, k, seed, options.max_iter); break;
    case DiscoverMethod::deep_aligned: {
      DeepAlignedOptions da;
      da.epochs = options.deep_epochs;
      da.max_iter = options.max_iter;
      da.classifier = options.classifier;
      fit = deep_aligned_train(x, seed_class, k, seed, da);
      break;
    }
  }
  fit.model.seed = seed;
  fit.model.featurizer_fingerprint = std::move(featurizer_fingerprint);
  return fit;
}

}  // namespace openintent
