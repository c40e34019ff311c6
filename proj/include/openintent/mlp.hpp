#pragma once

#include <span>
#include <string>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/featurize.hpp"

namespace openintent {

/// Fully connected layer; `weight` is out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Feed-forward encoder with ReLU hidden layers and an identity output layer.
/// An encoder with no layers is the identity map.
class MlpEncoder {
 public:
  MlpEncoder() = default;

  static MlpEncoder identity(std::size_t dim);

  /// `sizes` = [d_in, h..., d_out]. Glorot-uniform weights, zero biases.
  static MlpEncoder create(std::span<const std::size_t> sizes, Rng& rng);

  std::size_t input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
  bool is_identity() const { return layers_.empty(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  /// Rows are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  /// Same as forward, keeping the row ids.
  FeatureMatrix encode(const FeatureMatrix& features) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  json to_json() const;
  static MlpEncoder from_json(const json& j);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
};

enum class HeadLoss {
  softmax_cross_entropy,
  sigmoid_one_vs_rest,  // K independent binary cross-entropies (DOC)
  large_margin_cosine,  // s * (cos - m) on the target class (DeepUnk)
};

std::string_view to_string(HeadLoss loss);
HeadLoss parse_head_loss(std::string_view token);

/// Row-wise numerically stable softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& logits);

struct HeadGradient {
  std::vector<DenseLayer> encoder;
  DenseLayer output;

  std::vector<double> flatten() const;
};

/// Encoder plus a linear output layer over K classes.
class ClassifierHead {
 public:
  MlpEncoder encoder;
  DenseLayer output;                // K x d_out
  std::vector<std::string> labels;  // class order
  HeadLoss loss = HeadLoss::softmax_cross_entropy;
  double margin = 0.35;
  double scale = 30.0;

  std::size_t num_classes() const { return labels.size(); }
  std::size_t input_dim() const { return encoder.input_dim(); }

  Eigen::MatrixXd features(const Eigen::MatrixXd& x) const { return encoder.forward(x); }

  /// Inference logits. For the cosine head these are s * cos, without margin.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;

  /// Softmax probabilities, or per-class sigmoids for the one-vs-rest head.
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const;

  /// Mean training loss over the rows of `x` with class indices `y`.
  double loss_value(const Eigen::MatrixXd& x, std::span<const int> y) const;
  double loss_and_gradient(const Eigen::MatrixXd& x, std::span<const int> y, HeadGradient& grad) const;

  /// All trainable parameters, encoder layers first, in a fixed order that
  /// matches HeadGradient::flatten.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  json to_json() const;
  static ClassifierHead from_json(const json& j);

 private:
  double forward_backward(const Eigen::MatrixXd& x, std::span<const int> y, HeadGradient* grad) const;
};

struct TrainingOptions {
  std::vector<std::size_t> hidden{128};
  std::size_t feature_dim = 64;  // 0 with empty `hidden` means the identity encoder
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  HeadLoss loss = HeadLoss::softmax_cross_entropy;
  double margin = 0.35;
  double scale = 30.0;

  json to_json() const;
  static TrainingOptions from_json(const json& j);
};

struct TrainingHistory {
  std::vector<double> epoch_loss;  // [0] is the loss before the first update
};

ClassifierHead init_classifier(std::size_t input_dim, std::vector<std::string> labels,
                               const TrainingOptions& options);

/// Mini-batch gradient descent for `epochs` passes. Aborts with a numerical
/// error on a non-finite loss.
void train_epochs(ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y,
                  const TrainingOptions& options, std::size_t epochs, Rng& shuffle_rng,
                  TrainingHistory* history = nullptr);

/// Trains a head over `classes` (sorted distinct labels when empty). Every
/// label must belong to `classes`; at least two classes are required.
ClassifierHead train_classifier(const FeatureMatrix& features, std::span<const std::string> labels,
                                const TrainingOptions& options, std::vector<std::string> classes = {},
                                TrainingHistory* history = nullptr);

/// Argmax per row; ties go to the lower index.
std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& m);

}  // namespace openintent
