#include "openintent/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace openintent {

// ---------------------------------------------------------------------------
// MlpEncoder
// ---------------------------------------------------------------------------

MlpEncoder MlpEncoder::identity(std::size_t dim) {
  MlpEncoder e;
  e.sizes_ = {dim};
  return e;
}

MlpEncoder MlpEncoder::create(std::span<const std::size_t> sizes, Rng& rng) {
  if (sizes.empty()) fail(ErrorKind::invalid_argument, "encoder needs at least an input size");
  for (auto s : sizes)
    if (s == 0) fail(ErrorKind::invalid_argument, "encoder layer sizes must be positive");
  MlpEncoder e;
  e.sizes_.assign(sizes.begin(), sizes.end());
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index j = 0; j < fan_in; ++j)
      for (Eigen::Index i = 0; i < fan_out; ++i) layer.weight(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
    e.layers_.push_back(std::move(layer));
  }
  return e;
}

Eigen::MatrixXd MlpEncoder::forward(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim())
    fail(ErrorKind::invalid_argument, "encoder: input dimension " + std::to_string(x.cols()) +
                                          " does not match " + std::to_string(input_dim()));
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = a * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

FeatureMatrix MlpEncoder::encode(const FeatureMatrix& features) const {
  return FeatureMatrix(forward(features.values), features.row_ids);
}

json MlpEncoder::to_json() const {
  json layers = json::array();
  for (const auto& l : layers_)
    layers.push_back(json{{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  return json{{"sizes", sizes_}, {"layers", std::move(layers)}};
}

MlpEncoder MlpEncoder::from_json(const json& j) {
  MlpEncoder e;
  e.sizes_ = j.at("sizes").get<std::vector<std::size_t>>();
  for (const auto& l : j.at("layers"))
    e.layers_.push_back(DenseLayer{matrix_from_json(l.at("weight")), vector_from_json(l.at("bias"))});
  if (e.sizes_.empty() || e.layers_.size() + 1 != e.sizes_.size())
    fail(ErrorKind::invalid_argument, "encoder state: layer count does not match sizes");
  for (std::size_t l = 0; l < e.layers_.size(); ++l) {
    const auto& w = e.layers_[l].weight;
    if (static_cast<std::size_t>(w.cols()) != e.sizes_[l] || static_cast<std::size_t>(w.rows()) != e.sizes_[l + 1] ||
        e.layers_[l].bias.size() != w.rows())
      fail(ErrorKind::invalid_argument, "encoder state: weight shape does not match sizes");
  }
  return e;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

std::string_view to_string(HeadLoss loss) {
  switch (loss) {
    case HeadLoss::softmax_cross_entropy: return "softmax_cross_entropy";
    case HeadLoss::sigmoid_one_vs_rest: return "sigmoid_one_vs_rest";
    case HeadLoss::large_margin_cosine: return "large_margin_cosine";
  }
  return "softmax_cross_entropy";
}

HeadLoss parse_head_loss(std::string_view token) {
  if (token == "softmax_cross_entropy") return HeadLoss::softmax_cross_entropy;
  if (token == "sigmoid_one_vs_rest") return HeadLoss::sigmoid_one_vs_rest;
  if (token == "large_margin_cosine") return HeadLoss::large_margin_cosine;
  fail(ErrorKind::invalid_argument, "unknown head loss: " + std::string(token));
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& logits) {
  return logits.unaryExpr([](double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& m) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ClassifierHead
// ---------------------------------------------------------------------------

namespace {

void append(std::vector<double>& out, const Eigen::MatrixXd& m) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}

void append(std::vector<double>& out, const Eigen::VectorXd& v) {
  out.insert(out.end(), v.data(), v.data() + v.size());
}

std::size_t take(std::span<const double> in, std::size_t pos, Eigen::MatrixXd& m) {
  std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), m.size(), m.data());
  return pos + static_cast<std::size_t>(m.size());
}

std::size_t take(std::span<const double> in, std::size_t pos, Eigen::VectorXd& v) {
  std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), v.size(), v.data());
  return pos + static_cast<std::size_t>(v.size());
}

constexpr double kNormFloor = 1e-12;

Eigen::VectorXd row_norms(const Eigen::MatrixXd& m) {
  return m.rowwise().norm().cwiseMax(kNormFloor);
}

}  // namespace

std::vector<double> HeadGradient::flatten() const {
  std::vector<double> out;
  for (const auto& l : encoder) {
    append(out, l.weight);
    append(out, l.bias);
  }
  append(out, output.weight);
  append(out, output.bias);
  return out;
}

std::vector<double> ClassifierHead::parameters() const {
  std::vector<double> out;
  for (const auto& l : encoder.layers()) {
    append(out, l.weight);
    append(out, l.bias);
  }
  append(out, output.weight);
  append(out, output.bias);
  return out;
}

void ClassifierHead::set_parameters(std::span<const double> values) {
  std::size_t pos = 0;
  for (auto& l : encoder.layers()) {
    pos = take(values, pos, l.weight);
    pos = take(values, pos, l.bias);
  }
  pos = take(values, pos, output.weight);
  pos = take(values, pos, output.bias);
  if (pos != values.size()) fail(ErrorKind::invalid_argument, "set_parameters: size mismatch");
}

Eigen::MatrixXd ClassifierHead::logits(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd f = features(x);
  if (loss == HeadLoss::large_margin_cosine) {
    const Eigen::VectorXd fn = row_norms(f);
    const Eigen::VectorXd wn = row_norms(output.weight);
    const Eigen::MatrixXd fhat = fn.cwiseInverse().asDiagonal() * f;
    const Eigen::MatrixXd what = wn.cwiseInverse().asDiagonal() * output.weight;
    return scale * (fhat * what.transpose());
  }
  Eigen::MatrixXd z = f * output.weight.transpose();
  z.rowwise() += output.bias.transpose();
  return z;
}

Eigen::MatrixXd ClassifierHead::probabilities(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd z = logits(x);
  return loss == HeadLoss::sigmoid_one_vs_rest ? sigmoid(z) : softmax_rows(z);
}

double ClassifierHead::loss_value(const Eigen::MatrixXd& x, std::span<const int> y) const {
  return forward_backward(x, y, nullptr);
}

double ClassifierHead::loss_and_gradient(const Eigen::MatrixXd& x, std::span<const int> y,
                                         HeadGradient& grad) const {
  return forward_backward(x, y, &grad);
}

double ClassifierHead::forward_backward(const Eigen::MatrixXd& x, std::span<const int> y,
                                        HeadGradient* grad) const {
  const auto n = x.rows();
  const auto k = static_cast<Eigen::Index>(num_classes());
  if (static_cast<std::size_t>(n) != y.size()) fail(ErrorKind::invalid_argument, "loss: label count mismatch");
  if (n == 0) fail(ErrorKind::invalid_argument, "loss: empty batch");
  for (int label : y)
    if (label < 0 || label >= k) fail(ErrorKind::invalid_argument, "loss: label index out of range");

  // Forward with cached activations.
  const auto& layers = encoder.layers();
  std::vector<Eigen::MatrixXd> acts{x};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = acts.back() * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    pre.push_back(z);
    acts.push_back(l + 1 < layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
  }
  const Eigen::MatrixXd& f = acts.back();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

  double total = 0.0;
  Eigen::MatrixXd d_logits;  // dL/dz for linear heads
  Eigen::MatrixXd d_features;

  if (loss == HeadLoss::large_margin_cosine) {
    const Eigen::VectorXd fn = row_norms(f);
    const Eigen::VectorXd wn = row_norms(output.weight);
    const Eigen::MatrixXd fhat = fn.cwiseInverse().asDiagonal() * f;
    const Eigen::MatrixXd what = wn.cwiseInverse().asDiagonal() * output.weight;
    const Eigen::MatrixXd cos = fhat * what.transpose();
    const Eigen::MatrixXd z = scale * (cos - margin * onehot);
    const Eigen::MatrixXd p = softmax_rows(z);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = z.row(i).maxCoeff();
      const double lse = m + std::log((z.row(i).array() - m).exp().sum());
      total += lse - z(i, y[static_cast<std::size_t>(i)]);
    }
    if (grad) {
      const Eigen::MatrixXd d_cos = scale * inv_n * (p - onehot);
      const Eigen::MatrixXd d_fhat = d_cos * what;
      const Eigen::MatrixXd d_what = d_cos.transpose() * fhat;
      d_features.resize(f.rows(), f.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        const double proj = fhat.row(i).dot(d_fhat.row(i));
        d_features.row(i) = (d_fhat.row(i) - proj * fhat.row(i)) / fn(i);
      }
      grad->output.weight.resize(output.weight.rows(), output.weight.cols());
      for (Eigen::Index j = 0; j < k; ++j) {
        const double proj = what.row(j).dot(d_what.row(j));
        grad->output.weight.row(j) = (d_what.row(j) - proj * what.row(j)) / wn(j);
      }
      grad->output.bias = Eigen::VectorXd::Zero(output.bias.size());
    }
  } else {
    Eigen::MatrixXd z = f * output.weight.transpose();
    z.rowwise() += output.bias.transpose();
    if (loss == HeadLoss::softmax_cross_entropy) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = z.row(i).maxCoeff();
        const double lse = m + std::log((z.row(i).array() - m).exp().sum());
        total += lse - z(i, y[static_cast<std::size_t>(i)]);
      }
      if (grad) d_logits = inv_n * (softmax_rows(z) - onehot);
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
          const double v = z(i, j);
          total += std::max(v, 0.0) - v * onehot(i, j) + std::log1p(std::exp(-std::abs(v)));
        }
      if (grad) d_logits = inv_n * (sigmoid(z) - onehot);
    }
    if (grad) {
      grad->output.weight = d_logits.transpose() * f;
      grad->output.bias = d_logits.colwise().sum().transpose();
      d_features = d_logits * output.weight;
    }
  }

  if (grad) {
    grad->encoder.resize(layers.size());
    Eigen::MatrixXd d_act = std::move(d_features);
    for (std::size_t l = layers.size(); l-- > 0;) {
      Eigen::MatrixXd dz = d_act;
      if (l + 1 < layers.size()) dz = dz.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
      grad->encoder[l].weight = dz.transpose() * acts[l];
      grad->encoder[l].bias = dz.colwise().sum().transpose();
      if (l > 0) d_act = dz * layers[l].weight;
    }
  }
  return total * inv_n;
}

json ClassifierHead::to_json() const {
  return json{{"encoder", encoder.to_json()},
              {"output", json{{"weight", matrix_to_json(output.weight)}, {"bias", vector_to_json(output.bias)}}},
              {"labels", labels},
              {"loss", to_string(loss)},
              {"margin", margin},
              {"scale", scale}};
}

ClassifierHead ClassifierHead::from_json(const json& j) {
  ClassifierHead h;
  h.encoder = MlpEncoder::from_json(j.at("encoder"));
  h.output.weight = matrix_from_json(j.at("output").at("weight"));
  h.output.bias = vector_from_json(j.at("output").at("bias"));
  h.labels = j.at("labels").get<std::vector<std::string>>();
  h.loss = parse_head_loss(j.at("loss").get<std::string>());
  h.margin = j.at("margin").get<double>();
  h.scale = j.at("scale").get<double>();
  if (static_cast<std::size_t>(h.output.weight.rows()) != h.labels.size() ||
      static_cast<std::size_t>(h.output.weight.cols()) != h.encoder.output_dim())
    fail(ErrorKind::invalid_argument, "classifier state: output layer shape mismatch");
  return h;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

json TrainingOptions::to_json() const {
  return json{{"hidden", hidden},         {"feature_dim", feature_dim}, {"learning_rate", learning_rate},
              {"epochs", epochs},         {"batch_size", batch_size},   {"seed", seed},
              {"loss", to_string(loss)},  {"margin", margin},           {"scale", scale}};
}

TrainingOptions TrainingOptions::from_json(const json& j) {
  reject_unknown_keys(j, {"hidden", "feature_dim", "learning_rate", "epochs", "batch_size", "seed", "loss",
                          "margin", "scale"},
                      "classifier");
  TrainingOptions o;
  if (j.contains("hidden")) o.hidden = j["hidden"].get<std::vector<std::size_t>>();
  if (j.contains("feature_dim")) o.feature_dim = j["feature_dim"].get<std::size_t>();
  if (j.contains("learning_rate")) o.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) o.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) o.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("loss")) o.loss = parse_head_loss(j["loss"].get<std::string>());
  if (j.contains("margin")) o.margin = j["margin"].get<double>();
  if (j.contains("scale")) o.scale = j["scale"].get<double>();
  if (!(o.learning_rate > 0.0)) fail(ErrorKind::invalid_argument, "classifier.learning_rate must be positive");
  if (o.batch_size == 0) fail(ErrorKind::invalid_argument, "classifier.batch_size must be positive");
  return o;
}

ClassifierHead init_classifier(std::size_t input_dim, std::vector<std::string> labels,
                               const TrainingOptions& options) {
  if (labels.size() < 2) fail(ErrorKind::invalid_argument, "classifier needs at least two classes");
  Rng rng(mix_seed(options.seed, 1));
  ClassifierHead head;
  if (options.hidden.empty() && options.feature_dim == 0) {
    head.encoder = MlpEncoder::identity(input_dim);
  } else {
    if (options.feature_dim == 0)
      fail(ErrorKind::invalid_argument, "classifier.feature_dim must be positive when hidden layers are set");
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
    sizes.push_back(options.feature_dim);
    head.encoder = MlpEncoder::create(sizes, rng);
  }
  const std::size_t sizes_out[] = {head.encoder.output_dim(), labels.size()};
  head.output = MlpEncoder::create(sizes_out, rng).layers().front();
  head.labels = std::move(labels);
  head.loss = options.loss;
  head.margin = options.margin;
  head.scale = options.scale;
  return head;
}

void train_epochs(ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y,
                  const TrainingOptions& options, std::size_t epochs, Rng& shuffle_rng,
                  TrainingHistory* history) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  auto record = [&](std::size_t epoch) {
    const double l = head.loss_value(x, y);
    if (!std::isfinite(l)) {
      std::ostringstream msg;
      msg << "non-finite training loss after epoch " << epoch << " (learning_rate=" << options.learning_rate << ")";
      fail(ErrorKind::numerical, msg.str());
    }
    if (history) history->epoch_loss.push_back(l);
  };
  if (history && history->epoch_loss.empty()) record(0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> params = head.parameters();
  HeadGradient grad;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    shuffle(std::span(order), shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(end - start), x.cols());
      std::vector<int> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y[order[i]];
      }
      const double l = head.loss_and_gradient(xb, yb, grad);
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch starting at " << start
            << " (learning_rate=" << options.learning_rate << ")";
        fail(ErrorKind::numerical, msg.str());
      }
      const auto g = grad.flatten();
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= options.learning_rate * g[p];
      head.set_parameters(params);
    }
    if (history) record(epoch);
  }
}

ClassifierHead train_classifier(const FeatureMatrix& features, std::span<const std::string> labels,
                                const TrainingOptions& options, std::vector<std::string> classes,
                                TrainingHistory* history) {
  if (labels.size() != features.rows())
    fail(ErrorKind::invalid_argument, "train_classifier: label count does not match rows");
  if (classes.empty()) {
    classes.assign(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }
  if (classes.size() < 2) fail(ErrorKind::invalid_argument, "train_classifier: single-class input");
  std::vector<int> y;
  y.reserve(labels.size());
  std::vector<std::size_t> per_class(classes.size(), 0);
  for (const auto& label : labels) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) fail(ErrorKind::invalid_argument, "train_classifier: label not a known class: " + label);
    const auto idx = static_cast<std::size_t>(it - classes.begin());
    ++per_class[idx];
    y.push_back(static_cast<int>(idx));
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (per_class[c] == 0) fail(ErrorKind::invalid_argument, "train_classifier: no examples for class " + classes[c]);

  ClassifierHead head = init_classifier(features.dim(), std::move(classes), options);
  Rng rng(mix_seed(options.seed, 2));
  train_epochs(head, features.values, y, options, options.epochs, rng, history);
  return head;
}

}  // namespace openintent
