#include "openintent/synthetic.hpp"

#include <fstream>

namespace openintent {

namespace {

constexpr std::array<const char*, 64> kWords{
    "balance", "account", "deposit", "savings",  "flight",   "airport", "boarding", "luggage",
    "recipe",  "cooking", "oven",    "dinner",   "weather",  "rain",    "forecast", "sunny",
    "alarm",   "wake",    "morning", "snooze",   "music",    "song",    "playlist", "volume",
    "taxi",    "ride",    "driver",  "pickup",   "hotel",    "room",    "checkin",  "suite",
    "card",    "lost",    "stolen",  "freeze",   "timer",    "minutes", "countdown","kitchen",
    "translate","spanish","phrase",  "language", "calendar", "meeting", "schedule", "invite",
    "pizza",   "order",   "delivery","topping",  "insurance","claim",   "policy",   "premium",
    "battery", "charge",  "phone",   "screen",   "payment",  "bill",    "invoice",  "transfer"};

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.dim == 0 || spec.per_class < 3)
    fail(ErrorKind::invalid_argument, "synthetic data needs at least 2 classes and 3 points per class");
  Rng rng(mix_seed(spec.seed, 0x5e7));
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto k = static_cast<Eigen::Index>(spec.classes);

  SyntheticData out;
  out.centers.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) fail(ErrorKind::invalid_argument, "cannot place class centres with the requested separation");
      Eigen::RowVectorXd v(d);
      for (Eigen::Index j = 0; j < d; ++j) v(j) = standard_normal(rng);
      v *= spec.center_norm / v.norm();
      bool ok = true;
      for (Eigen::Index o = 0; o < c && ok; ++o) ok = (out.centers.row(o) - v).norm() >= spec.min_separation;
      if (ok) {
        out.centers.row(c) = v;
        break;
      }
    }
  }

  Dataset& ds = out.dataset;
  ds.name = "synthetic";
  const std::size_t n_train = round_count(spec.train_fraction, spec.per_class);
  const std::size_t n_eval = std::max<std::size_t>(1, round_count(spec.eval_fraction, spec.per_class));
  if (n_train + n_eval >= spec.per_class) fail(ErrorKind::invalid_argument, "split fractions leave no test points");
  std::array<std::vector<Eigen::RowVectorXd>, 3> points;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    char label[32];
    std::snprintf(label, sizeof label, "intent_%02zu", c);
    const std::size_t vocab = 4;
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const Split split = i < n_train ? Split::train : (i < n_train + n_eval ? Split::eval : Split::test);
      Eigen::RowVectorXd x = out.centers.row(static_cast<Eigen::Index>(c));
      for (Eigen::Index j = 0; j < d; ++j) x(j) += spec.sigma * standard_normal(rng);
      std::string text = "please";
      for (int w = 0; w < 3; ++w) {
        const std::size_t word = (c * vocab + uniform_index(rng, vocab)) % kWords.size();
        text += " ";
        text += kWords[word];
      }
      Utterance u;
      u.id = std::string(to_string(split)) + "-" + label + "-" + std::to_string(i);
      u.text = std::move(text);
      u.gold_label = label;
      ds.split(split).push_back(std::move(u));
      points[static_cast<std::size_t>(split)].push_back(std::move(x));
    }
  }
  ds.finalize();

  std::vector<std::string> ids;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(spec.classes * spec.per_class), d);
  Eigen::Index row = 0;
  for (Split s : kAllSplits) {
    const auto si = static_cast<std::size_t>(s);
    for (std::size_t i = 0; i < ds.split(s).size(); ++i) {
      ids.push_back(ds.split(s)[i].id);
      values.row(row++) = points[si][i];
    }
  }
  out.embeddings = FeatureMatrix(std::move(values), std::move(ids));
  return out;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (Split s : kAllSplits) {
    const auto path = dir / (std::string(to_string(s)) + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    for (const auto& u : data.dataset.split(s))
      out << json{{"id", u.id}, {"text", u.text}, {"label", *u.gold_label}}.dump() << '\n';
  }
  write_embedding_file(dir / "embeddings.txt", data.embeddings);
}

}  // namespace openintent
