#include <doctest.h>

#include <set>

#include "openintent/corpus.hpp"
#include "openintent/text.hpp"
#include "support/temp_dir.hpp"

using namespace openintent;

namespace {

Dataset toy_dataset(std::size_t labels, std::size_t per_label) {
  Dataset d;
  d.name = "toy";
  for (std::size_t l = 0; l < labels; ++l)
    for (std::size_t i = 0; i < per_label; ++i)
      for (Split s : kAllSplits)
        d.split(s).push_back(Utterance{std::string(to_string(s)) + "-" + std::to_string(l) + "-" + std::to_string(i),
                                       "utterance " + std::to_string(i), "label" + std::to_string(l)});
  d.finalize();
  return d;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits on whitespace and strips edge punctuation") {
  CHECK(tokenize("Book a Flight!") == std::vector<std::string>{"book", "a", "flight"});
  CHECK(tokenize("  (hello),   world... ") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("a\xC2\xA0" "b") == std::vector<std::string>{"a", "b"});  // no-break space
  CHECK(tokenize("caf\xC3\xA9 ok") == std::vector<std::string>{"caf\xC3\xA9", "ok"});
  CHECK(tokenize("!!! ...").empty());
}

TEST_CASE("load_dataset reads TSV splits and counts match the files") {
  TempDir dir;
  std::size_t lines[3] = {0, 0, 0};
  for (Split s : kAllSplits) {
    std::string body = "text\tlabel\n";
    const std::size_t n = 5 + static_cast<std::size_t>(s);
    for (std::size_t i = 0; i < n; ++i) body += "text number " + std::to_string(i) + "\t" + (i % 2 ? "a" : "b") + "\n";
    write_text(dir / (std::string(to_string(s)) + ".tsv"), body);
    lines[static_cast<std::size_t>(s)] = n;
  }
  const Dataset d = load_dataset(dir.path(), DatasetFormat::tsv);
  CHECK(d.label_set == std::vector<std::string>{"a", "b"});
  for (Split s : kAllSplits) CHECK(d.split(s).size() == lines[static_cast<std::size_t>(s)]);
  CHECK(d.split(Split::train)[0].id == "train-2");
}

TEST_CASE("load_dataset reports bad input") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(load_dataset(dir / "missing", DatasetFormat::tsv), doctest::Contains("missing"), Error);
  write_text(dir / "train.tsv", "wrong header\n");
  write_text(dir / "eval.tsv", "text\tlabel\nx\ta\n");
  write_text(dir / "test.tsv", "text\tlabel\nx\ta\n");
  CHECK_THROWS_AS(load_dataset(dir.path(), DatasetFormat::tsv), Error);
  write_text(dir / "train.tsv", "text\tlabel\nhello\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir.path(), DatasetFormat::tsv), doctest::Contains("train.tsv:2"), Error);
}

TEST_CASE("jsonl datasets keep explicit ids and reject duplicates") {
  TempDir dir;
  write_text(dir / "train.jsonl", R"({"id":"x1","text":"hi","label":"a"})" "\n" R"({"id":"x2","text":"yo","label":"b"})" "\n");
  write_text(dir / "eval.jsonl", R"({"id":"e1","text":"hi","label":"a"})" "\n");
  write_text(dir / "test.jsonl", R"({"id":"t1","text":"hi","label":"b"})" "\n");
  const Dataset d = load_dataset(dir.path(), DatasetFormat::jsonl);
  CHECK(d.split(Split::train)[1].id == "x2");
  write_text(dir / "test.jsonl", R"({"id":"x1","text":"hi","label":"b"})" "\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir.path(), DatasetFormat::jsonl), doctest::Contains("duplicate id"), Error);
}

TEST_CASE("round_count rounds half up with a floor of one") {
  CHECK(round_count(0.5, 4) == 2);
  CHECK(round_count(0.35, 10) == 4);
  CHECK(round_count(0.25, 2) == 1);
  CHECK(round_count(0.01, 10) == 1);
  CHECK(round_count(1.0, 7) == 7);
}

TEST_CASE("sampling plan: 4 labels x 10 train, kir 0.5, lr 0.5") {
  const Dataset d = toy_dataset(4, 10);
  const SamplingPlan p = make_sampling_plan(d, 0.5, 0.5, 3);
  CHECK(p.known_labels.size() == 2);
  CHECK(p.open_labels.size() == 2);
  CHECK(p.labeled_ids.size() == 10);
  CHECK(p.unlabeled_ids.size() == 30);
  // Every labeled id carries a known label; 5 per known label.
  std::map<std::string, int> per;
  for (const auto& id : p.labeled_ids)
    for (const auto& u : d.split(Split::train))
      if (u.id == id) {
        CHECK(p.is_known(*u.gold_label));
        ++per[*u.gold_label];
      }
  for (const auto& [l, c] : per) CHECK(c == 5);
}

TEST_CASE("sampling plan invariants over seeds") {
  const Dataset d = toy_dataset(7, 9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SamplingPlan p = make_sampling_plan(d, 0.75, 0.3, seed);
    CHECK(p.known_labels.size() + p.open_labels.size() == 7);
    CHECK(p.known_labels.size() == 5);
    CHECK(p.labeled_ids.size() + p.unlabeled_ids.size() == d.split(Split::train).size());
    std::set<std::string> all(p.labeled_ids.begin(), p.labeled_ids.end());
    for (const auto& id : p.unlabeled_ids) CHECK(all.insert(id).second);
    CHECK(make_sampling_plan(d, 0.75, 0.3, seed).to_json() == p.to_json());
  }
  CHECK_THROWS_AS(make_sampling_plan(d, 0.0, 0.5, 0), Error);
  CHECK_THROWS_AS(make_sampling_plan(d, 0.5, 1.5, 0), Error);
}

TEST_CASE("dataset stats count per label and token lengths") {
  const Dataset d = toy_dataset(2, 3);
  const DatasetStats s = dataset_stats(d);
  CHECK(s.splits[0].count == 6);
  CHECK(s.splits[0].per_label == std::vector<std::size_t>{3, 3});
  CHECK(s.splits[0].token_length.median == doctest::Approx(2.0));
  const json j = s.to_json();
  CHECK(j["num_labels"] == 2);
  CHECK(j["splits"]["test"]["per_label"]["label1"] == 3);
}
