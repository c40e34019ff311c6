#include <iostream>

#include <CLI11.hpp>

#include "openintent/synthetic.hpp"

using namespace openintent;

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic Gaussian intent dataset with precomputed embeddings"};
  SyntheticSpec spec;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--classes", spec.classes, "Number of intents")->capture_default_str();
  app.add_option("--dim", spec.dim, "Embedding dimension")->capture_default_str();
  app.add_option("--per_class", spec.per_class, "Utterances per intent")->capture_default_str();
  app.add_option("--sigma", spec.sigma, "Within-class standard deviation")->capture_default_str();
  app.add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const SyntheticData data = make_synthetic(spec);
    write_synthetic(data, out);
    std::cout << "wrote " << data.dataset.label_set.size() << " intents to " << out
              << " (jsonl splits, embeddings.txt)\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_user_error(e.kind()) ? 1 : 2;
  }
  return 0;
}
