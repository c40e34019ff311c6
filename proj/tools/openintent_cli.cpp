#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "openintent/config.hpp"
#include "openintent/service/http_server.hpp"
#include "openintent/service/service.hpp"
#include "openintent/sweep.hpp"
#include "openintent/views.hpp"

namespace fs = std::filesystem;
using namespace openintent;

namespace {

/// Config flags generated from the config schema: one `--<field>` per field,
/// parsed by the field's declared type. `--config <file>` wins over flags.
class ConfigFlags {
 public:
  void attach(CLI::App& app) {
    const json fields = config_schema().at("fields");
    for (const auto& [name, spec] : fields.items()) {
      if (name == "schema_version") continue;
      std::string help = spec.at("description").get<std::string>();
      if (spec.contains("enum")) {
        help += " (";
        for (std::size_t i = 0; i < spec.at("enum").size(); ++i)
          help += (i ? ", " : "") + spec.at("enum")[i].get<std::string>();
        help += ")";
      }
      const std::string type = spec.at("type");
      if (type == "object") help += " [JSON object]";
      CLI::Option* opt = app.add_option("--" + name, values_[name], help);
      if (type == "boolean") opt->expected(0, 1);
      if (!spec.at("default").is_object()) opt->default_str(spec.at("default").dump());
      options_[name] = {opt, type};
    }
    app.add_option("--config", config_file_, "JSON config file; its fields override flags")->check(CLI::ExistingFile);
  }

  json build() const {
    json j = json::object();
    for (const auto& [name, entry] : options_) {
      if (entry.option->count() == 0) continue;
      const std::string& v = values_.at(name);
      j[name] = convert(name, entry.type, v);
    }
    if (!config_file_.empty()) {
      json file;
      try {
        file = json::parse(read_file(config_file_));
      } catch (const json::parse_error& e) {
        fail(ErrorKind::invalid_argument, config_file_ + ": invalid JSON: " + e.what());
      }
      if (!file.is_object()) fail(ErrorKind::invalid_argument, config_file_ + ": config must be a JSON object");
      for (const auto& [k, v] : file.items()) j[k] = v;
    }
    return j;
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::string type;
  };
  std::map<std::string, std::string> values_;
  std::map<std::string, Entry> options_;
  std::string config_file_;

  static json convert(const std::string& name, const std::string& type, const std::string& v) {
    const auto bad = [&] { fail(ErrorKind::invalid_argument, "--" + name + ": expected " + type + ", got '" + v + "'"); };
    try {
      if (type == "string") return v;
      if (type == "boolean") {
        if (v.empty() || v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        bad();
      }
      std::size_t used = 0;
      if (type == "number") {
        const double d = std::stod(v, &used);
        if (used != v.size()) bad();
        return d;
      }
      if (type == "integer") {
        if (!v.empty() && v[0] == '-') bad();
        const unsigned long long u = std::stoull(v, &used);
        if (used != v.size()) bad();
        return u;
      }
      if (type == "object") {
        json o = json::parse(v);
        if (!o.is_object()) bad();
        return o;
      }
    } catch (const std::logic_error&) {
      bad();
    } catch (const json::exception&) {
      bad();
    }
    return v;
  }
};

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

std::string fmt_metric(const json& report, const char* key) {
  if (!report.contains(key) || report.at(key).is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", report.at(key).get<double>());
  return buf;
}

int run_training(const std::string& root, const json& flags, const std::string& out, RunMode expected) {
  json config = flags;
  if (!config.contains("mode")) config["mode"] = to_string(expected);
  const ExperimentConfig parsed = ExperimentConfig::from_json(config);
  if (expected == RunMode::pipeline && parsed.mode != RunMode::pipeline)
    fail(ErrorKind::invalid_argument, "mode: 'pipeline run' trains the full pipeline; use 'train' for " +
                                          std::string(to_string(parsed.mode)));
  if (expected != RunMode::pipeline && parsed.mode == RunMode::pipeline)
    fail(ErrorKind::invalid_argument, "mode: 'train' runs detect or discover alone; use 'pipeline run'");

  RunStore store(root);
  DatasetRegistry registry(root);
  const ExperimentConfig c = validate_submission(config, &registry);
  const RunRecord rec = store.create(c.to_json());
  std::cerr << "run " << rec.id << " started\n";
  if (auto err = execute_run(store, &registry, rec.id)) {
    std::cerr << "run " << rec.id << " failed\n";
    throw *err;
  }
  const json report = *store.read_artifact(rec.id, "report");
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write " + out);
    f << report.dump();
  }
  const json& m = report.at("metrics");
  std::cout << "run " << rec.id << " finished\n"
            << "  dataset              " << report.value("dataset", "") << "\n"
            << "  mode                 " << report.at("mode").get<std::string>() << "\n"
            << "  known_acc            " << fmt_metric(report, "known_acc") << "\n"
            << "  open_nmi             " << fmt_metric(report, "open_nmi") << "\n"
            << "  detection_known_acc  " << fmt_metric(m, "detection_known_acc") << "\n"
            << "  detection_open_recall " << fmt_metric(m, "detection_open_recall") << "\n";
  if (!out.empty()) std::cout << "  report               " << out << "\n";
  return 0;
}

void print_stats(const json& stats) {
  std::cout << "dataset " << stats.value("name", "") << ": " << stats.at("num_labels").get<std::size_t>() << " labels\n";
  for (const char* s : {"train", "eval", "test"}) {
    const json& sp = stats.at("splits").at(s);
    const json& len = sp.at("token_length");
    std::printf("  %-5s %6zu utterances, tokens median %.1f (min %.0f, max %.0f)\n", s, sp.at("count").get<std::size_t>(),
                len.at("median").get<double>(), len.at("min").get<double>(), len.at("max").get<double>());
  }
}

int serve(const std::string& root, const std::string& listen, std::size_t workers, const std::string& static_dir) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(ServiceOptions{root, workers, true});
  HttpServer http(service, static_dir);
  const ListenAddress address = parse_listen_address(listen);
  const int port = http.bind(address);
  const auto& rec = service.store().recovery();
  std::cout << "openintent serving " << fs::absolute(root).string() << " on http://" << address.host << ":" << port
            << " (" << workers << " worker" << (workers == 1 ? "" : "s") << "; recovered " << rec.runs << " runs, "
            << rec.interrupted << " interrupted, " << rec.queued << " queued)" << std::endl;

  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    http.stop();
  });
  http.serve();
  service.shutdown();
  if (waiter.joinable()) {
    // serve() can also end without a signal; unblock the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  return 0;
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"openintent: open intent detection and discovery workbench"};
  app.require_subcommand(1);
  std::string root = env_or("OPENINTENT_DATA_ROOT", "openintent-data");
  app.add_option("--data_root", root, "Run store and dataset registry directory (env OPENINTENT_DATA_ROOT)")
      ->capture_default_str();

  // dataset register|stats
  auto* dataset = app.add_subcommand("dataset", "Register datasets and inspect statistics");
  dataset->require_subcommand(1);
  std::string ds_name, ds_path, ds_format = "tsv", ds_out;
  auto* reg = dataset->add_subcommand("register", "Register a dataset directory under a name");
  reg->add_option("--name", ds_name, "Dataset name")->required();
  reg->add_option("--path", ds_path, "Directory with train/eval/test files")->required();
  reg->add_option("--format", ds_format, "File format")->check(CLI::IsMember({"tsv", "jsonl"}))->capture_default_str();
  auto* stats = dataset->add_subcommand("stats", "Label and length statistics of a dataset");
  auto* stats_name = stats->add_option("--name", ds_name, "Registered dataset name");
  auto* stats_path = stats->add_option("--path", ds_path, "Dataset directory");
  stats_name->excludes(stats_path);
  stats->add_option("--format", ds_format, "File format for --path")
      ->check(CLI::IsMember({"tsv", "jsonl"}))
      ->capture_default_str();
  stats->add_option("--out", ds_out, "Write the statistics as JSON");

  // train / pipeline run
  ConfigFlags train_flags, pipeline_flags;
  std::string out;
  auto* train = app.add_subcommand("train", "Train open intent detection or discovery alone (--mode detect|discover)");
  train_flags.attach(*train);
  train->add_option("--out", out, "Write the JSON report here");
  auto* pipeline = app.add_subcommand("pipeline", "Detection followed by discovery");
  pipeline->require_subcommand(1);
  auto* prun = pipeline->add_subcommand("run", "Train and evaluate the full pipeline");
  pipeline_flags.attach(*prun);
  prun->add_option("--out", out, "Write the JSON report here");

  // eval
  std::string run_id, metric;
  auto* eval = app.add_subcommand("eval", "Print a metric of a finished run");
  eval->add_option("--run", run_id, "Run id")->required();
  eval->add_option("--metric", metric, "acc: known-intent accuracy, nmi: open-intent NMI")
      ->required()
      ->check(CLI::IsMember({"acc", "nmi"}));

  // export-views
  std::string views_out, tags_text, sweep_table;
  int bins = 0;
  auto* export_views = app.add_subcommand("export-views", "Write analysis view payloads as JSON files");
  export_views->add_option("--run", run_id, "Run id");
  export_views->add_option("--out", views_out, "Output directory")->required();
  export_views->add_option("--tags", tags_text, "Comma-separated view tags (default: all)");
  export_views->add_option("--bins", bins, "Histogram bins for confidence_histogram");
  export_views->add_option("--sweep_table", sweep_table, "Tab-separated results table for a sweep_curve view")
      ->check(CLI::ExistingFile);

  // serve
  std::string listen = env_or("OPENINTENT_LISTEN", "127.0.0.1:8080");
  std::size_t workers = 1;
  if (const char* w = std::getenv("OPENINTENT_WORKERS"); w && *w) workers = std::strtoul(w, nullptr, 10);
  std::string static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API under /api/v1");
  serve_cmd->add_option("--listen", listen, "host:port (env OPENINTENT_LISTEN)")->capture_default_str();
  serve_cmd->add_option("--workers", workers, "Concurrent training runs (env OPENINTENT_WORKERS)")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Directory of console assets served at /")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*reg) {
      const auto entry = DatasetRegistry(root).add(ds_name, ds_path, parse_dataset_format(ds_format));
      std::cout << "registered " << entry.name << " (" << entry.labels << " labels, " << entry.split_sizes[0]
                << "/" << entry.split_sizes[1] << "/" << entry.split_sizes[2] << " train/eval/test) from "
                << entry.path << "\n";
      return 0;
    }
    if (*stats) {
      if (ds_name.empty() && ds_path.empty()) fail(ErrorKind::invalid_argument, "dataset stats needs --name or --path");
      json s;
      if (!ds_path.empty()) {
        Dataset d = load_dataset(ds_path, parse_dataset_format(ds_format));
        s = dataset_stats(d).to_json();
      } else {
        s = DatasetRegistry(root).stats(ds_name).to_json();
      }
      if (!ds_out.empty()) write_json_file(ds_out, s);
      print_stats(s);
      return 0;
    }
    if (*train) return run_training(root, train_flags.build(), out, RunMode::detect);
    if (*prun) return run_training(root, pipeline_flags.build(), out, RunMode::pipeline);
    if (*eval) {
      RunStore store(root);
      const RunRecord rec = store.get(run_id);
      if (rec.state != RunState::finished)
        fail(ErrorKind::conflict, "run " + run_id + " is " + std::string(to_string(rec.state)));
      const json report = *store.read_artifact(run_id, "report");
      const char* key = metric == "acc" ? "known_acc" : "open_nmi";
      if (!report.contains(key) || report.at(key).is_null())
        fail(ErrorKind::conflict, "run " + run_id + " has no " + key + " (mode " + report.value("mode", "") + ")");
      std::cout << report.at(key).dump() << "\n";
      return 0;
    }
    if (*export_views) {
      fs::create_directories(views_out);
      if (!sweep_table.empty()) {
        const auto rows = load_sweep_table(sweep_table);
        write_json_file((fs::path(views_out) / "sweep_curve.json").string(), build_sweep_view(rows));
        std::cout << "wrote sweep_curve from " << sweep_table << "\n";
      }
      if (run_id.empty()) {
        if (sweep_table.empty()) fail(ErrorKind::invalid_argument, "export-views needs --run or --sweep_table");
        return 0;
      }
      std::vector<std::string> tags;
      if (tags_text.empty()) {
        for (ViewTag t : all_view_tags())
          if (!(t == ViewTag::sweep_curve && !sweep_table.empty())) tags.emplace_back(to_string(t));
      } else {
        std::stringstream ss(tags_text);
        for (std::string t; std::getline(ss, t, ',');)
          if (!t.empty()) tags.push_back(t);
      }
      Service service(ServiceOptions{root, 1, false});
      for (const auto& tag : tags) {
        json params = json::object();
        if (bins > 0 && tag == "confidence_histogram") params["bins"] = bins;
        try {
          const json v = service.view(run_id, tag, params);
          write_json_file((fs::path(views_out) / (tag + ".json")).string(), v);
          std::cout << "wrote " << tag << "\n";
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::conflict) throw;
          std::cout << "skipped " << tag << ": " << e.what() << "\n";
        }
      }
      return 0;
    }
    if (*serve_cmd) return serve(root, listen, workers, static_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_user_error(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
