#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "openintent/service/http_server.hpp"
#include "openintent/service/service.hpp"
#include "openintent/synthetic.hpp"
#include "support/temp_dir.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace openintent;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::internal;
}

fs::path write_dataset(const fs::path& dir, std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.classes = 5;
  spec.dim = 6;
  spec.per_class = 30;
  spec.seed = seed;
  write_synthetic(make_synthetic(spec), dir);
  return dir;
}

json run_config(const fs::path& data, const std::string& dataset = {}) {
  json j{{"dataset_format", "jsonl"},
         {"featurizer", "precomputed"},
         {"featurizer_path", (data / "embeddings.txt").string()},
         {"kir", 0.6},
         {"lr", 0.5},
         {"detect", "msp"},
         {"discover", "kmeans"}};
  if (dataset.empty())
    j["dataset_path"] = data.string();
  else
    j["dataset"] = dataset;
  return j;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run store state machine and persistence") {
  TempDir root;
  std::string id;
  {
    RunStore store(root.path());
    const RunRecord rec = store.create(json{{"dataset", "d"}});
    id = rec.id;
    CHECK(rec.state == RunState::queued);
    CHECK(kind_of([&] { store.transition(id, RunState::finished); }) == ErrorKind::conflict);
    store.transition(id, RunState::running);
    store.append_event(id, "step", "hello", json{{"n", 1}});
    store.write_artifact(id, "pipeline", json{{"a", 1}});
    store.write_artifact(id, "report", json{{"b", 2}});
    store.write_artifact(id, "analysis", json::object());
    store.transition(id, RunState::finished);
    CHECK(kind_of([&] { store.write_artifact(id, "late", json::object()); }) == ErrorKind::conflict);
    CHECK(kind_of([&] { store.get("01ARZ3NDEKTSV4RRFFQ69G5FAV"); }) == ErrorKind::not_found);
    CHECK(store.verify_integrity().ok);
  }
  RunStore reopened(root.path());
  const RunRecord back = reopened.get(id);
  CHECK(back.state == RunState::finished);
  CHECK(*reopened.read_artifact(id, "report") == json{{"b", 2}});
  CHECK(back.artifacts.size() == 3);
  CHECK(reopened.list(RunState::finished).size() == 1);
  CHECK(reopened.list(RunState::queued).empty());
  CHECK(reopened.recovery().interrupted == 0);
}

TEST_CASE("is_allowed_transition") {
  CHECK(is_allowed_transition(RunState::queued, RunState::running));
  CHECK(is_allowed_transition(RunState::queued, RunState::failed));
  CHECK(is_allowed_transition(RunState::running, RunState::finished));
  CHECK(is_allowed_transition(RunState::running, RunState::failed));
  CHECK_FALSE(is_allowed_transition(RunState::queued, RunState::finished));
  CHECK_FALSE(is_allowed_transition(RunState::finished, RunState::failed));
  CHECK_FALSE(is_allowed_transition(RunState::failed, RunState::running));
}

TEST_CASE("recovery fails running runs and cuts torn journal lines") {
  TempDir root;
  std::string running, queued;
  {
    RunStore store(root.path());
    running = store.create(json::object()).id;
    queued = store.create(json::object()).id;
    store.transition(running, RunState::running);
  }
  {
    std::ofstream j(root.path() / "runs" / queued / "journal.jsonl", std::ios::app | std::ios::binary);
    j << "{\"seq\":7,\"ty";
  }
  RunStore store(root.path());
  CHECK(store.recovery().interrupted == 1);
  CHECK(store.recovery().queued == 1);
  CHECK(store.recovery().truncated_lines == 1);
  const RunRecord r = store.get(running);
  CHECK(r.state == RunState::failed);
  CHECK(r.error == "interrupted");
  CHECK(store.get(queued).state == RunState::queued);
  CHECK(store.verify_integrity().ok);
  const std::string journal = read_file(root.path() / "runs" / queued / "journal.jsonl");
  CHECK(journal.back() == '\n');
}

TEST_CASE("integrity detects a finished run without artifacts") {
  TempDir root;
  RunStore store(root.path());
  const std::string id = store.create(json::object()).id;
  store.transition(id, RunState::running);
  store.transition(id, RunState::finished);
  const auto rep = store.verify_integrity();
  CHECK_FALSE(rep.ok);
  CHECK(!rep.problems.empty());
}

TEST_CASE("a data root is held by one store at a time") {
  TempDir root;
  RunStore first(root.path());
  CHECK(kind_of([&] { RunStore second(root.path()); }) == ErrorKind::conflict);
}

TEST_CASE("dataset registry") {
  TempDir root, data;
  write_dataset(data.path());
  CHECK(is_valid_dataset_name("synth-1.a_b"));
  CHECK_FALSE(is_valid_dataset_name(".."));
  CHECK_FALSE(is_valid_dataset_name("a/b"));
  CHECK_FALSE(is_valid_dataset_name(""));
  {
    DatasetRegistry reg(root.path());
    const DatasetEntry e = reg.add("synth", data.path(), DatasetFormat::jsonl);
    CHECK(e.labels == 5);
    CHECK(kind_of([&] { reg.add("synth", data.path(), DatasetFormat::jsonl); }) == ErrorKind::conflict);
    CHECK(kind_of([&] { reg.add("bad", data.path() / "missing", DatasetFormat::jsonl); }) != ErrorKind::conflict);
    CHECK(kind_of([&] { reg.get("other"); }) == ErrorKind::not_found);
  }
  DatasetRegistry reg(root.path());
  CHECK(reg.contains("synth"));
  CHECK(reg.load("synth").label_set.size() == 5);
  const json via_name = json{{"dataset", "synth"}};
  CHECK(resolve_dataset(via_name, &reg).label_set.size() == 5);
  reg.remove("synth");
  CHECK(reg.list().empty());
}

TEST_CASE("service runs, caches views and serves predictions") {
  TempDir root, data;
  write_dataset(data.path());
  Service svc(ServiceOptions{root.path(), 1, true});
  svc.register_dataset("synth", data.path(), DatasetFormat::jsonl);
  const RunRecord rec = svc.submit(run_config(data.path(), "synth"));
  svc.wait_idle();
  const RunRecord done = svc.get_run(rec.id);
  REQUIRE(done.state == RunState::finished);
  CHECK(!done.events.empty());

  const json v1 = svc.view(rec.id, "confusion");
  CHECK(fs::exists(root.path() / "runs" / rec.id / "views" / "confusion.json"));
  CHECK(svc.view(rec.id, "confusion").dump() == v1.dump());
  const json h = svc.view(rec.id, "confidence_histogram", json{{"bins", "4"}});
  CHECK(h.at("payload").at("known").size() == 4);
  CHECK(kind_of([&] { svc.view(rec.id, "nope"); }) == ErrorKind::not_found);

  const json pred = svc.predict(rec.id, json{{"utterances", json::array({json{{"id", "train-intent_00-0"}, {"text", "x"}}})}});
  CHECK(pred.at("predictions").size() == 1);
  CHECK(kind_of([&] { svc.predict(rec.id, json{{"texts", json::array({"never seen"})}}); }) ==
        ErrorKind::invalid_argument);

  CHECK(svc.list_runs(RunState::finished).size() == 1);
  CHECK(svc.list_runs(RunState::running).empty());
  CHECK(svc.cancel(rec.id).state == RunState::finished);
  CHECK(kind_of([&] { svc.submit(json{{"dataset", "unknown"}}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("queued runs cancel and pin their dataset") {
  TempDir root, data;
  write_dataset(data.path());
  Service svc(ServiceOptions{root.path(), 1, false});
  svc.register_dataset("synth", data.path(), DatasetFormat::jsonl);
  const RunRecord rec = svc.submit(run_config(data.path(), "synth"));
  CHECK(kind_of([&] { svc.delete_dataset("synth"); }) == ErrorKind::conflict);
  CHECK(kind_of([&] { svc.view(rec.id, "confusion"); }) == ErrorKind::conflict);
  const RunRecord c = svc.cancel(rec.id);
  CHECK(c.state == RunState::failed);
  CHECK(c.error == "cancelled");
  svc.delete_dataset("synth");
  CHECK(svc.list_datasets().empty());
}

TEST_CASE("http api") {
  TempDir root, data;
  write_dataset(data.path());
  Service svc(ServiceOptions{root.path(), 1, true});
  HttpServer server(svc);
  const int port = server.bind(parse_listen_address("127.0.0.1:0"));
  std::thread th([&] { server.serve(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/api/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(cli.Get("/api/v1/schema")->status == 200);

  auto reg = cli.Post("/api/v1/datasets",
                      json{{"name", "synth"}, {"path", data.path().string()}, {"format", "jsonl"}}.dump(),
                      "application/json");
  CHECK(reg->status == 201);
  CHECK(cli.Get("/api/v1/datasets/synth/stats")->status == 200);
  CHECK(cli.Get("/api/v1/datasets/none/stats")->status == 404);

  json bad = run_config(data.path(), "synth");
  bad["kir"] = 0;
  auto rej = cli.Post("/api/v1/runs", bad.dump(), "application/json");
  CHECK(rej->status == 400);
  CHECK(json::parse(rej->body).at("error").at("kind") == "invalid_argument");

  auto sub = cli.Post("/api/v1/runs", json{{"config", run_config(data.path(), "synth")}}.dump(), "application/json");
  REQUIRE(sub->status == 201);
  const std::string id = json::parse(sub->body).at("id");
  svc.wait_idle();
  auto got = cli.Get("/api/v1/runs/" + id);
  CHECK(json::parse(got->body).at("state") == "finished");
  CHECK(cli.Get("/api/v1/runs?state=finished")->status == 200);
  CHECK(cli.Get("/api/v1/runs/" + id + "/views/confusion")->status == 200);
  CHECK(cli.Get("/api/v1/runs/" + id + "/views/unknown")->status == 404);
  CHECK(cli.Get("/api/v1/runs/" + id + "/report")->status == 200);
  CHECK(cli.Get("/api/v1/nothing")->status == 404);
  CHECK(cli.Delete("/api/v1/datasets/synth")->status == 200);

  server.stop();
  th.join();
}

#ifdef OPENINTENT_CLI_PATH
TEST_CASE("cli and service produce identical reports") {
  TempDir root_cli, root_svc, data;
  write_dataset(data.path());
  const json cfg = run_config(data.path());
  const fs::path out = root_cli.path() / "report.json";
  std::string cmd = std::string(OPENINTENT_CLI_PATH) + " --data_root " + (root_cli.path() / "store").string() +
                    " pipeline run --out " + out.string();
  for (const auto& [k, v] : cfg.items())
    cmd += " --" + k + " " + (v.is_string() ? v.get<std::string>() : v.dump());
  cmd += " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);

  Service svc(ServiceOptions{root_svc.path(), 1, true});
  const RunRecord rec = svc.submit(cfg);
  svc.wait_idle();
  CHECK(read_file(out) == svc.report(rec.id).dump());

  const std::string bad = std::string(OPENINTENT_CLI_PATH) + " --data_root " + (root_cli.path() / "store").string() +
                          " pipeline run --dataset_path /nonexistent > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 1);
}
#endif
