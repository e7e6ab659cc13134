#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stub_server.hpp"
#include "support.hpp"
#include "ttt/cli.hpp"
#include "ttt/codec.hpp"
#include "ttt/ft_data.hpp"
#include "ttt/inference.hpp"
#include "ttt/predictor.hpp"
#include "ttt/ttt_data.hpp"

using namespace ttt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "arc-ttt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json task_json(const Task& t) {
  json j;
  j["train"] = json::array();
  for (const auto& e : t.train) j["train"].push_back({{"input", e.input.to_matrix()}, {"output", e.output.to_matrix()}});
  j["test"] = json::array();
  for (const auto& e : t.test) {
    json tj{{"input", e.input.to_matrix()}};
    if (e.output) tj["output"] = e.output->to_matrix();
    j["test"].push_back(tj);
  }
  return j;
}

// One file per task, rule tasks that the fitting mock solves.
fs::path write_tasks(const fs::path& dir, std::size_t n) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i) {
    Task t = test_support::rule_task(50 + i, dihedral_group()[i % 8], 3, 1 + i % 2);
    std::ofstream(dir / ("task" + std::to_string(i) + ".json")) << task_json(t).dump();
  }
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and bad input") {
    CHECK(run({"--help"}).code == kExitOk);
    CHECK(run({}).code == kExitFatal);
    CHECK(run({"bogus"}).code == kExitFatal);
    const auto missing = run({"infer", "/nonexistent/tasks", "-o", "/tmp/x"});
    CHECK(missing.code == kExitFatal);
    CHECK_FALSE(missing.err.empty());
  }

  TEST_CASE("ttt-data is deterministic") {
    const fs::path dir = test_support::temp_dir("cli-ttt");
    const fs::path tasks = write_tasks(dir / "tasks", 3);
    const auto a = run({"ttt-data", tasks.string(), "-o", (dir / "a").string(), "--seed", "4"});
    REQUIRE(a.code == kExitOk);
    const auto b = run({"ttt-data", tasks.string(), "-o", (dir / "b").string(), "--seed", "4", "--jobs", "3"});
    REQUIRE(b.code == kExitOk);
    for (int i = 0; i < 3; ++i) {
      const std::string f = "task" + std::to_string(i) + ".jsonl";
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
      CHECK_FALSE(read_jsonl(slurp(dir / "a" / f)).empty());
    }
    const auto m = manifest_from_json(slurp(dir / "a" / "task0.manifest.json"));
    CHECK(m.rank == 128);
    CHECK(m.config_fingerprint.size() == 16);

    const auto shared = run({"ttt-data", tasks.string(), "-o", (dir / "s").string(), "--adapter", "shared", "--cap",
                             "5", "--loss", "test_only", "--rank", "64"});
    REQUIRE(shared.code == kExitOk);
    const auto recs = read_jsonl(slurp(dir / "s" / "shared.jsonl"));
    CHECK(recs.size() == 15);
    for (const auto& r : recs) CHECK(r.loss_spans.size() == 1);
    CHECK(manifest_from_json(slurp(dir / "s" / "shared.manifest.json")).rank == 64);
  }

  TEST_CASE("config file, flags win") {
    const fs::path dir = test_support::temp_dir("cli-config");
    const fs::path tasks = write_tasks(dir / "tasks", 1);
    std::ofstream(dir / "run.toml") << "seed = 9\n[ttt-data]\ncap = 7\n";
    REQUIRE(run({"--config", (dir / "run.toml").string(), "ttt-data", tasks.string(), "-o", (dir / "c").string()}).code == kExitOk);
    CHECK(read_jsonl(slurp(dir / "c" / "task0.jsonl")).size() == 7);
    REQUIRE(run({"--config", (dir / "run.toml").string(), "ttt-data", tasks.string(), "-o", (dir / "d").string(),
                 "--cap", "3"}).code == kExitOk);
    CHECK(read_jsonl(slurp(dir / "d" / "task0.jsonl")).size() == 3);
  }

  TEST_CASE("ft-data") {
    const fs::path dir = test_support::temp_dir("cli-ft");
    const std::string pools = std::string(TTT_FIXTURE_DIR) + "/pools.jsonl";
    const auto r = run({"ft-data", pools, "-o", (dir / "ft.jsonl").string(), "-n", "40", "--seed", "2"});
    CHECK(r.code == kExitOk);
    CHECK(r.err.find("gen_tiny") != std::string::npos);
    CHECK(read_jsonl(slurp(dir / "ft.jsonl")).size() == 40);
    const auto meta = json::parse(slurp(dir / "ft.jsonl.meta.json"));
    CHECK(meta["records"] == 40);
    CHECK(meta["fingerprint"].get<std::string>().size() == 16);

    std::ofstream(dir / "tiny.jsonl") << R"({"pool_id": "x", "input": [[1]], "output": [[1]]})" << "\n";
    const auto short_run = run({"ft-data", (dir / "tiny.jsonl").string(), "-o", (dir / "t.jsonl").string(), "-n", "5"});
    CHECK(short_run.code == kExitPartial);
    CHECK(short_run.err.find("PoolExhausted") != std::string::npos);

    std::ofstream(dir / "bad.jsonl") << "{\"pool_id\": \"x\"}\n";
    CHECK(run({"ft-data", (dir / "bad.jsonl").string(), "-o", (dir / "b.jsonl").string()}).code == kExitFatal);
  }

  TEST_CASE("infer, vote and eval compose") {
    const fs::path dir = test_support::temp_dir("cli-pipeline");
    const fs::path tasks = write_tasks(dir / "tasks", 4);
    const auto inf = run({"infer", tasks.string(), "-o", (dir / "dumps").string(), "--jobs", "2"});
    REQUIRE(inf.code == kExitOk);
    CHECK(fs::exists(dir / "dumps" / "task0.candidates.jsonl"));
    CHECK(fs::exists(dir / "dumps" / "task0.candidates.jsonl.meta.json"));

    // Second run resumes every task.
    const auto again = run({"infer", tasks.string(), "-o", (dir / "dumps").string()});
    CHECK(again.code == kExitOk);
    CHECK(again.out.find("4 already done") != std::string::npos);
    // A different config invalidates the sidecars.
    const auto other = run({"infer", tasks.string(), "-o", (dir / "dumps2").string(), "--n", "1"});
    CHECK(other.out.find("already done") == std::string::npos);
    CHECK(candidates_from_jsonl(slurp(dir / "dumps2" / "task0.candidates.jsonl"))[0].candidates.size() == 6);

    const auto vote = run({"vote", (dir / "dumps").string(), "-o", (dir / "attempts.json").string()});
    REQUIRE(vote.code == kExitOk);
    const auto att = json::parse(slurp(dir / "attempts.json"));
    CHECK(att["mode"] == "hierarchical");
    CHECK(att["tasks"].size() == 4);
    CHECK(att["tasks"][1]["attempts"].size() == 2);

    const auto from_attempts =
        run({"eval", tasks.string(), "--attempts", (dir / "attempts.json").string(), "--report-format", "json"});
    REQUIRE(from_attempts.code == kExitOk);
    CHECK(json::parse(from_attempts.out)["summary"]["hierarchical"]["strict"] == 1.0);

    const auto offline = run({"eval", tasks.string(), "--candidates", (dir / "dumps").string(), "--report-format",
                              "json", "--render-dir", (dir / "png").string()});
    REQUIRE(offline.code == kExitOk);
    const auto online = run({"eval", tasks.string(), "--report-format", "json", "--jobs", "3"});
    REQUIRE(online.code == kExitOk);
    CHECK(online.out == offline.out);
    const auto rep = json::parse(online.out);
    CHECK(rep["columns"].size() == 9);
    for (const auto& [col, s] : rep["summary"].items()) CHECK(s["strict"] == 1.0);
    CHECK(fs::exists(dir / "png" / "task0.png"));

    const auto oracle = run({"vote", (dir / "dumps").string(), "--mode", "oracle", "--tasks", tasks.string()});
    REQUIRE(oracle.code == kExitOk);
    CHECK(json::parse(oracle.out)["tasks"][0]["attempts"][0].size() == 1);
    CHECK(run({"vote", (dir / "dumps").string(), "--mode", "oracle"}).code == kExitFatal);

    const auto table = run({"eval", tasks.string(), "--candidates", (dir / "dumps").string()});
    CHECK(table.out.find("single:Transpose()") != std::string::npos);
  }

  TEST_CASE("transport failure writes markers and exits partial") {
    const fs::path dir = test_support::temp_dir("cli-down");
    const fs::path tasks = write_tasks(dir / "tasks", 2);
    test_support::StubServer server([](const std::string& body, std::size_t) {
      const auto j = json::parse(body);
      const std::string prompt = j["prompt"];
      return std::pair{200, json{{"choices", json::array({json{{"text", "[[0]]"}}})}}.dump()};
    });
    const auto ok = run({"infer", tasks.string(), "-o", (dir / "d").string(), "--predictor", "http", "--endpoint",
                         server.url(), "--transforms", "identity,rot90", "--n", "1"});
    CHECK(ok.code == kExitOk);
    for (const auto& r : server.requests()) CHECK(json::parse(r.body)["temperature"] == 0);

    const auto down = run({"infer", tasks.string(), "-o", (dir / "e").string(), "--predictor", "http", "--endpoint",
                           "http://127.0.0.1:1/v1", "--retries", "0", "--timeout-ms", "200"});
    CHECK(down.code == kExitPartial);
    CHECK(fs::exists(dir / "e" / "task0.failed"));
    CHECK_FALSE(fs::exists(dir / "e" / "task0.candidates.jsonl"));
    const auto ev = run({"eval", tasks.string(), "--predictor", "http", "--endpoint", "http://127.0.0.1:1/v1",
                         "--retries", "0", "--timeout-ms", "200"});
    CHECK(ev.code == kExitPartial);
  }

  TEST_CASE("dev80 flag needs the ids") {
    const fs::path dir = test_support::temp_dir("cli-dev80");
    const fs::path tasks = write_tasks(dir / "tasks", 1);
    const auto r = run({"eval", tasks.string(), "--dev80"});
    CHECK(r.code == kExitFatal);
    CHECK(r.err.find("0a1d4ef5") != std::string::npos);
  }
}
