#include "ttt/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ttt/codec.hpp"
#include "ttt/eval.hpp"
#include "ttt/ft_data.hpp"
#include "ttt/inference.hpp"
#include "ttt/predictor.hpp"
#include "ttt/rng.hpp"
#include "ttt/ttt_data.hpp"
#include "ttt/voting.hpp"

namespace ttt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct PredictorOpts {
  std::string backend = "mock";
  std::string endpoint = "http://127.0.0.1:8000/v1";
  std::string model = "base";
  int max_tokens = 0;
  int timeout_ms = 60'000;
  int retries = 3;
  int in_flight = 8;
  int permutations = 2;
  std::string transforms = "all";
};

// Runs fn(0..n-1) on up to `jobs` threads; the first exception wins.
template <typename F>
void parallel_for(std::size_t n, int jobs, F fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < std::min(threads, n); ++j) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, std::string_view suffix) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().string().ends_with(suffix)) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

void attach_solutions(TaskSet& set, const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  for (auto& task : set.tasks) {
    if (!j.contains(task.id)) continue;
    const auto& outs = j.at(task.id);
    if (outs.size() != task.test.size())
      throw Error(path + ": task '" + task.id + "' has " + std::to_string(task.test.size()) + " test inputs but " +
                  std::to_string(outs.size()) + " solutions");
    for (std::size_t m = 0; m < outs.size(); ++m)
      task.test[m].output = make_grid(outs[m].get<std::vector<std::vector<int>>>());
  }
}

TaskSet load_tasks(const std::string& path, const std::string& solutions = "") {
  TaskSet set;
  for (const auto& file : expand_inputs({path}, ".json")) {
    auto part = load_arc_file(file.string());
    for (auto& t : part.tasks) set.tasks.push_back(std::move(t));
  }
  if (!solutions.empty()) attach_solutions(set, solutions);
  validate_task_set(set);
  return set;
}

std::string task_digest(const Task& t) {
  std::string d = t.id;
  auto add = [&](const Grid& g) {
    d += '|';
    d += render_grid_text(g);
  };
  for (const auto& ex : t.train) {
    add(ex.input);
    add(ex.output);
  }
  for (const auto& ex : t.test) {
    add(ex.input);
    if (ex.output) add(*ex.output);
  }
  return d;
}

std::string tasks_digest(const TaskSet& set) {
  std::string d;
  for (const auto& t : set.tasks) d += fingerprint(task_digest(t));
  return d;
}

std::vector<Transform> parse_transform_list(const std::string& spec) {
  if (spec == "all") return inference_transform_set();
  std::vector<Transform> out;
  int depth = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    static const std::map<std::string, Transform> aliases{
        {"identity", Identity{}}, {"rot90", Rotate{1}},   {"rot180", Rotate{2}},
        {"flip0", Flip{0}},       {"flip1", Flip{1}},     {"transpose", Transpose{}},
    };
    auto it = aliases.find(token);
    Transform t = it != aliases.end() ? it->second : parse_transform(token);
    if (!is_invertible(t)) throw NonInvertibleError(to_string(t) + " cannot be used for inference");
    out.push_back(std::move(t));
    token.clear();
  };
  for (char c : spec) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0) {
      flush();
      continue;
    }
    if (c != ' ') token += c;
  }
  flush();
  if (out.empty()) throw std::invalid_argument("empty transform list");
  return out;
}

void add_predictor_options(CLI::App* sub, PredictorOpts& o) {
  sub->add_option("--predictor", o.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  sub->add_option("--endpoint", o.endpoint, "completion server base URL");
  sub->add_option("--model", o.model, "model or adapter id sent in the request");
  sub->add_option("--max-tokens", o.max_tokens, "0 derives the bound from the prompt");
  sub->add_option("--timeout-ms", o.timeout_ms);
  sub->add_option("--retries", o.retries);
  sub->add_option("--max-in-flight", o.in_flight);
  sub->add_option("--n", o.permutations, "demo permutations per transform")->check(CLI::PositiveNumber);
  sub->add_option("--transforms", o.transforms, "all, or a comma list (identity,rot90,rot180,flip0,flip1,transpose)");
}

std::unique_ptr<Predictor> build_predictor(const PredictorOpts& o) {
  PredictorConfig cfg;
  cfg.backend = o.backend == "http" ? Backend::http : Backend::mock;
  cfg.endpoint = o.endpoint;
  cfg.model = o.model;
  if (o.max_tokens > 0) cfg.max_tokens = o.max_tokens;
  cfg.timeout = std::chrono::milliseconds(o.timeout_ms);
  cfg.retries = o.retries;
  cfg.max_in_flight = o.in_flight;
  return make_predictor(cfg);
}

ojson predictor_json(const PredictorOpts& o, const std::vector<Transform>& transforms) {
  ojson j;
  j["predictor"] = o.backend;
  if (o.backend == "http") {
    j["endpoint"] = o.endpoint;
    j["model"] = o.model;
    j["max_tokens"] = o.max_tokens;
  }
  j["n"] = o.permutations;
  j["transforms"] = ojson::array();
  for (const auto& t : transforms) j["transforms"].push_back(to_string(t));
  return j;
}

std::vector<CandidateSet> load_candidates(const std::vector<std::string>& inputs) {
  std::vector<CandidateSet> all;
  for (const auto& file : expand_inputs(inputs, ".candidates.jsonl")) {
    std::vector<CandidateSet> part;
    try {
      part = candidates_from_jsonl(read_file(file));
    } catch (const ParseError& e) {
      throw ParseError(file.string() + ": " + e.what(), e.offset, e.is_line);
    }
    for (auto& s : part) all.push_back(std::move(s));
  }
  std::stable_sort(all.begin(), all.end(), [](const CandidateSet& a, const CandidateSet& b) {
    return std::tie(a.task_id, a.test_index) < std::tie(b.task_id, b.test_index);
  });
  return all;
}

std::string canonical_dump(std::span<const CandidateSet> sets) {
  std::string out;
  for (const auto& s : sets) out += candidates_to_jsonl(s);
  return out;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
  }
}

ojson grids_json(const std::vector<Grid>& grids) {
  ojson j = ojson::array();
  for (const auto& g : grids) j.push_back(g.to_matrix());
  return j;
}

// ---- ttt-data

struct TTTDataOpts {
  std::string tasks, out_dir, format = "icl", loss = "demos", adapter = "per_task";
  std::size_t cap = 250;
  int permutations = 2;
  bool no_transforms = false, no_color_shuffle = false, quantized = false;
  TrainerManifest manifest;
};

int cmd_ttt_data(const Common& common, const TTTDataOpts& o, std::ostream& out) {
  const TaskSet set = load_tasks(o.tasks);
  TTTDataConfig cfg;
  cfg.cap = o.cap;
  cfg.loss_mode = parse_loss_mode(o.loss);
  cfg.seed = common.seed;
  cfg.permutations = o.permutations;
  cfg.use_transforms = !o.no_transforms;
  cfg.shuffle_colors = !o.no_color_shuffle;

  TrainerManifest manifest = o.manifest;
  manifest.adapter_scope = o.adapter == "shared" ? AdapterScope::shared : AdapterScope::per_task;
  manifest.quantized = o.quantized;
  ojson fp{{"command", "ttt-data"}, {"format", o.format},     {"cap", o.cap},
           {"loss", o.loss},        {"seed", common.seed},    {"permutations", o.permutations},
           {"transforms", cfg.use_transforms}, {"color_shuffle", cfg.shuffle_colors},
           {"manifest", ojson::parse(manifest_to_json(manifest))}};
  manifest.config_fingerprint = fingerprint(fp.dump() + tasks_digest(set));

  std::vector<TTTDataset> datasets(set.tasks.size());
  parallel_for(set.tasks.size(), common.jobs, [&](std::size_t i) {
    datasets[i] = o.format == "e2e" ? build_e2e_dataset(set.tasks[i], cfg) : build_ttt_dataset(set.tasks[i], cfg);
  });
  const auto written = emit_training_bundle(datasets, manifest, o.out_dir);
  for (const auto& ds : datasets) {
    out << ds.task_id << ": " << ds.records.size() << " records";
    if (ds.stats.size_dropped || ds.stats.cap_dropped)
      out << " (size-dropped " << ds.stats.size_dropped << ", cap-dropped " << ds.stats.cap_dropped << ")";
    out << "\n";
  }
  out << "wrote " << written.size() << " files to " << o.out_dir << "  fingerprint: " << manifest.config_fingerprint
      << "\n";
  return kExitOk;
}

// ---- ft-data

struct FTDataOpts {
  std::string pools, out;
  FTDataConfig cfg;
};

int cmd_ft_data(const Common& common, FTDataOpts o, std::ostream& out, std::ostream& err) {
  const std::string bytes = read_file(o.pools);
  std::vector<ExamplePool> pools;
  try {
    pools = read_pools_jsonl(bytes);
  } catch (const ParseError& e) {
    throw ParseError(o.pools + ": " + e.what(), e.offset, e.is_line);
  }
  o.cfg.seed = common.seed;
  const FTDataset ds = build_ft_dataset(pools, o.cfg);
  ojson fp{{"command", "ft-data"}, {"seed", common.seed},    {"n", o.cfg.n},
           {"rate", o.cfg.rate},   {"shard", o.cfg.shard},  {"shards", o.cfg.shards}};
  const std::string fpr = fingerprint(fp.dump() + fingerprint(bytes));
  write_file(o.out, write_jsonl(ds.records));
  ojson meta{{"fingerprint", fpr},
             {"records", ds.records.size()},
             {"augmented", ds.augmented},
             {"size_skipped", ds.size_skipped},
             {"warnings", ds.warnings}};
  write_file(o.out + ".meta.json", meta.dump(2) + "\n");
  for (const auto& w : ds.warnings) err << "warning: " << w << "\n";
  out << "wrote " << ds.records.size() << " records to " << o.out << " (" << ds.augmented << " augmented)"
      << "  fingerprint: " << fpr << "\n";
  if (ds.records.size() < o.cfg.n) {
    err << "error: PoolExhausted: only " << ds.records.size() << " of " << o.cfg.n << " records\n";
    return kExitPartial;
  }
  return kExitOk;
}

// ---- infer

struct InferOpts {
  std::string tasks, out_dir;
  PredictorOpts predictor;
};

int cmd_infer(const Common& common, const InferOpts& o, std::ostream& out, std::ostream& err) {
  const TaskSet set = load_tasks(o.tasks);
  InferenceConfig cfg;
  cfg.permutations = o.predictor.permutations;
  cfg.transforms = parse_transform_list(o.predictor.transforms);
  cfg.seed = common.seed;
  const ojson run{{"command", "infer"}, {"seed", common.seed}, {"predictor", predictor_json(o.predictor, cfg.transforms)}};
  auto predictor = build_predictor(o.predictor);
  fs::create_directories(o.out_dir);

  enum class Status { done, resumed, failed };
  std::vector<Status> status(set.tasks.size());
  std::vector<std::string> messages(set.tasks.size());
  parallel_for(set.tasks.size(), common.jobs, [&](std::size_t i) {
    const Task& task = set.tasks[i];
    const fs::path dump = fs::path(o.out_dir) / (task.id + ".candidates.jsonl");
    const fs::path meta = fs::path(o.out_dir) / (task.id + ".candidates.jsonl.meta.json");
    const fs::path marker = fs::path(o.out_dir) / (task.id + ".failed");
    const std::string fpr = fingerprint(run.dump() + task_digest(task));
    if (fs::exists(dump) && fs::exists(meta)) {
      try {
        if (ojson::parse(read_file(meta)).value("fingerprint", "") == fpr) {
          status[i] = Status::resumed;
          return;
        }
      } catch (const std::exception&) {
      }
    }
    std::string text;
    try {
      for (std::size_t m = 0; m < task.test.size(); ++m)
        text += candidates_to_jsonl(generate_candidates(task, m, *predictor, cfg));
    } catch (const PredictorUnavailable& e) {
      write_file(marker, std::string(e.what()) + "\n");
      status[i] = Status::failed;
      messages[i] = e.what();
      return;
    }
    // Dump first, sidecar last: a kill in between leaves the task unfinished.
    const fs::path tmp = dump.string() + ".tmp";
    write_file(tmp, text);
    fs::rename(tmp, dump);
    write_file(meta, ojson{{"fingerprint", fpr}, {"task_id", task.id}}.dump(2) + "\n");
    fs::remove(marker);
    status[i] = Status::done;
  });

  std::size_t failed = 0, resumed = 0;
  for (std::size_t i = 0; i < set.tasks.size(); ++i) {
    if (status[i] == Status::failed) {
      ++failed;
      err << "error: " << set.tasks[i].id << ": " << messages[i] << "\n";
    }
    resumed += status[i] == Status::resumed;
  }
  out << "infer: " << set.tasks.size() - failed << "/" << set.tasks.size() << " tasks";
  if (resumed) out << " (" << resumed << " already done)";
  out << "  fingerprint: " << fingerprint(run.dump() + tasks_digest(set)) << "\n";
  return failed ? kExitPartial : kExitOk;
}

// ---- vote

struct VoteOpts {
  std::vector<std::string> candidates;
  std::string out, mode = "hierarchical", weighting = "endorsement", tasks, solutions;
};

GlobalWeighting parse_weighting(const std::string& s) {
  return s == "frequency" ? GlobalWeighting::frequency : GlobalWeighting::endorsement;
}

int cmd_vote(const VoteOpts& o, std::ostream& out) {
  const auto sets = load_candidates(o.candidates);
  std::optional<TaskSet> truths;
  if (o.mode == "oracle") {
    if (o.tasks.empty()) throw std::invalid_argument("--mode oracle needs --tasks with ground truth");
    truths = load_tasks(o.tasks, o.solutions);
  }
  const GlobalWeighting weighting = parse_weighting(o.weighting);
  ojson fp{{"command", "vote"}, {"mode", o.mode}, {"weighting", o.weighting}};
  std::string fp_text = fp.dump() + fingerprint(canonical_dump(sets));
  if (truths) fp_text += tasks_digest(*truths);

  ojson j;
  j["fingerprint"] = fingerprint(fp_text);
  j["mode"] = o.mode;
  j["tasks"] = ojson::array();
  for (std::size_t i = 0; i < sets.size();) {
    ojson tj;
    tj["task_id"] = sets[i].task_id;
    tj["attempts"] = ojson::array();
    tj["audit"] = ojson::array();
    const std::string id = sets[i].task_id;
    std::size_t expected = 0;
    for (; i < sets.size() && sets[i].task_id == id; ++i, ++expected) {
      const CandidateSet& s = sets[i];
      if (s.test_index != expected)
        throw Error("candidates for task '" + id + "' skip test index " + std::to_string(expected));
      if (o.mode == "hierarchical") {
        auto v = hierarchical_vote(s.candidates, weighting);
        tj["attempts"].push_back(grids_json(v.attempts));
        tj["audit"].push_back(ojson::parse(vote_audit_to_json(v.audit)));
      } else if (o.mode == "flattened") {
        auto v = flattened_vote(s.candidates);
        tj["attempts"].push_back(grids_json(v.attempts));
        tj["audit"].push_back(ojson::parse(vote_audit_to_json(v.audit)));
      } else {
        const Task& task = truths->find(id);
        if (s.test_index >= task.test.size() || !task.test[s.test_index].output)
          throw LookupError("no ground truth for task '" + id + "' test " + std::to_string(s.test_index));
        tj["attempts"].push_back(
            grids_json(select_attempts("oracle", s.candidates, task.test[s.test_index].output, weighting)));
        tj["audit"].push_back(nullptr);
      }
    }
    j["tasks"].push_back(std::move(tj));
  }
  emit(o.out, j.dump(2) + "\n", out);
  return kExitOk;
}

// ---- eval

struct EvalOpts {
  std::string tasks, solutions, attempts, report_format = "table", out, render_dir;
  std::string weighting = "endorsement", pairing = "positional";
  std::vector<std::string> candidates;
  bool dev80 = false;
  int cell = 16;
  PredictorOpts predictor;
};

void render_reports(const TaskSet& set, std::span<const CandidateSet> sets, const EvalOpts& o,
                    GlobalWeighting weighting) {
  fs::create_directories(o.render_dir);
  for (const auto& task : set.tasks) {
    std::vector<std::vector<Grid>> attempts(task.test.size());
    for (const auto& s : sets)
      if (s.task_id == task.id && s.test_index < attempts.size())
        attempts[s.test_index] = hierarchical_vote(s.candidates, weighting).attempts;
    const auto png = encode_png(render_task_image(task, attempts, static_cast<std::size_t>(o.cell)));
    write_file(fs::path(o.render_dir) / (task.id + ".png"), std::string(png.begin(), png.end()));
  }
}

EvalReport score_attempts_file(const TaskSet& set, const std::string& path, AttemptPairing pairing,
                               const std::string& fpr) {
  const auto j = ojson::parse(read_file(path));
  const std::string mode = j.at("mode").get<std::string>();
  std::map<std::string, std::vector<std::vector<Grid>>> by_task;
  for (const auto& tj : j.at("tasks")) {
    auto& slots = by_task[tj.at("task_id").get<std::string>()];
    for (const auto& per_test : tj.at("attempts")) {
      std::vector<Grid> grids;
      for (const auto& g : per_test) grids.push_back(make_grid(g.get<std::vector<std::vector<int>>>()));
      slots.push_back(std::move(grids));
    }
  }
  EvalReport report;
  report.fingerprint = fpr;
  report.column_names = {mode};
  for (const auto& task : set.tasks) {
    TaskResult tr;
    tr.task_id = task.id;
    tr.level = hardness_of(task.id);
    const auto it = by_task.find(task.id);
    const std::vector<std::vector<Grid>> none;
    tr.columns.emplace(mode, score_task(it == by_task.end() ? none : it->second, task, pairing));
    report.tasks.push_back(std::move(tr));
  }
  summarize(report);
  return report;
}

int cmd_eval(const Common& common, const EvalOpts& o, std::ostream& out, std::ostream& err) {
  TaskSet set = load_tasks(o.tasks, o.solutions);
  if (o.dev80) set = load_dev80(set);
  EvalConfig cfg;
  cfg.inference.permutations = o.predictor.permutations;
  cfg.inference.transforms = parse_transform_list(o.predictor.transforms);
  cfg.inference.seed = common.seed;
  cfg.weighting = parse_weighting(o.weighting);
  cfg.pairing = o.pairing == "independent" ? AttemptPairing::independent : AttemptPairing::positional;
  ojson fp{{"command", "eval"}, {"weighting", o.weighting}, {"pairing", o.pairing}, {"dev80", o.dev80}};
  fp["transforms"] = ojson::array();
  for (const auto& t : cfg.inference.transforms) fp["transforms"].push_back(to_string(t));

  EvalReport report;
  std::vector<CandidateSet> sets;
  if (!o.attempts.empty()) {
    const std::string bytes = read_file(o.attempts);
    report = score_attempts_file(set, o.attempts, cfg.pairing,
                                 fingerprint(fp.dump() + fingerprint(bytes) + tasks_digest(set)));
  } else {
    std::map<std::string, std::string> errors;
    if (!o.candidates.empty()) {
      sets = load_candidates(o.candidates);
    } else {
      auto predictor = build_predictor(o.predictor);
      std::vector<std::vector<CandidateSet>> per_task(set.tasks.size());
      std::vector<std::string> failures(set.tasks.size());
      parallel_for(set.tasks.size(), common.jobs, [&](std::size_t i) {
        try {
          for (std::size_t m = 0; m < set.tasks[i].test.size(); ++m)
            per_task[i].push_back(generate_candidates(set.tasks[i], m, *predictor, cfg.inference));
        } catch (const PredictorUnavailable& e) {
          per_task[i].clear();
          failures[i] = e.what();
        }
      });
      for (std::size_t i = 0; i < set.tasks.size(); ++i) {
        if (!failures[i].empty()) errors[set.tasks[i].id] = failures[i];
        for (auto& s : per_task[i]) sets.push_back(std::move(s));
      }
      std::stable_sort(sets.begin(), sets.end(), [](const CandidateSet& a, const CandidateSet& b) {
        return std::tie(a.task_id, a.test_index) < std::tie(b.task_id, b.test_index);
      });
    }
    cfg.fingerprint = fingerprint(fp.dump() + fingerprint(canonical_dump(sets)) + tasks_digest(set));
    report = evaluate_candidates(set, sets, cfg);
    for (auto& tr : report.tasks) {
      if (auto it = errors.find(tr.task_id); it != errors.end()) {
        tr.error = it->second;
        err << "error: " << tr.task_id << ": " << it->second << "\n";
      }
    }
    if (!o.render_dir.empty()) render_reports(set, sets, o, cfg.weighting);
  }
  emit(o.out, o.report_format == "json" ? report_to_json(report) : report_to_table(report), out);
  const bool partial = std::any_of(report.tasks.begin(), report.tasks.end(),
                                   [](const TaskResult& t) { return t.error.has_value(); });
  return partial ? kExitPartial : kExitOk;
}

std::string describe_error(const std::exception& e) {
  if (const auto* p = dynamic_cast<const ParseError*>(&e))
    return std::string(e.what()) + (p->is_line ? "" : " (byte " + std::to_string(p->offset) + ")");
  return e.what();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Test-time training pipeline for ARC-style grid tasks", "arc-ttt"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file of option values; command-line flags win");
  Common common;
  app.add_option("--seed", common.seed, "run seed; every stage seed derives from it");
  app.add_option("--jobs", common.jobs, "tasks processed in parallel")->check(CLI::PositiveNumber);

  TTTDataOpts td;
  auto* ttt = app.add_subcommand("ttt-data", "build test-time training records and trainer manifests");
  ttt->add_option("tasks", td.tasks, "ARC task JSON file or directory")->required();
  ttt->add_option("-o,--out-dir", td.out_dir, "output directory")->required();
  ttt->add_option("--format", td.format)->check(CLI::IsMember({"icl", "e2e"}));
  ttt->add_option("--cap", td.cap, "maximum records per task");
  ttt->add_option("--loss", td.loss)->check(CLI::IsMember({"demos", "test_only"}));
  ttt->add_option("--permutations", td.permutations);
  ttt->add_flag("--no-transforms", td.no_transforms, "identity views only");
  ttt->add_flag("--no-color-shuffle", td.no_color_shuffle);
  ttt->add_option("--adapter", td.adapter)->check(CLI::IsMember({"per_task", "shared"}));
  ttt->add_flag("--quantized", td.quantized);
  ttt->add_option("--rank", td.manifest.rank);
  ttt->add_option("--alpha", td.manifest.alpha);
  ttt->add_option("--lr", td.manifest.lr);
  ttt->add_option("--epochs", td.manifest.epochs);
  ttt->add_option("--batch-size", td.manifest.batch_size);

  FTDataOpts fd;
  auto* ft = app.add_subcommand("ft-data", "sample fine-tuning records from example pools");
  ft->add_option("pools", fd.pools, "pool JSONL")->required();
  ft->add_option("-o,--out", fd.out, "output JSONL")->required();
  ft->add_option("-n", fd.cfg.n, "number of records");
  ft->add_option("--rate", fd.cfg.rate, "augmentation probability")->check(CLI::Range(0.0, 1.0));
  ft->add_option("--shard", fd.cfg.shard);
  ft->add_option("--shards", fd.cfg.shards)->check(CLI::PositiveNumber);

  InferOpts io;
  auto* inf = app.add_subcommand("infer", "augmented inference; writes per-task candidate dumps");
  inf->add_option("tasks", io.tasks, "ARC task JSON file or directory")->required();
  inf->add_option("-o,--out-dir", io.out_dir, "dump directory")->required();
  add_predictor_options(inf, io.predictor);

  VoteOpts vo;
  auto* vote = app.add_subcommand("vote", "select two attempts per test input from candidate dumps");
  vote->add_option("candidates", vo.candidates, "dump files or directories")->required();
  vote->add_option("-o,--out", vo.out, "attempts JSON (default stdout)");
  vote->add_option("--mode", vo.mode)->check(CLI::IsMember({"hierarchical", "flattened", "oracle"}));
  vote->add_option("--weighting", vo.weighting)->check(CLI::IsMember({"endorsement", "frequency"}));
  vote->add_option("--tasks", vo.tasks, "tasks with ground truth (oracle mode)");
  vote->add_option("--solutions", vo.solutions, "solutions JSON keyed by task id");

  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "pass@2 report, end to end or from dumps");
  ev->add_option("tasks", eo.tasks, "ARC task JSON file or directory with ground truth")->required();
  ev->add_option("--solutions", eo.solutions, "solutions JSON keyed by task id");
  ev->add_flag("--dev80", eo.dev80, "restrict to the 80-task development split");
  auto* cand_opt = ev->add_option("--candidates", eo.candidates, "score existing dumps instead of running inference");
  ev->add_option("--attempts", eo.attempts, "score an attempts JSON from vote")->excludes(cand_opt);
  ev->add_option("--report-format", eo.report_format)->check(CLI::IsMember({"json", "table"}));
  ev->add_option("-o,--out", eo.out, "report path (default stdout)");
  ev->add_option("--render-dir", eo.render_dir, "write one PNG per task");
  ev->add_option("--cell", eo.cell, "PNG cell size in pixels")->check(CLI::PositiveNumber);
  ev->add_option("--weighting", eo.weighting)->check(CLI::IsMember({"endorsement", "frequency"}));
  ev->add_option("--pairing", eo.pairing)->check(CLI::IsMember({"positional", "independent"}));
  add_predictor_options(ev, eo.predictor);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*ttt) return cmd_ttt_data(common, td, out);
    if (*ft) return cmd_ft_data(common, fd, out, err);
    if (*inf) return cmd_infer(common, io, out, err);
    if (*vote) return cmd_vote(vo, out);
    if (*ev) return cmd_eval(common, eo, out, err);
  } catch (const std::exception& e) {
    err << "error: " << describe_error(e) << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

}  // namespace ttt
