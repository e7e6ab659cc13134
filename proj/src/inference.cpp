#include "ttt/inference.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "ttt/rng.hpp"

namespace ttt {

using ojson = nlohmann::ordered_json;

std::vector<std::vector<std::size_t>> demo_permutations(const Task& task, std::size_t test_index,
                                                        std::size_t transform_index, const InferenceConfig& cfg) {
  std::vector<std::vector<std::size_t>> perms;
  if (cfg.permutations < 1) throw std::invalid_argument("need at least one permutation per transform");
  Rng rng(derive_seed(cfg.seed, task.id,
                      "infer-" + std::to_string(test_index) + "-" + std::to_string(transform_index)));
  std::vector<std::size_t> identity(task.train.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  perms.push_back(identity);
  for (int p = 1; p < cfg.permutations; ++p) perms.push_back(rng.permutation(task.train.size()));
  return perms;
}

PromptView transformed_view(const Task& task, const Transform& t, std::span<const std::size_t> perm,
                            std::size_t test_index) {
  if (!is_invertible(t)) throw NonInvertibleError(to_string(t) + " cannot be used for inference");
  if (test_index >= task.test.size()) throw std::out_of_range("test index out of range");
  std::vector<Example> demos;
  demos.reserve(perm.size());
  for (std::size_t i : perm) {
    const Example& ex = task.train.at(i);
    demos.push_back({apply_to_grid(t, ex.input), apply_to_grid(t, ex.output)});
  }
  return {std::move(demos), apply_to_grid(t, task.test[test_index].input)};
}

CandidateSet generate_candidates(const Task& task, std::size_t test_index, Predictor& predictor,
                                 const InferenceConfig& cfg) {
  struct View {
    std::size_t transform_index;
    int perm_index;
    PromptText prompt;
  };
  std::vector<View> views;
  for (std::size_t ti = 0; ti < cfg.transforms.size(); ++ti) {
    const Transform& t = cfg.transforms[ti];
    const auto perms = demo_permutations(task, test_index, ti, cfg);
    for (std::size_t p = 0; p < perms.size(); ++p) {
      PromptView v = transformed_view(task, t, perms[p], test_index);
      views.push_back({ti, static_cast<int>(p), render_prompt(v.demos, v.test_input)});
    }
  }

  std::vector<std::optional<Prediction>> results(views.size());
  std::exception_ptr error;
  std::mutex error_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < views.size(); i = next++) {
      try {
        results[i] = predictor.predict(views[i].prompt);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(views.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  CandidateSet out;
  out.task_id = task.id;
  out.test_index = test_index;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Transform& t = cfg.transforms[views[i].transform_index];
    Prediction& p = *results[i];
    if (p.ok()) {
      try {
        out.candidates.push_back({apply_to_grid(invert(t), *p.grid), t, views[i].perm_index, std::move(p.raw_text)});
        continue;
      } catch (const SizeError& e) {
        p.failure = std::string(kMalformedPrediction) + ": " + e.what();
      }
    }
    out.dropped.push_back({t, views[i].perm_index, p.failure.value_or("unknown"), std::move(p.raw_text)});
  }
  return out;
}

std::string candidates_to_jsonl(const CandidateSet& set) {
  struct Row {
    const Transform* t;
    int perm;
    const Grid* grid;
    const std::string* failure;
  };
  // Successes and failures interleave in canonical (transform, perm) order.
  std::vector<std::pair<std::pair<std::size_t, int>, Row>> rows;
  auto rank = [](const Transform& t) {
    const auto set = inference_transform_set();
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set[i] == t) return i;
    return set.size();
  };
  for (const auto& c : set.candidates) rows.push_back({{rank(c.transform), c.perm_index}, {&c.transform, c.perm_index, &c.grid, nullptr}});
  for (const auto& d : set.dropped) rows.push_back({{rank(d.transform), d.perm_index}, {&d.transform, d.perm_index, nullptr, &d.failure}});
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string out;
  for (const auto& [key, r] : rows) {
    ojson j;
    j["task_id"] = set.task_id;
    j["test_index"] = set.test_index;
    j["transform"] = to_string(*r.t);
    j["perm"] = r.perm;
    j["grid"] = r.grid ? ojson(r.grid->to_matrix()) : ojson(nullptr);
    j["failure"] = r.failure ? ojson(*r.failure) : ojson(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<CandidateSet> candidates_from_jsonl(std::string_view bytes) {
  std::vector<CandidateSet> sets;
  std::size_t pos = 0, line_no = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    const std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto fail = [&](const std::string& why) {
      return ParseError("candidates line " + std::to_string(line_no) + ": " + why, line_no, true);
    };
    try {
      const auto j = ojson::parse(line);
      const auto task_id = j.at("task_id").get<std::string>();
      const auto test_index = j.at("test_index").get<std::size_t>();
      const Transform t = parse_transform(j.at("transform").get<std::string>());
      const int perm = j.at("perm").get<int>();
      auto it = std::find_if(sets.begin(), sets.end(), [&](const CandidateSet& s) {
        return s.task_id == task_id && s.test_index == test_index;
      });
      if (it == sets.end()) {
        sets.push_back({task_id, test_index, {}, {}});
        it = std::prev(sets.end());
      }
      if (!j.at("grid").is_null()) {
        it->candidates.push_back({make_grid(j["grid"].get<std::vector<std::vector<int>>>()), t, perm, ""});
      } else {
        it->dropped.push_back({t, perm, j.at("failure").is_null() ? "" : j["failure"].get<std::string>(), ""});
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  return sets;
}

}  // namespace ttt
