#include "ttt/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace ttt {

using ojson = nlohmann::ordered_json;

namespace {

using H = Hardness;

constexpr std::array<Dev80Entry, 80> kDev80{{
    {"0a1d4ef5", H::easy},   {"692cd3b6", H::easy},   {"1da012fc", H::easy},   {"66e6c45b", H::easy},
    {"3194b014", H::easy},   {"963f59bc", H::easy},   {"d37a1ef5", H::easy},   {"358ba94e", H::easy},
    {"f3cdc58f", H::easy},   {"55059096", H::easy},   {"c7d4e6ad", H::easy},   {"4b6b68e5", H::easy},
    {"00576224", H::easy},   {"a04b2602", H::easy},   {"e9c9d9a1", H::easy},   {"ef26cbf6", H::easy},
    {"7ee1c6ea", H::easy},   {"e9ac8c9e", H::easy},   {"1a2e2828", H::easy},   {"770cc55f", H::easy},
    {"762cd429", H::medium}, {"e7639916", H::medium}, {"e1d2900e", H::medium}, {"aee291af", H::medium},
    {"e95e3d8e", H::medium}, {"e0fb7511", H::medium}, {"ae58858e", H::medium}, {"93c31fbe", H::medium},
    {"27a77e38", H::medium}, {"9bebae7a", H::medium}, {"9ddd00f0", H::medium}, {"fe9372f3", H::medium},
    {"69889d6e", H::medium}, {"15663ba9", H::medium}, {"17b80ad2", H::medium}, {"16b78196", H::medium},
    {"5b6cbef5", H::medium}, {"40f6cd08", H::medium}, {"505fff84", H::medium}, {"d017b73f", H::medium},
    {"e5c44e8f", H::hard},   {"604001fa", H::hard},   {"4364c1c4", H::hard},   {"506d28a5", H::hard},
    {"2037f2c7", H::hard},   {"d5c634a2", H::hard},   {"ac605cbb", H::hard},   {"27f8ce4f", H::hard},
    {"66f2d22f", H::hard},   {"3ed85e70", H::hard},   {"8b28cd80", H::hard},   {"d19f7514", H::hard},
    {"dc2aa30b", H::hard},   {"f5c89df1", H::hard},   {"50f325b5", H::hard},   {"08573cc6", H::hard},
    {"3d31c5b3", H::hard},   {"94133066", H::hard},   {"136b0064", H::hard},   {"90347967", H::hard},
    {"e99362f0", H::expert}, {"1acc24af", H::expert}, {"f9a67cb5", H::expert}, {"ad7e01d0", H::expert},
    {"ea9794b1", H::expert}, {"58e15b12", H::expert}, {"891232d6", H::expert}, {"5833af48", H::expert},
    {"4ff4c9da", H::expert}, {"5b692c0f", H::expert}, {"e2092e0c", H::expert}, {"47996f11", H::expert},
    {"34b99a2b", H::expert}, {"1c56ad9f", H::expert}, {"e6de6e8f", H::expert}, {"fea12743", H::expert},
    {"31d5ba1a", H::expert}, {"79fb03f4", H::expert}, {"8719f442", H::expert}, {"a8610ef7", H::expert},
}};

constexpr std::string_view kSinglePrefix = "single:";

}  // namespace

std::string_view to_string(Hardness h) {
  switch (h) {
    case H::easy: return "easy";
    case H::medium: return "medium";
    case H::hard: return "hard";
    case H::expert: return "expert";
    case H::unknown: return "unknown";
  }
  return "unknown";
}

std::span<const Dev80Entry> dev80_manifest() { return kDev80; }

Hardness hardness_of(std::string_view task_id) {
  for (const auto& e : kDev80)
    if (e.id == task_id) return e.level;
  return H::unknown;
}

TaskSet load_dev80(const TaskSet& validation) {
  TaskSet out;
  out.split = Split::dev80;
  for (const auto& e : kDev80) out.tasks.push_back(validation.find(std::string(e.id)));
  return out;
}

TaskScore score_task(std::span<const std::vector<Grid>> attempts, const Task& task, AttemptPairing pairing) {
  TaskScore s;
  s.task_id = task.id;
  s.level = hardness_of(task.id);
  const std::size_t m = task.test.size();
  for (const auto& t : task.test)
    if (!t.output) throw LookupError("task '" + task.id + "' has no ground truth for scoring");
  auto matches = [&](std::size_t i, std::size_t slot) {
    return i < attempts.size() && slot < attempts[i].size() && attempts[i][slot] == *task.test[i].output;
  };
  std::size_t solved = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const bool any = matches(i, 0) || matches(i, 1);
    s.per_test.push_back(any);
    solved += any;
  }
  s.partial = m ? static_cast<double>(solved) / static_cast<double>(m) : 0.0;
  if (pairing == AttemptPairing::independent) {
    s.strict = solved == m && m > 0;
  } else {
    for (std::size_t slot = 0; slot < 2 && !s.strict; ++slot) {
      bool all = m > 0;
      for (std::size_t i = 0; i < m && all; ++i) all = matches(i, slot);
      s.strict = all;
    }
  }
  return s;
}

std::vector<std::string> report_columns(std::span<const Transform> transforms) {
  std::vector<std::string> cols{"hierarchical", "flattened", "oracle"};
  for (const auto& t : transforms) cols.push_back(std::string(kSinglePrefix) + to_string(t));
  return cols;
}

std::vector<Grid> select_attempts(std::string_view mode, std::span<const Candidate> candidates,
                                  const std::optional<Grid>& truth, GlobalWeighting weighting) {
  if (mode == "hierarchical") return hierarchical_vote(candidates, weighting).attempts;
  if (mode == "flattened") return flattened_vote(candidates).attempts;
  if (mode == "oracle") {
    if (truth && oracle_select(candidates, *truth)) return {*truth};
    return {};
  }
  if (mode.starts_with(kSinglePrefix)) {
    const Transform t = parse_transform(mode.substr(kSinglePrefix.size()));
    std::vector<Candidate> group;
    for (const auto& c : candidates)
      if (c.transform == t) group.push_back(c);
    return flattened_vote(group).attempts;
  }
  throw std::invalid_argument("unknown selection mode '" + std::string(mode) + "'");
}

void summarize(EvalReport& report) {
  report.summary.clear();
  for (const auto& col : report.column_names) {
    ColumnSummary cs;
    std::map<Hardness, std::pair<double, std::size_t>> by_level;
    for (const auto& tr : report.tasks) {
      const TaskScore& s = tr.columns.at(col);
      cs.strict += s.strict;
      cs.partial += s.partial;
      if (tr.level != H::unknown) {
        by_level[tr.level].first += s.strict;
        ++by_level[tr.level].second;
      }
    }
    if (!report.tasks.empty()) {
      cs.strict /= static_cast<double>(report.tasks.size());
      cs.partial /= static_cast<double>(report.tasks.size());
    }
    for (const auto& [lvl, acc] : by_level) cs.strict_by_level[lvl] = acc.first / static_cast<double>(acc.second);
    report.summary.emplace(col, std::move(cs));
  }
}

EvalReport evaluate_candidates(const TaskSet& tasks, std::span<const CandidateSet> candidates,
                               const EvalConfig& cfg) {
  EvalReport report;
  report.fingerprint = cfg.fingerprint;
  report.column_names = report_columns(cfg.inference.transforms);
  for (const auto& task : tasks.tasks) {
    TaskResult tr;
    tr.task_id = task.id;
    tr.level = hardness_of(task.id);
    for (const auto& col : report.column_names) {
      std::vector<std::vector<Grid>> attempts(task.test.size());
      for (std::size_t m = 0; m < task.test.size(); ++m) {
        auto it = std::find_if(candidates.begin(), candidates.end(), [&](const CandidateSet& s) {
          return s.task_id == task.id && s.test_index == m;
        });
        if (it == candidates.end()) continue;
        attempts[m] = select_attempts(col, it->candidates, task.test[m].output, cfg.weighting);
      }
      tr.columns.emplace(col, score_task(attempts, task, cfg.pairing));
    }
    report.tasks.push_back(std::move(tr));
  }
  summarize(report);
  return report;
}

EvalReport evaluate(const TaskSet& tasks, Predictor& predictor, const EvalConfig& cfg,
                    std::vector<CandidateSet>* dumps) {
  std::vector<CandidateSet> all;
  std::map<std::string, std::string> errors;
  for (const auto& task : tasks.tasks) {
    std::vector<CandidateSet> sets;
    try {
      for (std::size_t m = 0; m < task.test.size(); ++m)
        sets.push_back(generate_candidates(task, m, predictor, cfg.inference));
    } catch (const PredictorUnavailable& e) {
      errors[task.id] = e.what();
      continue;
    }
    for (auto& s : sets) all.push_back(std::move(s));
  }
  EvalReport report = evaluate_candidates(tasks, all, cfg);
  for (auto& tr : report.tasks) {
    if (auto it = errors.find(tr.task_id); it != errors.end()) tr.error = it->second;
  }
  if (dumps) *dumps = std::move(all);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  ojson j;
  j["fingerprint"] = report.fingerprint;
  j["columns"] = report.column_names;
  ojson summary = ojson::object();
  for (const auto& col : report.column_names) {
    const auto& cs = report.summary.at(col);
    ojson by_level = ojson::object();
    for (const auto& [lvl, v] : cs.strict_by_level) by_level[std::string(to_string(lvl))] = v;
    summary[col] = {{"strict", cs.strict}, {"partial", cs.partial}, {"strict_by_level", by_level}};
  }
  j["summary"] = std::move(summary);
  j["tasks"] = ojson::array();
  for (const auto& tr : report.tasks) {
    ojson tj;
    tj["task_id"] = tr.task_id;
    tj["level"] = std::string(to_string(tr.level));
    tj["error"] = tr.error ? ojson(*tr.error) : ojson(nullptr);
    ojson cols = ojson::object();
    for (const auto& col : report.column_names) {
      const auto& s = tr.columns.at(col);
      cols[col] = {{"strict", s.strict}, {"partial", s.partial}, {"per_test", s.per_test}};
    }
    tj["columns"] = std::move(cols);
    j["tasks"].push_back(std::move(tj));
  }
  return j.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-34s %8s %8s %7s %7s %7s %7s\n", "selection", "strict", "partial", "easy",
                "medium", "hard", "expert");
  os << buf;
  for (const auto& col : report.column_names) {
    const auto& cs = report.summary.at(col);
    auto level = [&](H h) -> std::string {
      auto it = cs.strict_by_level.find(h);
      if (it == cs.strict_by_level.end()) return "-";
      char b[16];
      std::snprintf(b, sizeof b, "%.1f", 100.0 * it->second);
      return b;
    };
    std::snprintf(buf, sizeof buf, "%-34s %7.2f%% %7.2f%% %7s %7s %7s %7s\n", col.c_str(), 100.0 * cs.strict,
                  100.0 * cs.partial, level(H::easy).c_str(), level(H::medium).c_str(), level(H::hard).c_str(),
                  level(H::expert).c_str());
    os << buf;
  }
  os << "tasks: " << report.tasks.size();
  const auto failed = std::count_if(report.tasks.begin(), report.tasks.end(), [](const TaskResult& t) { return t.error.has_value(); });
  if (failed) os << " (" << failed << " failed)";
  os << "  fingerprint: " << report.fingerprint << "\n";
  return os.str();
}

std::string render_grid_ascii(const Grid& g) {
  static constexpr std::string_view kGlyphs = ".123456789";
  std::string out;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    if (r) out += '\n';
    for (std::size_t c = 0; c < g.cols(); ++c) out += kGlyphs[g.at(r, c)];
  }
  return out;
}

}  // namespace ttt
