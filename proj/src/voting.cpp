#include "ttt/voting.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "ttt/codec.hpp"

namespace ttt {

namespace {

using Shape = std::pair<std::size_t, std::size_t>;

std::vector<const Grid*> modal_shape_members(std::span<const Grid> grids) {
  std::map<Shape, std::size_t> shapes;
  for (const auto& g : grids) ++shapes[{g.rows(), g.cols()}];
  // std::map iterates smaller shapes first, so strict '>' keeps the smaller on ties.
  Shape best{};
  std::size_t best_count = 0;
  for (const auto& [shape, n] : shapes) {
    if (n > best_count) {
      best = shape;
      best_count = n;
    }
  }
  std::vector<const Grid*> out;
  for (const auto& g : grids)
    if (g.rows() == best.first && g.cols() == best.second) out.push_back(&g);
  return out;
}

template <typename Line>
std::vector<Color> majority_line(std::span<const Grid* const> members, Line line) {
  std::map<std::vector<Color>, std::size_t> tally;
  for (const Grid* g : members) ++tally[line(*g)];
  auto best = tally.begin();
  for (auto it = tally.begin(); it != tally.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

struct Ranked {
  std::string key;
  const Grid* grid;
  std::size_t weight;
  bool identity;
};

void rank(std::vector<Ranked>& entries, std::vector<std::string>& tie_breaks) {
  std::sort(entries.begin(), entries.end(), [](const Ranked& a, const Ranked& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.identity != b.identity) return a.identity;
    return a.key < b.key;
  });
  for (std::size_t i = 0; i + 1 < entries.size() && i < 2; ++i) {
    const auto& a = entries[i];
    const auto& b = entries[i + 1];
    if (a.weight != b.weight) continue;
    tie_breaks.push_back(std::string(a.identity != b.identity ? "identity_priority" : "lexicographic") +
                         " at rank " + std::to_string(i + 1) + " (weight " + std::to_string(a.weight) + ")");
  }
}

VoteOutcome top_two(std::vector<Ranked>& entries, VoteAudit audit) {
  rank(entries, audit.tie_breaks);
  VoteOutcome out;
  for (const auto& e : entries) {
    audit.final_tally.emplace_back(e.key, e.weight);
    if (out.attempts.size() < 2) out.attempts.push_back(*e.grid);
  }
  out.audit = std::move(audit);
  return out;
}

}  // namespace

Grid row_majority(std::span<const Grid> grids) {
  if (grids.empty()) throw std::invalid_argument("row_majority needs at least one grid");
  const auto members = modal_shape_members(grids);
  const std::size_t rows = members.front()->rows(), cols = members.front()->cols();
  std::vector<Color> cells;
  cells.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = majority_line(members, [r](const Grid& g) {
      const auto s = g.row(r);
      return std::vector<Color>(s.begin(), s.end());
    });
    cells.insert(cells.end(), row.begin(), row.end());
  }
  return Grid(rows, cols, std::move(cells));
}

Grid col_majority(std::span<const Grid> grids) {
  if (grids.empty()) throw std::invalid_argument("col_majority needs at least one grid");
  const auto members = modal_shape_members(grids);
  const std::size_t rows = members.front()->rows(), cols = members.front()->cols();
  std::vector<Color> cells(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto col = majority_line(members, [c](const Grid& g) { return g.column(c); });
    for (std::size_t r = 0; r < rows; ++r) cells[r * cols + c] = col[r];
  }
  return Grid(rows, cols, std::move(cells));
}

GroupSelection select_in_group(const Transform& t, std::span<const Grid> grids) {
  GroupSelection sel;
  sel.transform = t;
  if (grids.empty()) return sel;

  std::map<std::string, std::pair<const Grid*, std::size_t>> tally;
  for (const auto& g : grids) {
    auto [it, inserted] = tally.try_emplace(render_grid_text(g), &g, 0);
    ++it->second.second;
  }
  std::vector<std::pair<std::string, std::pair<const Grid*, std::size_t>>> ranked(tally.begin(), tally.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second.second > b.second.second; });
  for (const auto& [key, entry] : ranked) {
    sel.tally.emplace_back(key, entry.second);
    if (sel.grids.size() < 3) {
      sel.grids.push_back(*entry.first);
      sel.counts.push_back(entry.second);
    }
  }
  if (sel.grids.size() < 3) {
    for (Grid extra : {row_majority(grids), col_majority(grids)}) {
      if (sel.grids.size() >= 3) break;
      if (std::find(sel.grids.begin(), sel.grids.end(), extra) != sel.grids.end()) continue;
      sel.supplements.push_back(extra);
      sel.grids.push_back(std::move(extra));
      sel.counts.push_back(0);
    }
  }
  return sel;
}

std::vector<Grid> intra_transform_vote(std::span<const Candidate> group) {
  if (group.empty()) return {};
  std::vector<Grid> grids;
  for (const auto& c : group) {
    if (!(c.transform == group.front().transform))
      throw std::invalid_argument("intra_transform_vote: mixed transforms in one group");
    grids.push_back(c.grid);
  }
  return select_in_group(group.front().transform, grids).grids;
}

VoteOutcome global_vote(std::span<const GroupSelection> selections, GlobalWeighting weighting) {
  std::map<std::string, Ranked> tally;
  for (const auto& sel : selections) {
    const bool identity = sel.transform.is<Identity>();
    for (std::size_t i = 0; i < sel.grids.size(); ++i) {
      const std::string key = render_grid_text(sel.grids[i]);
      auto [it, inserted] = tally.try_emplace(key, Ranked{key, &sel.grids[i], 0, false});
      it->second.weight += weighting == GlobalWeighting::endorsement ? 1 : sel.counts[i];
      it->second.identity = it->second.identity || identity;
    }
  }
  std::vector<Ranked> entries;
  for (auto& [key, e] : tally) entries.push_back(e);
  VoteAudit audit;
  audit.groups.assign(selections.begin(), selections.end());
  return top_two(entries, std::move(audit));
}

VoteOutcome hierarchical_vote(std::span<const Candidate> candidates, GlobalWeighting weighting) {
  std::vector<std::pair<Transform, std::vector<Grid>>> groups;
  for (const auto& c : candidates) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == c.transform; });
    if (it == groups.end()) {
      groups.emplace_back(c.transform, std::vector<Grid>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(c.grid);
  }
  // Canonical group order keeps the audit independent of arrival order.
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return to_string(a.first) < to_string(b.first); });
  std::vector<GroupSelection> selections;
  for (const auto& [t, grids] : groups) selections.push_back(select_in_group(t, grids));
  return global_vote(selections, weighting);
}

VoteOutcome flattened_vote(std::span<const Candidate> candidates) {
  std::map<std::string, Ranked> tally;
  for (const auto& c : candidates) {
    const std::string key = render_grid_text(c.grid);
    auto [it, inserted] = tally.try_emplace(key, Ranked{key, &c.grid, 0, false});
    ++it->second.weight;
    it->second.identity = it->second.identity || c.transform.is<Identity>();
  }
  std::vector<Ranked> entries;
  for (auto& [key, e] : tally) entries.push_back(e);
  return top_two(entries, {});
}

bool oracle_select(std::span<const Candidate> candidates, const Grid& truth) {
  return std::any_of(candidates.begin(), candidates.end(), [&](const Candidate& c) { return c.grid == truth; });
}

std::string vote_audit_to_json(const VoteAudit& audit) {
  nlohmann::ordered_json j;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : audit.groups) {
    nlohmann::ordered_json gj;
    gj["transform"] = to_string(g.transform);
    gj["tally"] = nlohmann::ordered_json::array();
    for (const auto& [key, n] : g.tally) gj["tally"].push_back({{"grid", key}, {"count", n}});
    gj["selected"] = nlohmann::ordered_json::array();
    for (const auto& s : g.grids) gj["selected"].push_back(render_grid_text(s));
    gj["supplements"] = nlohmann::ordered_json::array();
    for (const auto& s : g.supplements) gj["supplements"].push_back(render_grid_text(s));
    j["groups"].push_back(std::move(gj));
  }
  j["final_tally"] = nlohmann::ordered_json::array();
  for (const auto& [key, n] : audit.final_tally) j["final_tally"].push_back({{"grid", key}, {"weight", n}});
  j["tie_breaks"] = audit.tie_breaks;
  return j.dump();
}

}  // namespace ttt
