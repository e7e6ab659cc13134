#include "ttt/grid.hpp"

#include <algorithm>
#include <unordered_set>

#include "ttt/codec.hpp"

namespace ttt {

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<Color> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  if (rows_ == 0 || cols_ == 0) throw ShapeError("grid must have at least one row and one column");
  if (cells_.size() != rows_ * cols_) throw ShapeError("cell count does not match grid dimensions");
  if (rows_ > kHardGridCap || cols_ > kHardGridCap) {
    throw SizeError("grid " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                    " exceeds the " + std::to_string(kHardGridCap) + " cap");
  }
  for (Color c : cells_) {
    if (c >= kNumColors) throw ColorError("color " + std::to_string(int{c}) + " outside 0-9");
  }
}

std::vector<Color> Grid::column(std::size_t c) const {
  std::vector<Color> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
  return out;
}

std::vector<std::vector<int>> Grid::to_matrix() const {
  std::vector<std::vector<int>> m(rows_, std::vector<int>(cols_));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m[r][c] = at(r, c);
  return m;
}

Grid make_grid(const std::vector<std::vector<int>>& cells) {
  if (cells.empty() || cells.front().empty()) throw ShapeError("grid must be a non-empty matrix");
  const std::size_t cols = cells.front().size();
  std::vector<Color> flat;
  flat.reserve(cells.size() * cols);
  for (const auto& row : cells) {
    if (row.size() != cols) throw ShapeError("ragged grid rows");
    for (int v : row) {
      if (v < 0 || v >= kNumColors) throw ColorError("color " + std::to_string(v) + " outside 0-9");
      flat.push_back(static_cast<Color>(v));
    }
  }
  return Grid(cells.size(), cols, std::move(flat));
}

bool grids_equal(const Grid& a, const Grid& b) noexcept { return a == b; }

bool grid_text_less(const Grid& a, const Grid& b) {
  return render_grid_text(a) < render_grid_text(b);
}

bool Task::has_test_outputs() const noexcept {
  return !test.empty() &&
         std::all_of(test.begin(), test.end(), [](const TestExample& e) { return e.output.has_value(); });
}

void validate_task(const Task& task) {
  if (task.train.empty()) throw ShapeError("task '" + task.id + "' has no train examples");
  if (task.test.empty()) throw ShapeError("task '" + task.id + "' has no test examples");
}

std::vector<std::string> task_warnings(const Task& task) {
  std::vector<std::string> out;
  if (task.train.size() < 2 || task.train.size() > 7)
    out.push_back("task '" + task.id + "': " + std::to_string(task.train.size()) +
                  " train examples (typical range 2-7)");
  if (task.test.size() > 3)
    out.push_back("task '" + task.id + "': " + std::to_string(task.test.size()) +
                  " test examples (typical range 1-3)");
  return out;
}

const Task& TaskSet::find(const std::string& id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const Task& t) { return t.id == id; });
  if (it == tasks.end()) throw LookupError("unknown task id '" + id + "'");
  return *it;
}

bool TaskSet::contains(const std::string& id) const noexcept {
  return std::any_of(tasks.begin(), tasks.end(), [&](const Task& t) { return t.id == id; });
}

void validate_task_set(const TaskSet& set) {
  std::unordered_set<std::string> seen;
  for (const auto& t : set.tasks) {
    if (!seen.insert(t.id).second) throw ShapeError("duplicate task id '" + t.id + "'");
  }
}

}  // namespace ttt
