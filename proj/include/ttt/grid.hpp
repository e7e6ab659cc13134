#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttt {

// Error hierarchy shared by every module. Callers that only care about
// "something in the pipeline failed" can catch ttt::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ColorError : Error {
  using Error::Error;
};
struct SizeError : Error {
  using Error::Error;
};
struct LookupError : Error {
  using Error::Error;
};

using Color = std::uint8_t;

inline constexpr int kNumColors = 10;
inline constexpr std::size_t kRawGridCap = 30;
// Upscaling augmentations can double a raw grid.
inline constexpr std::size_t kHardGridCap = 60;

/// Immutable row-major matrix of colors 0-9, 1..60 on each side.
class Grid {
 public:
  /// Validates dims, cap and palette. Throws ShapeError, SizeError, ColorError.
  Grid(std::size_t rows, std::size_t cols, std::vector<Color> cells);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t area() const noexcept { return cells_.size(); }

  Color at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
  std::span<const Color> row(std::size_t r) const {
    return {cells_.data() + r * cols_, cols_};
  }
  std::vector<Color> column(std::size_t c) const;
  const std::vector<Color>& cells() const noexcept { return cells_; }
  std::vector<std::vector<int>> to_matrix() const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Color> cells_;
};

/// Build a grid from nested integer rows.
/// Throws ShapeError (empty/ragged), ColorError (outside 0-9), SizeError (> 60).
Grid make_grid(const std::vector<std::vector<int>>& cells);

/// Exact match: identical dimensions and identical cells.
bool grids_equal(const Grid& a, const Grid& b) noexcept;

/// Total order used for every deterministic tie-break in the project
/// (lexicographic on the numpy-style text rendering).
bool grid_text_less(const Grid& a, const Grid& b);

struct Example {
  Grid input;
  Grid output;

  friend bool operator==(const Example&, const Example&) = default;
};

// Test outputs are absent for unsolved sets.
struct TestExample {
  Grid input;
  std::optional<Grid> output;

  friend bool operator==(const TestExample&, const TestExample&) = default;
};

struct Task {
  std::string id;
  std::vector<Example> train;
  std::vector<TestExample> test;

  std::size_t num_train() const noexcept { return train.size(); }
  std::size_t num_test() const noexcept { return test.size(); }
  bool has_test_outputs() const noexcept;

  friend bool operator==(const Task&, const Task&) = default;
};

/// Throws ShapeError unless K >= 1 and M >= 1.
void validate_task(const Task& task);

/// Soft checks (K outside 2..7, M outside 1..3). Empty when typical.
std::vector<std::string> task_warnings(const Task& task);

enum class Split { train, validation, dev80, other };

struct TaskSet {
  std::vector<Task> tasks;
  Split split = Split::other;

  /// Throws LookupError when absent.
  const Task& find(const std::string& id) const;
  bool contains(const std::string& id) const noexcept;
};

/// Throws ShapeError on duplicate task ids.
void validate_task_set(const TaskSet& set);

}  // namespace ttt
