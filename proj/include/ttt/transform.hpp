#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ttt/grid.hpp"

namespace ttt {

struct NonInvertibleError : Error {
  using Error::Error;
};

class Transform;

// Axis conventions follow numpy: axis 0 runs over rows, axis 1 over columns.
// Flip(0) reverses row order, Flip(1) reverses column order.

struct Identity {
  friend bool operator==(const Identity&, const Identity&) = default;
};
/// Clockwise quarter turns, 1..3. Rotate{1} sends (r, c) of an R x C grid to
/// (c, R-1-r) of the C x R result.
struct Rotate {
  int quarter_turns;
  friend bool operator==(const Rotate&, const Rotate&) = default;
};
struct Flip {
  int axis;
  friend bool operator==(const Flip&, const Flip&) = default;
};
struct Transpose {
  friend bool operator==(const Transpose&, const Transpose&) = default;
};
/// Flipped copy concatenated along `axis`, before the original when `reverse`.
struct Reflect {
  int axis;
  bool reverse;
  friend bool operator==(const Reflect&, const Reflect&) = default;
};
/// Cyclic shift: dx columns right, dy rows down (negative values wrap the
/// other way). Materialized with |dx|, |dy| <= 4.
struct Translate {
  int dx;
  int dy;
  friend bool operator==(const Translate&, const Translate&) = default;
};
struct IncreaseResolution {
  int factor = 2;
  friend bool operator==(const IncreaseResolution&, const IncreaseResolution&) = default;
};
struct IncreaseHeight {
  int factor = 2;
  friend bool operator==(const IncreaseHeight&, const IncreaseHeight&) = default;
};
struct IncreaseWidth {
  int factor = 2;
  friend bool operator==(const IncreaseWidth&, const IncreaseWidth&) = default;
};
/// Tiles the grid n times along `axis`.
struct Repeat {
  int axis;
  int n;
  friend bool operator==(const Repeat&, const Repeat&) = default;
};

enum class DropoutTarget { input, output };

/// Zeroes 1-3 rectangles, each about 5-20% of the grid area. Patch geometry
/// is a pure function of (seed, grid dimensions).
struct DropoutPatches {
  DropoutTarget target;
  std::uint64_t seed;
  friend bool operator==(const DropoutPatches&, const DropoutPatches&) = default;
};

/// map[c] is the new color of c. map[0] == 0 for permutations built here.
struct ColorPermutation {
  std::array<Color, kNumColors> map;
  friend bool operator==(const ColorPermutation&, const ColorPermutation&) = default;
};

struct Chain {
  std::vector<Transform> steps;  // applied front to back
  friend bool operator==(const Chain&, const Chain&);
};

/// Deterministic grid/task transformation. Every random parameter is
/// resolved when the value is built, so a Transform replays exactly from its
/// canonical name (see to_string / parse_transform).
class Transform {
 public:
  using Variant = std::variant<Identity, Rotate, Flip, Transpose, Reflect, Translate,
                               IncreaseResolution, IncreaseHeight, IncreaseWidth, Repeat,
                               DropoutPatches, ColorPermutation, Chain>;

  Transform() : v_(Identity{}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T&&> && (!std::is_same_v<std::decay_t<T>, Transform>)
  Transform(T&& t) : v_(std::forward<T>(t)) {}

  const Variant& variant() const noexcept { return v_; }
  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(v_);
  }

  friend bool operator==(const Transform&, const Transform&) = default;

 private:
  Variant v_;
};

inline bool operator==(const Chain& a, const Chain& b) { return a.steps == b.steps; }

enum class ApplicationMode { both, input_only, output_only };

std::string_view to_string(ApplicationMode m);

/// Throws SizeError when the result would exceed the 60 x 60 cap.
Grid apply_to_grid(const Transform& t, const Grid& g);

bool is_invertible(const Transform& t) noexcept;

/// Exact inverse. Throws NonInvertibleError for Reflect, Increase*, Repeat,
/// DropoutPatches and chains containing them.
Transform invert(const Transform& t);

/// Transforms train and test grids on the side(s) selected by `mode`;
/// absent test outputs stay absent. SizeError propagates.
Task apply_to_task(const Transform& t, const Task& task, ApplicationMode mode = ApplicationMode::both);

/// Identity, Rotate(90), Rotate(180), Flip(0), Flip(1), Transpose().
std::vector<Transform> inference_transform_set();

/// The 20 TTT augmentations in catalogue order. `seed` materializes the
/// random translation.
std::vector<Transform> ttt_augmentation_set(std::uint64_t seed = 0);

/// ttt_augmentation_set plus Repeat(axis, n in {2,3}) and input/output dropout.
std::vector<Transform> ft_augmentation_set(std::uint64_t seed = 0);

/// Shuffle of colors 1-9; 0 (background) stays fixed.
ColorPermutation permute_colors(std::uint64_t seed);

/// Reorders train examples; test examples are untouched.
Task permute_examples(const Task& task, std::uint64_t seed);

Translate random_translate(std::uint64_t seed, int max_shift = 4);

/// Rectangles (row, col, height, width) zeroed by a dropout on an R x C grid.
struct Patch {
  std::size_t row, col, height, width;
  friend bool operator==(const Patch&, const Patch&) = default;
};
std::vector<Patch> dropout_patches(const DropoutPatches& d, std::size_t rows, std::size_t cols);

/// Canonical names, e.g. "Rotate(90)", "Reflect(0, reverse=True)",
/// "Chain([Flip(0),IncreaseResolution(2)])".
std::string to_string(const Transform& t);

/// Inverse of to_string. Throws std::invalid_argument.
Transform parse_transform(std::string_view name);

}  // namespace ttt
