#include "ttt/transform.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "ttt/rng.hpp"

namespace ttt {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows > kHardGridCap || cols > kHardGridCap) {
    throw SizeError("transformed grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " exceeds the " + std::to_string(kHardGridCap) + " cap");
  }
}

// Builds an R x C grid where out(r, c) = g(src(r, c)).
template <typename F>
Grid remap(const Grid& g, std::size_t rows, std::size_t cols, F src) {
  check_dims(rows, cols);
  std::vector<Color> cells(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto [sr, sc] = src(r, c);
      cells[r * cols + c] = g.at(sr, sc);
    }
  }
  return Grid(rows, cols, std::move(cells));
}

using Cell = std::pair<std::size_t, std::size_t>;

Grid rotate(const Grid& g, int q) {
  const std::size_t R = g.rows(), C = g.cols();
  switch (((q % 4) + 4) % 4) {
    case 0: return g;
    case 1: return remap(g, C, R, [&](std::size_t r, std::size_t c) { return Cell{R - 1 - c, r}; });
    case 2:
      return remap(g, R, C, [&](std::size_t r, std::size_t c) { return Cell{R - 1 - r, C - 1 - c}; });
    default: return remap(g, C, R, [&](std::size_t r, std::size_t c) { return Cell{c, C - 1 - r}; });
  }
}

Grid flip(const Grid& g, int axis) {
  const std::size_t R = g.rows(), C = g.cols();
  if (axis == 0) return remap(g, R, C, [&](std::size_t r, std::size_t c) { return Cell{R - 1 - r, c}; });
  return remap(g, R, C, [&](std::size_t r, std::size_t c) { return Cell{r, C - 1 - c}; });
}

Grid reflect(const Grid& g, int axis, bool reverse) {
  const std::size_t R = g.rows(), C = g.cols();
  if (axis == 0) {
    return remap(g, 2 * R, C, [&](std::size_t r, std::size_t c) {
      const bool first = r < R;
      const std::size_t rr = first ? r : r - R;
      // The flipped half sits first when reverse is set.
      const bool flipped = first == reverse;
      return Cell{flipped ? R - 1 - rr : rr, c};
    });
  }
  return remap(g, R, 2 * C, [&](std::size_t r, std::size_t c) {
    const bool first = c < C;
    const std::size_t cc = first ? c : c - C;
    const bool flipped = first == reverse;
    return Cell{r, flipped ? C - 1 - cc : cc};
  });
}

std::size_t wrap(long long v, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

Grid dropout(const Grid& g, const DropoutPatches& d) {
  std::vector<Color> cells = g.cells();
  for (const Patch& p : dropout_patches(d, g.rows(), g.cols())) {
    for (std::size_t r = p.row; r < p.row + p.height; ++r)
      for (std::size_t c = p.col; c < p.col + p.width; ++c) cells[r * g.cols() + c] = 0;
  }
  return Grid(g.rows(), g.cols(), std::move(cells));
}

}  // namespace

std::string_view to_string(ApplicationMode m) {
  switch (m) {
    case ApplicationMode::both: return "both";
    case ApplicationMode::input_only: return "input_only";
    case ApplicationMode::output_only: return "output_only";
  }
  return "?";
}

std::vector<Patch> dropout_patches(const DropoutPatches& d, std::size_t rows, std::size_t cols) {
  Rng rng(derive_seed(d.seed, rows * 1000 + cols));
  const std::size_t area = rows * cols;
  const int count = static_cast<int>(rng.between(1, 3));
  std::vector<Patch> out;
  for (int i = 0; i < count; ++i) {
    const double fraction = 0.05 + 0.15 * rng.unit();
    const auto target = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * area)));
    const auto h = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(std::min(rows, target))));
    const std::size_t w = std::clamp<std::size_t>((target + h - 1) / h, 1, cols);
    const auto r = static_cast<std::size_t>(rng.below(rows - h + 1));
    const auto c = static_cast<std::size_t>(rng.below(cols - w + 1));
    out.push_back({r, c, h, w});
  }
  return out;
}

Grid apply_to_grid(const Transform& t, const Grid& g) {
  const std::size_t R = g.rows(), C = g.cols();
  return std::visit(
      overloaded{
          [&](const Identity&) { return g; },
          [&](const Rotate& x) { return rotate(g, x.quarter_turns); },
          [&](const Flip& x) { return flip(g, x.axis); },
          [&](const Transpose&) {
            return remap(g, C, R, [](std::size_t r, std::size_t c) { return Cell{c, r}; });
          },
          [&](const Reflect& x) { return reflect(g, x.axis, x.reverse); },
          [&](const Translate& x) {
            return remap(g, R, C, [&](std::size_t r, std::size_t c) {
              return Cell{wrap(static_cast<long long>(r) - x.dy, R), wrap(static_cast<long long>(c) - x.dx, C)};
            });
          },
          [&](const IncreaseResolution& x) {
            const auto k = static_cast<std::size_t>(x.factor);
            return remap(g, R * k, C * k, [&](std::size_t r, std::size_t c) { return Cell{r / k, c / k}; });
          },
          [&](const IncreaseHeight& x) {
            const auto k = static_cast<std::size_t>(x.factor);
            return remap(g, R * k, C, [&](std::size_t r, std::size_t c) { return Cell{r / k, c}; });
          },
          [&](const IncreaseWidth& x) {
            const auto k = static_cast<std::size_t>(x.factor);
            return remap(g, R, C * k, [&](std::size_t r, std::size_t c) { return Cell{r, c / k}; });
          },
          [&](const Repeat& x) {
            const auto n = static_cast<std::size_t>(x.n);
            if (x.axis == 0) return remap(g, R * n, C, [&](std::size_t r, std::size_t c) { return Cell{r % R, c}; });
            return remap(g, R, C * n, [&](std::size_t r, std::size_t c) { return Cell{r, c % C}; });
          },
          [&](const DropoutPatches& x) { return dropout(g, x); },
          [&](const ColorPermutation& x) {
            std::vector<Color> cells = g.cells();
            for (Color& c : cells) c = x.map[c];
            return Grid(R, C, std::move(cells));
          },
          [&](const Chain& x) {
            Grid cur = g;
            for (const auto& step : x.steps) cur = apply_to_grid(step, cur);
            return cur;
          },
      },
      t.variant());
}

bool is_invertible(const Transform& t) noexcept {
  return std::visit(overloaded{
                        [](const Identity&) { return true; },
                        [](const Rotate&) { return true; },
                        [](const Flip&) { return true; },
                        [](const Transpose&) { return true; },
                        [](const Translate&) { return true; },
                        [](const ColorPermutation&) { return true; },
                        [](const Chain& c) {
                          return std::all_of(c.steps.begin(), c.steps.end(),
                                             [](const Transform& s) { return is_invertible(s); });
                        },
                        [](const auto&) { return false; },
                    },
                    t.variant());
}

Transform invert(const Transform& t) {
  return std::visit(
      overloaded{
          [](const Identity& x) -> Transform { return x; },
          [](const Rotate& x) -> Transform { return Rotate{(4 - x.quarter_turns % 4) % 4}; },
          [](const Flip& x) -> Transform { return x; },
          [](const Transpose& x) -> Transform { return x; },
          [](const Translate& x) -> Transform { return Translate{-x.dx, -x.dy}; },
          [](const ColorPermutation& x) -> Transform {
            ColorPermutation inv{};
            for (int c = 0; c < kNumColors; ++c) inv.map[x.map[c]] = static_cast<Color>(c);
            return inv;
          },
          [](const Chain& x) -> Transform {
            Chain out;
            for (auto it = x.steps.rbegin(); it != x.steps.rend(); ++it) out.steps.push_back(invert(*it));
            return out;
          },
          [&](const auto&) -> Transform {
            throw NonInvertibleError(to_string(t) + " has no inverse");
          },
      },
      t.variant());
}

Task apply_to_task(const Transform& t, const Task& task, ApplicationMode mode) {
  const bool in = mode != ApplicationMode::output_only;
  const bool out = mode != ApplicationMode::input_only;
  Task res;
  res.id = task.id;
  res.train.reserve(task.train.size());
  for (const auto& ex : task.train) {
    res.train.push_back({in ? apply_to_grid(t, ex.input) : ex.input,
                         out ? apply_to_grid(t, ex.output) : ex.output});
  }
  for (const auto& ex : task.test) {
    TestExample te{in ? apply_to_grid(t, ex.input) : ex.input, ex.output};
    if (out && ex.output) te.output = apply_to_grid(t, *ex.output);
    res.test.push_back(std::move(te));
  }
  return res;
}

std::vector<Transform> inference_transform_set() {
  return {Identity{}, Rotate{1}, Rotate{2}, Flip{0}, Flip{1}, Transpose{}};
}

Translate random_translate(std::uint64_t seed, int max_shift) {
  Rng rng(seed);
  for (;;) {
    const int dx = static_cast<int>(rng.between(-max_shift, max_shift));
    const int dy = static_cast<int>(rng.between(-max_shift, max_shift));
    if (dx != 0 || dy != 0) return {dx, dy};
  }
}

std::vector<Transform> ttt_augmentation_set(std::uint64_t seed) {
  auto upscaled = [](Transform base) { return Chain{{std::move(base), IncreaseResolution{2}}}; };
  return {
      Rotate{1},
      Rotate{3},
      Rotate{2},
      Flip{0},
      Flip{1},
      Reflect{0, true},
      Reflect{1, true},
      Reflect{0, false},
      Reflect{1, false},
      random_translate(derive_seed(seed, "", "translate")),
      Transpose{},
      IncreaseResolution{2},
      IncreaseHeight{2},
      IncreaseWidth{2},
      upscaled(Rotate{1}),
      upscaled(Rotate{3}),
      upscaled(Rotate{2}),
      upscaled(Flip{0}),
      upscaled(Flip{1}),
      upscaled(Transpose{}),
  };
}

std::vector<Transform> ft_augmentation_set(std::uint64_t seed) {
  std::vector<Transform> out = ttt_augmentation_set(seed);
  for (int axis : {0, 1})
    for (int n : {2, 3}) out.push_back(Repeat{axis, n});
  out.push_back(DropoutPatches{DropoutTarget::input, derive_seed(seed, "", "dropout-input")});
  out.push_back(DropoutPatches{DropoutTarget::output, derive_seed(seed, "", "dropout-output")});
  return out;
}

ColorPermutation permute_colors(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Color> colors{1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(colors);
  ColorPermutation p{};
  p.map[0] = 0;
  for (int c = 1; c < kNumColors; ++c) p.map[c] = colors[c - 1];
  return p;
}

Task permute_examples(const Task& task, std::uint64_t seed) {
  Rng rng(seed);
  Task out = task;
  out.train.clear();
  for (std::size_t i : rng.permutation(task.train.size())) out.train.push_back(task.train[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

std::string to_string(const Transform& t) {
  return std::visit(
      overloaded{
          [](const Identity&) -> std::string { return "Identity()"; },
          [](const Rotate& x) { return "Rotate(" + std::to_string(90 * x.quarter_turns) + ")"; },
          [](const Flip& x) { return "Flip(" + std::to_string(x.axis) + ")"; },
          [](const Transpose&) -> std::string { return "Transpose()"; },
          [](const Reflect& x) {
            return "Reflect(" + std::to_string(x.axis) + ", reverse=" + (x.reverse ? "True" : "False") + ")";
          },
          [](const Translate& x) {
            return "RandomTranslateXY(dx=" + std::to_string(x.dx) + ", dy=" + std::to_string(x.dy) + ")";
          },
          [](const IncreaseResolution& x) { return "IncreaseResolution(" + std::to_string(x.factor) + ")"; },
          [](const IncreaseHeight& x) { return "IncreaseHeight(" + std::to_string(x.factor) + ")"; },
          [](const IncreaseWidth& x) { return "IncreaseWidth(" + std::to_string(x.factor) + ")"; },
          [](const Repeat& x) { return "Repeat(" + std::to_string(x.axis) + ", " + std::to_string(x.n) + ")"; },
          [](const DropoutPatches& x) {
            return std::string(x.target == DropoutTarget::input ? "DropoutInput" : "DropoutOutput") +
                   "(seed=" + std::to_string(x.seed) + ")";
          },
          [](const ColorPermutation& x) {
            std::string s = "ColorPermutation([";
            for (int c = 0; c < kNumColors; ++c) {
              if (c) s += ',';
              s += static_cast<char>('0' + x.map[c]);
            }
            return s + "])";
          },
          [](const Chain& x) {
            std::string s = "Chain([";
            for (std::size_t i = 0; i < x.steps.size(); ++i) {
              if (i) s += ',';
              s += to_string(x.steps[i]);
            }
            return s + "])";
          },
      },
      t.variant());
}

namespace {

class NameParser {
 public:
  explicit NameParser(std::string_view s) : s_(s) {}

  Transform parse_all() {
    Transform t = parse_one();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("bad transform name '" + std::string(s_) + "': " + why);
  }
  void skip_ws() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  bool eat(char ch) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ch) {
      ++pos_;
      return true;
    }
    return false;
  }
  void need(char ch) {
    if (!eat(ch)) fail(std::string("expected '") + ch + "'");
  }
  std::string ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }
  long long integer() {
    skip_ws();
    bool neg = eat('-');
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + (s_[pos_++] - '0');
      if (v > (1ll << 62)) fail("integer too large");
    }
    if (start == pos_) fail("expected integer");
    return neg ? -v : v;
  }
  std::uint64_t unsigned_integer() {
    skip_ws();
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<std::uint64_t>(s_[pos_++] - '0');
    }
    if (start == pos_) fail("expected integer");
    return v;
  }
  void keyword(std::string_view kw) {
    skip_ws();
    if (s_.substr(pos_, kw.size()) != kw) fail("expected '" + std::string(kw) + "'");
    pos_ += kw.size();
  }
  int axis() {
    const long long a = integer();
    if (a != 0 && a != 1) fail("axis must be 0 or 1");
    return static_cast<int>(a);
  }

  Transform parse_one() {
    const std::string name = ident();
    need('(');
    Transform t;
    if (name == "Identity") {
      t = Identity{};
    } else if (name == "Rotate") {
      const long long deg = integer();
      if (deg != 90 && deg != 180 && deg != 270) fail("rotation must be 90, 180 or 270");
      t = Rotate{static_cast<int>(deg / 90)};
    } else if (name == "Flip") {
      t = Flip{axis()};
    } else if (name == "Transpose") {
      t = Transpose{};
    } else if (name == "Reflect") {
      const int a = axis();
      need(',');
      keyword("reverse=");
      skip_ws();
      bool rev;
      if (s_.substr(pos_, 4) == "True") {
        rev = true;
        pos_ += 4;
      } else if (s_.substr(pos_, 5) == "False") {
        rev = false;
        pos_ += 5;
      } else {
        fail("reverse must be True or False");
      }
      t = Reflect{a, rev};
    } else if (name == "RandomTranslateXY") {
      keyword("dx=");
      const long long dx = integer();
      need(',');
      keyword("dy=");
      const long long dy = integer();
      if (std::llabs(dx) > 4 || std::llabs(dy) > 4) fail("shift exceeds 4");
      t = Translate{static_cast<int>(dx), static_cast<int>(dy)};
    } else if (name == "IncreaseResolution" || name == "IncreaseHeight" || name == "IncreaseWidth") {
      const long long k = integer();
      if (k != 2) fail("only factor 2 is supported");
      if (name == "IncreaseResolution") t = IncreaseResolution{2};
      else if (name == "IncreaseHeight") t = IncreaseHeight{2};
      else t = IncreaseWidth{2};
    } else if (name == "Repeat") {
      const int a = axis();
      need(',');
      const long long n = integer();
      if (n < 2 || n > 3) fail("repeat count must be 2 or 3");
      t = Repeat{a, static_cast<int>(n)};
    } else if (name == "DropoutInput" || name == "DropoutOutput") {
      keyword("seed=");
      t = DropoutPatches{name == "DropoutInput" ? DropoutTarget::input : DropoutTarget::output,
                         unsigned_integer()};
    } else if (name == "ColorPermutation") {
      need('[');
      ColorPermutation p{};
      std::array<bool, kNumColors> seen{};
      for (int c = 0; c < kNumColors; ++c) {
        if (c) need(',');
        const long long v = integer();
        if (v < 0 || v >= kNumColors || seen[v]) fail("not a permutation of 0-9");
        seen[v] = true;
        p.map[c] = static_cast<Color>(v);
      }
      need(']');
      t = p;
    } else if (name == "Chain") {
      need('[');
      Chain chain;
      if (!eat(']')) {
        do {
          chain.steps.push_back(parse_one());
        } while (eat(','));
        need(']');
      }
      t = std::move(chain);
    } else {
      fail("unknown transform '" + name + "'");
    }
    need(')');
    return t;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Transform parse_transform(std::string_view name) { return NameParser(name).parse_all(); }

}  // namespace ttt
