#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "ttt/grid.hpp"
#include "ttt/transform.hpp"

namespace test_support {

inline ttt::Grid random_grid(std::mt19937_64& rng, std::size_t min_dim, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> dim(min_dim, max_dim);
  std::uniform_int_distribution<int> color(0, 9);
  const std::size_t r = dim(rng), c = dim(rng);
  std::vector<ttt::Color> cells(r * c);
  for (auto& v : cells) v = static_cast<ttt::Color>(color(rng));
  return ttt::Grid(r, c, std::move(cells));
}

// K train pairs and M test pairs of unrelated random grids.
inline ttt::Task random_task(std::uint64_t seed, std::size_t k, std::size_t max_dim = 10, std::size_t min_dim = 1,
                             std::size_t m = 1) {
  std::mt19937_64 rng(seed);
  ttt::Task t;
  t.id = "rand" + std::to_string(seed);
  for (std::size_t i = 0; i < k; ++i)
    t.train.push_back({random_grid(rng, min_dim, max_dim), random_grid(rng, min_dim, max_dim)});
  for (std::size_t i = 0; i < m; ++i) t.test.push_back({random_grid(rng, min_dim, max_dim), random_grid(rng, min_dim, max_dim)});
  return t;
}

// Every output is rule(input); test outputs included.
inline ttt::Task rule_task(std::uint64_t seed, const ttt::Transform& rule, std::size_t k, std::size_t m = 1) {
  std::mt19937_64 rng(seed);
  ttt::Task t;
  t.id = "rule" + std::to_string(seed);
  for (std::size_t i = 0; i < k; ++i) {
    ttt::Grid in = random_grid(rng, 3, 8);
    t.train.push_back({in, ttt::apply_to_grid(rule, in)});
  }
  for (std::size_t i = 0; i < m; ++i) {
    ttt::Grid in = random_grid(rng, 3, 8);
    t.test.push_back({in, ttt::apply_to_grid(rule, in)});
  }
  return t;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("arcttt-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace test_support
