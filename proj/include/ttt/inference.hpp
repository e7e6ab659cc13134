#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttt/codec.hpp"
#include "ttt/predictor.hpp"
#include "ttt/transform.hpp"

namespace ttt {

/// A prediction mapped back to the original frame.
struct Candidate {
  Grid grid;
  Transform transform;
  int perm_index = 0;
  std::string raw_text;
};

/// A view whose prediction could not be parsed; kept for audit.
struct DroppedCandidate {
  Transform transform;
  int perm_index = 0;
  std::string failure;
  std::string raw_text;
};

struct InferenceConfig {
  int permutations = 2;  // n, per transform; perm 0 is always the original order
  std::vector<Transform> transforms = inference_transform_set();
  std::uint64_t seed = 0;
  int jobs = 1;  // concurrent predictor calls per task
};

struct CandidateSet {
  std::string task_id;
  std::size_t test_index = 0;
  std::vector<Candidate> candidates;  // canonical order: transform set, then perm
  std::vector<DroppedCandidate> dropped;
};

/// Demo orderings used for one (task, test index, transform): identity first,
/// then n - 1 seeded shuffles.
std::vector<std::vector<std::size_t>> demo_permutations(const Task& task, std::size_t test_index,
                                                        std::size_t transform_index, const InferenceConfig& cfg);

/// Transformed demos (reordered by `perm`) and transformed test input.
/// Throws NonInvertibleError when t has no inverse.
PromptView transformed_view(const Task& task, const Transform& t, std::span<const std::size_t> perm,
                            std::size_t test_index);

/// Queries every (transform, permutation) view and inverse-maps parsed
/// predictions. PredictorUnavailable propagates; malformed outputs land in
/// `dropped`.
CandidateSet generate_candidates(const Task& task, std::size_t test_index, Predictor& predictor,
                                 const InferenceConfig& cfg);

/// JSONL lines {"task_id", "test_index", "transform", "perm", "grid", "failure"}.
std::string candidates_to_jsonl(const CandidateSet& set);
/// Groups lines back into per-(task, test index) sets in first-seen order.
/// Throws ParseError with the line number.
std::vector<CandidateSet> candidates_from_jsonl(std::string_view bytes);

}  // namespace ttt
