#pragma once

#include <span>
#include <string>
#include <vector>

#include "ttt/grid.hpp"
#include "ttt/inference.hpp"
#include "ttt/transform.hpp"

namespace ttt {

/// Stage-one result for one transform group. `counts[i]` is how often
/// `grids[i]` was predicted inside the group (0 for row/column supplements).
struct GroupSelection {
  Transform transform;
  std::vector<Grid> grids;
  std::vector<std::size_t> counts;
  std::vector<Grid> supplements;  // subset of grids that came from majorities
  std::vector<std::pair<std::string, std::size_t>> tally;  // rendered grid -> count
};

struct VoteAudit {
  std::vector<GroupSelection> groups;
  std::vector<std::pair<std::string, std::size_t>> final_tally;  // ranked
  std::vector<std::string> tie_breaks;
};

struct VoteOutcome {
  std::vector<Grid> attempts;  // at most 2, pairwise distinct
  VoteAudit audit;
};

/// Row r of the result is the most frequent row r among the grids of the
/// modal shape (ties: smaller shape, then lexicographically smaller row).
Grid row_majority(std::span<const Grid> grids);
Grid col_majority(std::span<const Grid> grids);

/// Top-3 distinct grids by frequency (ties lexicographic on the rendering);
/// with fewer than 3, row- then column-majority grids are appended unless
/// already present.
GroupSelection select_in_group(const Transform& t, std::span<const Grid> grids);
std::vector<Grid> intra_transform_vote(std::span<const Candidate> group);

enum class GlobalWeighting {
  endorsement,  // each group endorses each selected grid once
  frequency,    // each group contributes its in-group counts
};

/// Ranks grids across groups: weight, then endorsement by the identity
/// group, then rendering. Returns the top 2.
VoteOutcome global_vote(std::span<const GroupSelection> selections,
                        GlobalWeighting weighting = GlobalWeighting::endorsement);

/// Groups by transform, runs select_in_group on each, then global_vote.
VoteOutcome hierarchical_vote(std::span<const Candidate> candidates,
                              GlobalWeighting weighting = GlobalWeighting::endorsement);

/// One frequency round over every candidate; ties prefer grids predicted
/// under the identity transform, then the rendering.
VoteOutcome flattened_vote(std::span<const Candidate> candidates);

/// True iff some candidate equals the truth.
bool oracle_select(std::span<const Candidate> candidates, const Grid& truth);

std::string vote_audit_to_json(const VoteAudit& audit);

}  // namespace ttt
