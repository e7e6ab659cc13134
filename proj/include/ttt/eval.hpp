#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttt/grid.hpp"
#include "ttt/inference.hpp"
#include "ttt/voting.hpp"

namespace ttt {

enum class Hardness { easy, medium, hard, expert, unknown };

std::string_view to_string(Hardness h);

struct Dev80Entry {
  std::string_view id;
  Hardness level;
};

/// The 80 balanced development tasks (20 per level) drawn from the ARC
/// validation split.
std::span<const Dev80Entry> dev80_manifest();

/// Level from the dev-80 table, `unknown` elsewhere.
Hardness hardness_of(std::string_view task_id);

/// Restricts a validation set to the dev-80 ids, in table order.
/// Throws LookupError naming the first missing id.
TaskSet load_dev80(const TaskSet& validation);

enum class AttemptPairing {
  positional,   // one attempt slot must solve every test input
  independent,  // each test input may be solved by either of its attempts
};

struct TaskScore {
  std::string task_id;
  std::vector<bool> per_test;  // any attempt matched this test input
  bool strict = false;         // pass@2 under the chosen pairing
  double partial = 0.0;        // fraction of test inputs solved
  Hardness level = Hardness::unknown;
};

/// attempts[m] holds up to two attempts for test input m.
TaskScore score_task(std::span<const std::vector<Grid>> attempts, const Task& task,
                     AttemptPairing pairing = AttemptPairing::positional);

struct ColumnSummary {
  double strict = 0.0;
  double partial = 0.0;
  std::map<Hardness, double> strict_by_level;  // omits unknown
};

struct TaskResult {
  std::string task_id;
  Hardness level = Hardness::unknown;
  std::map<std::string, TaskScore> columns;
  std::optional<std::string> error;  // set when inference failed
};

struct EvalReport {
  std::vector<std::string> column_names;
  std::vector<TaskResult> tasks;
  std::map<std::string, ColumnSummary> summary;
  std::string fingerprint;
};

struct EvalConfig {
  InferenceConfig inference;
  GlobalWeighting weighting = GlobalWeighting::endorsement;
  AttemptPairing pairing = AttemptPairing::positional;
  std::string fingerprint;
};

/// Column names in report order: hierarchical, flattened, oracle, then one
/// single-view column per transform (top-2 by frequency inside that group).
std::vector<std::string> report_columns(std::span<const Transform> transforms);

/// Fills report.summary from the per-task scores.
void summarize(EvalReport& report);

/// Scores pre-computed candidate sets (one per task and test index).
EvalReport evaluate_candidates(const TaskSet& tasks, std::span<const CandidateSet> candidates,
                               const EvalConfig& cfg);

/// Runs inference for every task then evaluate_candidates. Per-task
/// PredictorUnavailable is recorded as an error and scored as unsolved.
/// `dumps`, when non-null, receives the candidate sets that were scored.
EvalReport evaluate(const TaskSet& tasks, Predictor& predictor, const EvalConfig& cfg,
                    std::vector<CandidateSet>* dumps = nullptr);

/// Attempts selected by one voting mode for one candidate set. For the
/// oracle mode this is the truth when it is present among the candidates.
std::vector<Grid> select_attempts(std::string_view mode, std::span<const Candidate> candidates,
                                  const std::optional<Grid>& truth, GlobalWeighting weighting);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

/// One glyph per color: '.' for 0 then '1'..'9'.
std::string render_grid_ascii(const Grid& g);

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// cols*cell + (cols+1) pixels wide and rows*cell + (rows+1) tall: one
/// pixel of grid line around every cell.
Image render_grid_image(const Grid& g, std::size_t cell = 16);

/// Train pairs (input | output) then test rows (input | truth | attempts).
Image render_task_image(const Task& task, std::span<const std::vector<Grid>> attempts, std::size_t cell = 16);

std::vector<std::uint8_t> encode_png(const Image& img);

}  // namespace ttt
