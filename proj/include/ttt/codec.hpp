#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ttt/grid.hpp"

namespace ttt {

/// Malformed input bytes. `offset` is a byte offset for JSON documents and a
/// 1-based line number for JSONL streams (see `is_line`).
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t offset, bool is_line = false)
      : Error(what), offset(offset), is_line(is_line) {}
  std::size_t offset;
  bool is_line;
};

struct MalformedPrediction : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// ARC JSON
// ---------------------------------------------------------------------------

/// Accepts a single-task object ({"train":..., "test":...}, id taken from
/// `name_hint`) or a map {"<task id>": task, ...}. Test outputs are optional.
TaskSet parse_arc_json(std::string_view bytes, const std::string& name_hint = "task");

/// Reads a file and uses its stem as the id for single-task documents.
TaskSet load_arc_file(const std::string& path);

std::string grid_to_json_text(const Grid& g);

// ---------------------------------------------------------------------------
// Grid text (numpy default array printing)
// ---------------------------------------------------------------------------

/// "[[1 2]\n [3 4]]": bracketed rows, single spaces, continuation rows
/// indented by one space, no trailing newline.
std::string render_grid_text(const Grid& g);

/// Inverse of render_grid_text. Leading whitespace and anything after the
/// closing "]]" are ignored; leading prose is not. Throws MalformedPrediction.
Grid parse_grid_text(std::string_view s);

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

enum class SegmentKind { demo_input, demo_output, test_input, test_output, delimiter };

std::string_view to_string(SegmentKind k);

struct Segment {
  std::size_t start;
  std::size_t end;  // exclusive
  SegmentKind kind;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Prompt text with a segment map. Segments are ordered, contiguous and tile
/// the whole text; every non-delimiter segment is exactly one rendered grid.
struct PromptText {
  std::string text;
  std::vector<Segment> segments;

  std::string_view slice(const Segment& s) const {
    return std::string_view(text).substr(s.start, s.end - s.start);
  }

  friend bool operator==(const PromptText&, const PromptText&) = default;
};

inline constexpr std::string_view kInputLabel = "input:\n";
inline constexpr std::string_view kOutputLabel = "\noutput:\n";
inline constexpr std::string_view kBlockEnd = "\n";

/// Demonstrations then the test input, ending with an open "output:" label.
PromptText render_prompt(std::span<const Example> demos, const Grid& test_input);

/// Recovers the segment map from text produced by render_prompt (optionally
/// followed by the rendered test output). Throws ParseError.
PromptText segment_prompt(std::string text);

/// Grids carried by a prompt, as seen by a predictor.
struct PromptView {
  std::vector<Example> demos;
  Grid test_input;
};

PromptView parse_prompt(const PromptText& prompt);

// ---------------------------------------------------------------------------
// Training records
// ---------------------------------------------------------------------------

enum class LossMode { with_demonstrations, test_only };

std::string_view to_string(LossMode m);
LossMode parse_loss_mode(std::string_view s);

struct Span {
  std::size_t start;
  std::size_t end;

  friend bool operator==(const Span&, const Span&) = default;
};

struct RecordSource {
  int loo_index = 0;
  std::string transform = "Identity()";
  int perm_index = 0;

  friend bool operator==(const RecordSource&, const RecordSource&) = default;
};

struct TTTRecord {
  std::string task_id;
  PromptText prompt;
  std::vector<Span> loss_spans;
  RecordSource source;
  LossMode loss_mode = LossMode::with_demonstrations;

  friend bool operator==(const TTTRecord&, const TTTRecord&) = default;
};

/// Prompt = demos + test input + rendered test output. Loss spans cover demo
/// outputs 2..K' and the test output (with_demonstrations) or only the test
/// output (test_only). Throws std::invalid_argument if the test output is absent.
TTTRecord encode_ttt_record(std::span<const Example> demos, const TestExample& test,
                            LossMode mode, std::string task_id, RecordSource source);

inline TTTRecord encode_ttt_record(std::span<const Example> demos, const Example& test,
                                   LossMode mode, std::string task_id, RecordSource source) {
  return encode_ttt_record(demos, TestExample{test.input, test.output}, mode,
                           std::move(task_id), std::move(source));
}

/// One JSON object per line, '\n'-terminated.
std::string write_jsonl(std::span<const TTTRecord> records);
std::string to_json_line(const TTTRecord& record);

/// Throws ParseError carrying the 1-based line number.
std::vector<TTTRecord> read_jsonl(std::string_view bytes);

}  // namespace ttt
