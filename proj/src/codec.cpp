#include "ttt/codec.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ttt {

using ojson = nlohmann::ordered_json;

namespace {

Grid grid_from_json(const ojson& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " is not a matrix", 0);
  std::vector<std::vector<int>> rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    if (!row.is_array()) throw ParseError(where + " has a non-array row", 0);
    std::vector<int>& out = rows.emplace_back();
    out.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw ParseError(where + " has a non-integer cell", 0);
      out.push_back(v.get<int>());
    }
  }
  Grid g = make_grid(rows);
  if (g.rows() > kRawGridCap || g.cols() > kRawGridCap) {
    throw SizeError(where + " exceeds the raw " + std::to_string(kRawGridCap) + "x" +
                    std::to_string(kRawGridCap) + " limit");
  }
  return g;
}

Task task_from_json(const ojson& j, const std::string& id) {
  if (!j.is_object() || !j.contains("train") || !j.contains("test") || !j["train"].is_array() ||
      !j["test"].is_array()) {
    throw ParseError("task '" + id + "' must be an object with 'train' and 'test' arrays", 0);
  }
  Task task;
  task.id = id;
  std::size_t i = 0;
  for (const auto& ex : j["train"]) {
    const std::string where = "task '" + id + "' train[" + std::to_string(i++) + "]";
    if (!ex.is_object() || !ex.contains("input") || !ex.contains("output"))
      throw ParseError(where + " needs 'input' and 'output'", 0);
    task.train.push_back({grid_from_json(ex["input"], where + ".input"),
                          grid_from_json(ex["output"], where + ".output")});
  }
  i = 0;
  for (const auto& ex : j["test"]) {
    const std::string where = "task '" + id + "' test[" + std::to_string(i++) + "]";
    if (!ex.is_object() || !ex.contains("input")) throw ParseError(where + " needs 'input'", 0);
    TestExample t{grid_from_json(ex["input"], where + ".input"), std::nullopt};
    if (ex.contains("output") && !ex["output"].is_null())
      t.output = grid_from_json(ex["output"], where + ".output");
    task.test.push_back(std::move(t));
  }
  validate_task(task);
  return task;
}

void expect(std::string_view text, std::size_t& pos, std::string_view token) {
  if (text.substr(pos, token.size()) != token) {
    throw ParseError("expected '" + std::string(token == "\n" ? "\\n" : token) + "'", pos);
  }
  pos += token.size();
}

// Parses one canonical grid rendering starting at pos; advances past it.
Grid take_grid(std::string_view text, std::size_t& pos) {
  const std::size_t close = text.find("]]", pos);
  if (close == std::string_view::npos) throw ParseError("unterminated grid", pos);
  const std::string_view body = text.substr(pos, close + 2 - pos);
  Grid g = [&] {
    try {
      return parse_grid_text(body);
    } catch (const MalformedPrediction& e) {
      throw ParseError(std::string("bad grid: ") + e.what(), pos);
    }
  }();
  if (render_grid_text(g) != body) throw ParseError("grid is not in canonical form", pos);
  pos = close + 2;
  return g;
}

}  // namespace

TaskSet parse_arc_json(std::string_view bytes, const std::string& name_hint) {
  ojson doc;
  try {
    doc = ojson::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  TaskSet set;
  if (doc.is_object() && doc.contains("train") && doc["train"].is_array()) {
    set.tasks.push_back(task_from_json(doc, name_hint));
  } else if (doc.is_object()) {
    for (const auto& [id, value] : doc.items()) set.tasks.push_back(task_from_json(value, id));
  } else {
    throw ParseError("ARC document must be a task object or a map of tasks", 0);
  }
  validate_task_set(set);
  return set;
}

TaskSet load_arc_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_arc_json(ss.str(), std::filesystem::path(path).stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset, e.is_line);
  }
}

std::string grid_to_json_text(const Grid& g) { return ojson(g.to_matrix()).dump(); }

std::string render_grid_text(const Grid& g) {
  std::string out;
  out.reserve(g.rows() * (2 * g.cols() + 2) + 2);
  out += '[';
  for (std::size_t r = 0; r < g.rows(); ++r) {
    if (r > 0) out += "\n ";
    out += '[';
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c > 0) out += ' ';
      out += static_cast<char>('0' + g.at(r, c));
    }
    out += ']';
  }
  out += ']';
  return out;
}

Grid parse_grid_text(std::string_view s) {
  auto is_space = [](char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; };
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < s.size() && is_space(s[pos])) ++pos;
  };
  skip_ws();
  if (s.substr(pos, 2) != "[[") throw MalformedPrediction("no grid found (expected '[[')");
  ++pos;

  std::vector<Color> cells;
  std::size_t cols = 0, rows = 0;
  for (;;) {
    skip_ws();
    if (pos >= s.size() || s[pos] != '[') throw MalformedPrediction("expected '[' opening a row");
    ++pos;
    std::size_t n = 0;
    for (;;) {
      skip_ws();
      if (pos >= s.size()) throw MalformedPrediction("unterminated row");
      if (s[pos] == ']') {
        ++pos;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(s[pos])))
        throw MalformedPrediction(std::string("unexpected character '") + s[pos] + "' in row");
      int v = 0;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        v = v * 10 + (s[pos] - '0');
        if (v >= kNumColors) throw MalformedPrediction("color outside 0-9");
        ++pos;
      }
      cells.push_back(static_cast<Color>(v));
      ++n;
    }
    if (n == 0) throw MalformedPrediction("empty row");
    if (rows == 0) cols = n;
    if (n != cols) throw MalformedPrediction("ragged rows");
    ++rows;
    if (rows > kHardGridCap || cols > kHardGridCap) throw MalformedPrediction("grid exceeds size cap");
    skip_ws();
    if (pos < s.size() && s[pos] == ']') break;
  }
  return Grid(rows, cols, std::move(cells));
}

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::demo_input: return "demo-input";
    case SegmentKind::demo_output: return "demo-output";
    case SegmentKind::test_input: return "test-input";
    case SegmentKind::test_output: return "test-output";
    case SegmentKind::delimiter: return "delimiter";
  }
  return "?";
}

namespace {

struct PromptBuilder {
  PromptText p;
  void put(std::string_view s, SegmentKind kind) {
    const std::size_t start = p.text.size();
    p.text += s;
    // Adjacent delimiters merge so the map stays minimal.
    if (kind == SegmentKind::delimiter && !p.segments.empty() &&
        p.segments.back().kind == SegmentKind::delimiter) {
      p.segments.back().end = p.text.size();
      return;
    }
    p.segments.push_back({start, p.text.size(), kind});
  }
};

}  // namespace

PromptText render_prompt(std::span<const Example> demos, const Grid& test_input) {
  PromptBuilder b;
  for (const auto& ex : demos) {
    b.put(kInputLabel, SegmentKind::delimiter);
    b.put(render_grid_text(ex.input), SegmentKind::demo_input);
    b.put(kOutputLabel, SegmentKind::delimiter);
    b.put(render_grid_text(ex.output), SegmentKind::demo_output);
    b.put(kBlockEnd, SegmentKind::delimiter);
  }
  b.put(kInputLabel, SegmentKind::delimiter);
  b.put(render_grid_text(test_input), SegmentKind::test_input);
  b.put(kOutputLabel, SegmentKind::delimiter);
  return std::move(b.p);
}

PromptText segment_prompt(std::string text) {
  const std::string_view t(text);
  struct Block {
    Segment in, out;
    bool has_out = false;
  };
  std::vector<Block> blocks;
  std::size_t pos = 0;
  while (pos < t.size()) {
    expect(t, pos, kInputLabel);
    Block b;
    b.in.start = pos;
    take_grid(t, pos);
    b.in.end = pos;
    expect(t, pos, kOutputLabel);
    if (pos == t.size()) {
      blocks.push_back(b);
      break;
    }
    b.out.start = pos;
    take_grid(t, pos);
    b.out.end = pos;
    b.has_out = true;
    blocks.push_back(b);
    if (pos == t.size()) break;
    expect(t, pos, kBlockEnd);
    if (pos == t.size()) throw ParseError("prompt ends after a demonstration", pos);
  }
  if (blocks.empty()) throw ParseError("empty prompt", 0);

  PromptText p;
  p.text = std::move(text);
  std::size_t cursor = 0;
  auto push = [&](const Segment& s) {
    if (s.start > cursor) {
      if (!p.segments.empty() && p.segments.back().kind == SegmentKind::delimiter)
        p.segments.back().end = s.start;
      else
        p.segments.push_back({cursor, s.start, SegmentKind::delimiter});
    }
    p.segments.push_back(s);
    cursor = s.end;
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const bool last = i + 1 == blocks.size();
    Block b = blocks[i];
    b.in.kind = last ? SegmentKind::test_input : SegmentKind::demo_input;
    b.out.kind = last ? SegmentKind::test_output : SegmentKind::demo_output;
    push(b.in);
    if (b.has_out) push(b.out);
  }
  if (cursor < p.text.size()) {
    if (!p.segments.empty() && p.segments.back().kind == SegmentKind::delimiter)
      p.segments.back().end = p.text.size();
    else
      p.segments.push_back({cursor, p.text.size(), SegmentKind::delimiter});
  }
  return p;
}

PromptView parse_prompt(const PromptText& prompt) {
  std::vector<Example> demos;
  std::optional<Grid> pending_in;
  std::optional<Grid> test_in;
  for (const auto& s : prompt.segments) {
    switch (s.kind) {
      case SegmentKind::demo_input: pending_in = parse_grid_text(prompt.slice(s)); break;
      case SegmentKind::demo_output:
        if (!pending_in) throw ParseError("demo output without input", s.start);
        demos.push_back({*pending_in, parse_grid_text(prompt.slice(s))});
        pending_in.reset();
        break;
      case SegmentKind::test_input: test_in = parse_grid_text(prompt.slice(s)); break;
      default: break;
    }
  }
  if (!test_in) throw ParseError("prompt has no test input", 0);
  return {std::move(demos), std::move(*test_in)};
}

std::string_view to_string(LossMode m) {
  return m == LossMode::with_demonstrations ? "demos" : "test_only";
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "demos") return LossMode::with_demonstrations;
  if (s == "test_only") return LossMode::test_only;
  throw std::invalid_argument("unknown loss mode '" + std::string(s) + "'");
}

TTTRecord encode_ttt_record(std::span<const Example> demos, const TestExample& test, LossMode mode,
                            std::string task_id, RecordSource source) {
  if (!test.output) throw std::invalid_argument("training records need a supervised test output");
  TTTRecord rec;
  rec.task_id = std::move(task_id);
  rec.source = std::move(source);
  rec.loss_mode = mode;
  rec.prompt = render_prompt(demos, test.input);
  const std::size_t start = rec.prompt.text.size();
  rec.prompt.text += render_grid_text(*test.output);
  rec.prompt.segments.push_back({start, rec.prompt.text.size(), SegmentKind::test_output});

  std::size_t demo_outputs_seen = 0;
  for (const auto& s : rec.prompt.segments) {
    if (s.kind == SegmentKind::demo_output) {
      // The first demonstration output has no preceding example to learn from.
      if (mode == LossMode::with_demonstrations && demo_outputs_seen > 0)
        rec.loss_spans.push_back({s.start, s.end});
      ++demo_outputs_seen;
    } else if (s.kind == SegmentKind::test_output) {
      rec.loss_spans.push_back({s.start, s.end});
    }
  }
  return rec;
}

std::string to_json_line(const TTTRecord& r) {
  ojson spans = ojson::array();
  for (const auto& s : r.loss_spans) spans.push_back({s.start, s.end});
  ojson j;
  j["task_id"] = r.task_id;
  j["prompt"] = r.prompt.text;
  j["loss_spans"] = std::move(spans);
  j["source"] = {{"loo_index", r.source.loo_index},
                 {"transform", r.source.transform},
                 {"perm_index", r.source.perm_index}};
  j["loss_mode"] = std::string(to_string(r.loss_mode));
  return j.dump();
}

std::string write_jsonl(std::span<const TTTRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

std::vector<TTTRecord> read_jsonl(std::string_view bytes) {
  std::vector<TTTRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    const std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    auto fail = [&](const std::string& why) -> ParseError {
      return ParseError("line " + std::to_string(line_no) + ": " + why, line_no, true);
    };
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(e.what());
    }
    for (const char* key : {"task_id", "prompt", "loss_spans", "source", "loss_mode"}) {
      if (!j.contains(key)) throw fail(std::string("missing \"") + key + "\"");
    }
    try {
      TTTRecord r;
      r.task_id = j.at("task_id").get<std::string>();
      r.prompt = segment_prompt(j.at("prompt").get<std::string>());
      for (const auto& s : j.at("loss_spans")) {
        if (!s.is_array() || s.size() != 2) throw fail("loss span must be [start, end]");
        r.loss_spans.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
      }
      const auto& src = j.at("source");
      r.source.loo_index = src.at("loo_index").get<int>();
      r.source.transform = src.at("transform").get<std::string>();
      r.source.perm_index = src.at("perm_index").get<int>();
      r.loss_mode = parse_loss_mode(j.at("loss_mode").get<std::string>());
      out.push_back(std::move(r));
    } catch (const ParseError& e) {
      if (e.is_line) throw;
      throw fail(std::string("prompt: ") + e.what());
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  return out;
}

}  // namespace ttt
