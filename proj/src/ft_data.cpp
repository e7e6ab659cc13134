#include "ttt/ft_data.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ttt/predictor.hpp"
#include "ttt/rng.hpp"

namespace ttt {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kGeneratorHeader =
    "You are a problem generator on 2D grids of colors. Here are some examples of such transformations, "
    "please follow the format:\n";
constexpr std::string_view kGeneratorClosing = "Please generate more and make sure they are different:\n";
constexpr std::string_view kDescriptionHeader =
    "You are an intelligent agent that can induce task descriptions from examples. For Category, please *do "
    "not* use generic terms like Transformation, Pattern Recognition.\n";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename F>
void for_each_line(std::string_view bytes, F f) {
  std::size_t pos = 0, line_no = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    const std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    f(line, line_no);
  }
}

std::optional<Description> parse_description(std::string_view text) {
  const std::string body = trim(text);
  if (body.empty()) return std::nullopt;
  Description d;
  std::string* current = nullptr;
  bool labelled = false;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t eol = body.find('\n', pos);
    if (eol == std::string::npos) eol = body.size();
    std::string_view line(body.data() + pos, eol - pos);
    pos = eol + 1;
    std::string* field = nullptr;
    std::string_view rest;
    for (auto [label, target] : {std::pair{std::string_view("Category:"), &d.category},
                                 std::pair{std::string_view("Summary:"), &d.summary},
                                 std::pair{std::string_view("Description:"), &d.description}}) {
      if (line.starts_with(label)) {
        field = target;
        rest = line.substr(label.size());
      }
    }
    if (field) {
      labelled = true;
      current = field;
      *current = trim(rest);
    } else if (current) {
      *current += "\n";
      *current += line;
    }
  }
  if (!labelled) d.description = body;
  return d;
}

ojson description_json(const std::optional<Description>& d) {
  if (!d) return nullptr;
  return {{"category", d->category}, {"summary", d->summary}, {"description", d->description}};
}

}  // namespace

std::vector<ExamplePool> read_pools_jsonl(std::string_view bytes) {
  std::vector<ExamplePool> pools;
  for_each_line(bytes, [&](std::string_view line, std::size_t line_no) {
    try {
      const auto j = ojson::parse(line);
      const auto id = j.at("pool_id").get<std::string>();
      Example ex{make_grid(j.at("input").get<std::vector<std::vector<int>>>()),
                 make_grid(j.at("output").get<std::vector<std::vector<int>>>())};
      auto it = std::find_if(pools.begin(), pools.end(), [&](const ExamplePool& p) { return p.pool_id == id; });
      if (it == pools.end()) {
        pools.push_back({id, {}});
        it = std::prev(pools.end());
      }
      it->examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw ParseError("pools line " + std::to_string(line_no) + ": " + e.what(), line_no, true);
    }
  });
  return pools;
}

std::string write_pools_jsonl(std::span<const ExamplePool> pools) {
  std::string out;
  for (const auto& p : pools) {
    for (const auto& ex : p.examples) {
      ojson j;
      j["pool_id"] = p.pool_id;
      j["input"] = ex.input.to_matrix();
      j["output"] = ex.output.to_matrix();
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

Task sample_ft_task(const ExamplePool& pool, std::uint64_t seed) {
  const std::size_t size = pool.examples.size();
  if (size < 3)
    throw PoolExhausted("pool '" + pool.pool_id + "' has " + std::to_string(size) + " examples, need at least 3");
  Rng rng(seed);
  const auto k = static_cast<std::size_t>(rng.between(2, static_cast<std::int64_t>(std::min<std::size_t>(7, size - 1))));
  // Partial Fisher-Yates: the first k + 1 slots are a uniform draw without replacement.
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  for (std::size_t i = 0; i <= k; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
  Task t;
  t.id = pool.pool_id;
  for (std::size_t i = 0; i < k; ++i) t.train.push_back(pool.examples[idx[i]]);
  const Example& probe = pool.examples[idx[k]];
  t.test.push_back({probe.input, probe.output});
  return t;
}

Augmented maybe_augment(const Task& task, double p, std::uint64_t seed) {
  Augmented out{task, std::nullopt, ApplicationMode::both, false};
  Rng rng(seed);
  if (!rng.bernoulli(p)) return out;
  const auto set = ft_augmentation_set(rng.next());
  const Transform& t = set[rng.below(set.size())];
  auto mode = static_cast<ApplicationMode>(rng.below(3));
  if (const auto* d = std::get_if<DropoutPatches>(&t.variant()))
    mode = d->target == DropoutTarget::input ? ApplicationMode::input_only : ApplicationMode::output_only;
  try {
    out.task = apply_to_task(t, task, mode);
    out.transform = t;
    out.mode = mode;
  } catch (const SizeError&) {
    out.size_skipped = true;
  }
  return out;
}

FTDataset build_ft_dataset(std::span<const ExamplePool> pools, const FTDataConfig& cfg) {
  if (cfg.shards == 0 || cfg.shard >= cfg.shards) throw std::invalid_argument("shard index out of range");
  FTDataset ds;
  std::vector<const ExamplePool*> usable;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (i % cfg.shards != cfg.shard) continue;
    if (pools[i].examples.size() < 3) {
      ds.warnings.push_back("skipping pool '" + pools[i].pool_id + "': fewer than 3 examples");
      continue;
    }
    usable.push_back(&pools[i]);
  }
  if (usable.empty()) {
    if (cfg.n > 0) ds.warnings.push_back("all pools exhausted; wrote 0 of " + std::to_string(cfg.n) + " records");
    return ds;
  }
  const std::uint64_t base = derive_seed(cfg.seed, "shard-" + std::to_string(cfg.shard), "ft-data");
  Rng order_rng(derive_seed(base, 0));
  std::size_t idx = 0;
  while (ds.records.size() < cfg.n) {
    auto order = usable;
    order_rng.shuffle(order);
    for (const ExamplePool* pool : order) {
      if (ds.records.size() >= cfg.n) break;
      const std::uint64_t s = derive_seed(base, ++idx);
      Augmented aug = maybe_augment(sample_ft_task(*pool, derive_seed(s, 0)), cfg.rate, derive_seed(s, 1));
      ds.augmented += aug.transform.has_value();
      ds.size_skipped += aug.size_skipped;
      RecordSource src{-1, aug.transform ? to_string(*aug.transform) : "Identity()", 0};
      ds.records.push_back(encode_ttt_record(aug.task.train, aug.task.test.front(), LossMode::with_demonstrations,
                                             pool->pool_id, std::move(src)));
    }
  }
  return ds;
}

std::string_view to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::generators_only: return "generators-only";
    case GenerationMode::joint: return "joint";
    case GenerationMode::two_stage: return "two-stage";
  }
  return "generators-only";
}

GenerationMode parse_generation_mode(std::string_view s) {
  if (s == "generators-only") return GenerationMode::generators_only;
  if (s == "joint") return GenerationMode::joint;
  if (s == "two-stage") return GenerationMode::two_stage;
  throw std::invalid_argument("unknown generation mode '" + std::string(s) + "'");
}

std::string render_description(const Description& d) {
  if (d.category.empty() && d.summary.empty()) return d.description;
  std::string out;
  auto add = [&](std::string_view label, const std::string& v) {
    if (v.empty()) return;
    if (!out.empty()) out += '\n';
    out += label;
    out += ' ';
    out += v;
  };
  add("Category:", d.category);
  add("Summary:", d.summary);
  add("Description:", d.description);
  return out;
}

PromptText build_generator_prompt(GenerationMode mode, std::span<const GeneratorCandidate> items, std::size_t m,
                                  std::uint64_t seed, const std::optional<Description>& new_description) {
  if (m == 0) throw PromptError("generator prompt needs at least one few-shot example");
  if (m > items.size())
    throw PromptError("asked for " + std::to_string(m) + " few-shot examples but only " +
                      std::to_string(items.size()) + " are available");
  Rng rng(seed);
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);

  const bool with_desc = mode != GenerationMode::generators_only;
  const bool desc_only = mode == GenerationMode::two_stage && !new_description;
  std::string text(kGeneratorHeader);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& item = items[idx[i]];
    text += kBlockSeparator;
    text += '\n';
    if (with_desc) {
      if (!item.description) throw PromptError("few-shot example " + std::to_string(idx[i]) + " has no description");
      text += "Example: " + render_description(*item.description) + "\n";
    }
    if (!desc_only) text += "Script: " + item.code + "\n";
  }
  if (mode == GenerationMode::two_stage && new_description) {
    text += kBlockSeparator;
    text += "\nExample: " + render_description(*new_description) + "\nScript:";
  } else {
    text += "\n";
    text += kGeneratorClosing;
  }
  return {std::move(text), {}};
}

std::string stringify_task(const Task& task) {
  std::string out;
  for (const auto& ex : task.train) {
    if (!out.empty()) out += '\n';
    out += "input:\n" + render_grid_text(ex.input) + "\noutput:\n" + render_grid_text(ex.output);
  }
  return out;
}

PromptText build_description_prompt(std::span<const DescriptionSeed> seeds, const Task& query,
                                    std::string_view query_annotation) {
  if (seeds.empty()) throw PromptError("description prompt needs at least one seed description");
  std::string text(kDescriptionHeader);
  for (const auto& s : seeds) {
    text += kBlockSeparator;
    text += "\nTask: " + stringify_task(s.task) + "\n";
    text += "LARC Description: " + s.larc + "\n";
    text += "Good Description: " + render_description(s.good) + "\n";
  }
  text += kBlockSeparator;
  text += "\nTask: " + stringify_task(query) + "\n";
  text += "LARC Description: " + std::string(query_annotation) + "\n";
  return {std::move(text), {}};
}

GeneratorCandidate parse_generator_response(std::string_view text, GenerationMode mode) {
  GeneratorCandidate c;
  c.mode = mode;
  std::string_view head, code;
  if (const auto s = text.find("Script:"); s != std::string_view::npos) {
    head = text.substr(0, s);
    code = text.substr(s + 7);
    // Only the first block counts when the model keeps going.
    if (const auto sep = code.find(kBlockSeparator); sep != std::string_view::npos) code = code.substr(0, sep);
  } else if (const auto f = text.find("```"); f != std::string_view::npos) {
    head = text.substr(0, f);
    code = text.substr(f);
  } else {
    throw MalformedGeneration("no Script: line or code block in response");
  }
  std::string body = trim(code);
  if (body.starts_with("```")) {
    const auto nl = body.find('\n');
    const auto close = body.find("```", 3);
    if (nl == std::string::npos || close == std::string::npos || close < nl)
      throw MalformedGeneration("unterminated code block");
    body = trim(std::string_view(body).substr(nl + 1, close - nl - 1));
  }
  if (body.empty()) throw MalformedGeneration("empty script");
  c.code = std::move(body);
  if (const auto e = head.rfind("Example:"); e != std::string_view::npos)
    c.description = parse_description(head.substr(e + 8));
  return c;
}

std::string generator_candidates_to_jsonl(std::span<const GeneratorCandidate> items) {
  std::string out;
  for (const auto& c : items) {
    ojson j;
    j["mode"] = std::string(to_string(c.mode));
    j["description"] = description_json(c.description);
    j["code"] = c.code;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<GeneratorCandidate> generator_candidates_from_jsonl(std::string_view bytes) {
  std::vector<GeneratorCandidate> out;
  for_each_line(bytes, [&](std::string_view line, std::size_t line_no) {
    try {
      const auto j = ojson::parse(line);
      GeneratorCandidate c;
      c.mode = parse_generation_mode(j.at("mode").get<std::string>());
      c.code = j.at("code").get<std::string>();
      if (c.code.empty()) throw std::invalid_argument("empty code");
      if (const auto& d = j.at("description"); !d.is_null())
        c.description = Description{d.value("category", ""), d.value("summary", ""), d.value("description", "")};
      out.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw ParseError("generators line " + std::to_string(line_no) + ": " + e.what(), line_no, true);
    }
  });
  return out;
}

GenerationClient::GenerationClient(std::string endpoint, std::chrono::milliseconds timeout) : timeout_(timeout) {
  std::tie(host_, path_) = split_endpoint(endpoint);
  if (path_.empty()) path_ = "/";
}

std::string GenerationClient::complete(const PromptText& prompt, double temperature, int max_tokens) {
  ojson body;
  body["prompt"] = prompt.text;
  body["temperature"] = temperature;
  body["max_tokens"] = max_tokens;
  httplib::Headers headers;
  if (const char* token = std::getenv(std::string(kTokenEnvVar).c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);
  std::string last_error;
  std::chrono::milliseconds delay{200};
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client cli(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw PredictorUnavailable(host_ + path_ + ": HTTP " + std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedGeneration(std::string("bad response body: ") + e.what());
    }
  }
  throw PredictorUnavailable(host_ + path_ + ": " + last_error + " after 3 attempts");
}

}  // namespace ttt
