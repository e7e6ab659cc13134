#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttt/codec.hpp"
#include "ttt/grid.hpp"
#include "ttt/transform.hpp"

namespace ttt {

struct PoolExhausted : Error {
  using Error::Error;
};
struct PromptError : Error {
  using Error::Error;
};
struct MalformedGeneration : Error {
  using Error::Error;
};

/// Pre-generated input/output pairs from one task generator.
struct ExamplePool {
  std::string pool_id;
  std::vector<Example> examples;
};

/// Lines of {"pool_id", "input", "output"}; pools keep first-seen order.
/// Throws ParseError with the line number.
std::vector<ExamplePool> read_pools_jsonl(std::string_view bytes);
std::string write_pools_jsonl(std::span<const ExamplePool> pools);

/// K demos + 1 test example drawn without replacement. K is uniform over
/// [2, min(7, |pool| - 1)]. Throws PoolExhausted below 3 examples.
Task sample_ft_task(const ExamplePool& pool, std::uint64_t seed);

struct Augmented {
  Task task;
  std::optional<Transform> transform;  // unset when nothing was applied
  ApplicationMode mode = ApplicationMode::both;
  bool size_skipped = false;  // drawn, but the result exceeded the size cap
};

/// With probability p applies a uniformly drawn ft augmentation in a
/// uniformly drawn mode. Dropout transforms carry their own target, which
/// decides the mode.
Augmented maybe_augment(const Task& task, double p, std::uint64_t seed);

struct FTDataConfig {
  std::size_t n = 1000;
  double rate = 0.3;
  std::uint64_t seed = 0;
  std::size_t shard = 0;
  std::size_t shards = 1;  // shard s owns pools with index % shards == s
};

struct FTDataset {
  std::vector<TTTRecord> records;
  std::size_t augmented = 0;
  std::size_t size_skipped = 0;
  std::vector<std::string> warnings;
};

/// Visits pools round-robin, reshuffling the visiting order every round,
/// and encodes one record per visit. Pools too small to sample are skipped
/// with a warning; if none remain the result is short.
FTDataset build_ft_dataset(std::span<const ExamplePool> pools, const FTDataConfig& cfg);

enum class GenerationMode { generators_only, joint, two_stage };

std::string_view to_string(GenerationMode m);
GenerationMode parse_generation_mode(std::string_view s);

struct Description {
  std::string category;
  std::string summary;
  std::string description;

  friend bool operator==(const Description&, const Description&) = default;
};

/// "Category: ...\nSummary: ...\nDescription: ..." with empty fields omitted.
std::string render_description(const Description& d);

/// Seed generator: optional description plus opaque code text.
struct GeneratorCandidate {
  std::optional<Description> description;
  std::string code;
  GenerationMode mode = GenerationMode::generators_only;

  friend bool operator==(const GeneratorCandidate&, const GeneratorCandidate&) = default;
};

inline constexpr std::string_view kBlockSeparator = "----------------";

/// Samples m items (without replacement) and fills the generator template.
/// generators_only omits "Example:" lines; joint keeps them. two_stage
/// without `new_description` is step one (descriptions only); with it, the
/// prompt ends with an open "Example: <s'>\nScript:" block.
/// Throws PromptError for m == 0, m > |items|, or missing descriptions.
PromptText build_generator_prompt(GenerationMode mode, std::span<const GeneratorCandidate> items,
                                  std::size_t m, std::uint64_t seed,
                                  const std::optional<Description>& new_description = std::nullopt);

struct DescriptionSeed {
  Task task;
  std::string larc;  // crowd-worker annotation
  Description good;
};

/// Task / LARC Description / Good Description triples in the given order,
/// then the query's Task and LARC Description. Throws PromptError without seeds.
PromptText build_description_prompt(std::span<const DescriptionSeed> seeds, const Task& query,
                                    std::string_view query_annotation);

/// Train pairs as "input:\n<grid>\noutput:\n<grid>" blocks.
std::string stringify_task(const Task& task);

/// Takes the text after "Script:" (or the first fenced code block) as code
/// and an optional leading "Example:" as the description. The code is never
/// run. Throws MalformedGeneration when no code is found.
GeneratorCandidate parse_generator_response(std::string_view text,
                                            GenerationMode mode = GenerationMode::generators_only);

/// {"mode", "description": {category, summary, description}|null, "code"} lines.
std::string generator_candidates_to_jsonl(std::span<const GeneratorCandidate> items);
std::vector<GeneratorCandidate> generator_candidates_from_jsonl(std::string_view bytes);

/// Minimal completion client for generator synthesis: POSTs
/// {"prompt", "temperature", "max_tokens"} to the endpoint URL and reads
/// {"text"}. Bearer token from TTT_API_TOKEN when set.
class GenerationClient {
 public:
  explicit GenerationClient(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(60));
  /// Throws PredictorUnavailable on transport or status failure and
  /// MalformedGeneration on an unreadable body.
  std::string complete(const PromptText& prompt, double temperature, int max_tokens);

 private:
  std::string host_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

}  // namespace ttt
