#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ttt/codec.hpp"
#include "ttt/grid.hpp"
#include "ttt/transform.hpp"

namespace ttt {

/// One synthetic in-context task: demonstrations plus a held-out probe.
struct ICLTask {
  std::vector<Example> demos;
  Example probe;
  int loo_index = 0;
  int perm_index = 0;
  std::string transform = "Identity()";
};

/// K tasks; the j-th holds train[j] out as the probe and keeps the rest in
/// their original order. K == 1 yields a single zero-demo task.
std::vector<ICLTask> leave_one_out(const Task& task);

/// The task followed by `n` copies with seeded demo shuffles (n + 1 total).
/// Copies may coincide with the original ordering.
std::vector<ICLTask> add_permutations(const ICLTask& icl, int n, std::uint64_t seed);

struct TTTDataConfig {
  std::size_t cap = 250;
  LossMode loss_mode = LossMode::with_demonstrations;
  std::uint64_t seed = 0;
  int permutations = 2;
  bool use_transforms = true;     // false reproduces the "no transformations" ablation
  bool shuffle_colors = true;
};

struct DatasetStats {
  std::size_t enumerated = 0;
  std::size_t size_dropped = 0;
  std::size_t cap_dropped = 0;
};

struct TTTDataset {
  std::string task_id;
  std::vector<TTTRecord> records;
  TTTDataConfig config;
  DatasetStats stats;
};

/// Leave-one-out x (1 + permutations) x ({Identity} + augmentations), each
/// followed by a seeded color shuffle. Oversized results are dropped. Under
/// the cap, identity-transform records are kept first and the rest filled by
/// seeded sampling without replacement; survivors keep enumeration order.
TTTDataset build_ttt_dataset(const Task& task, const TTTDataConfig& cfg);

/// Each train pair as a zero-demo record, augmented and capped as above.
TTTDataset build_e2e_dataset(const Task& task, const TTTDataConfig& cfg);

enum class AdapterScope { per_task, shared };

/// Hyperparameters handed to the external LoRA trainer.
struct TrainerManifest {
  AdapterScope adapter_scope = AdapterScope::per_task;
  int rank = 128;
  int alpha = 16;
  double lr = 1e-4;
  int epochs = 2;
  int batch_size = 2;
  std::string optimizer = "adamw";
  std::vector<std::string> target_layers{"attention_qv", "mlp", "output"};
  bool quantized = false;
  std::string config_fingerprint;

  friend bool operator==(const TrainerManifest&, const TrainerManifest&) = default;
};

std::string manifest_to_json(const TrainerManifest& m);
/// Throws ParseError.
TrainerManifest manifest_from_json(std::string_view text);

/// Writes <task_id>.jsonl + <task_id>.manifest.json per dataset, or
/// shared.jsonl + shared.manifest.json when the manifest scope is shared.
/// Returns the written paths. Throws ttt::Error naming the path on I/O failure.
std::vector<std::filesystem::path> emit_training_bundle(std::span<const TTTDataset> datasets,
                                                        const TrainerManifest& manifest,
                                                        const std::filesystem::path& out_dir);

/// Whole-file helpers shared by the CLI and bundle writer.
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace ttt
