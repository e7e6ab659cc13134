#include "ttt/ttt_data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ttt/rng.hpp"

namespace ttt {

using ojson = nlohmann::ordered_json;

std::vector<ICLTask> leave_one_out(const Task& task) {
  std::vector<ICLTask> out;
  const std::size_t k = task.train.size();
  for (std::size_t j = 0; j < k; ++j) {
    ICLTask icl{{}, task.train[j], static_cast<int>(j), 0, "Identity()"};
    for (std::size_t i = 0; i < k; ++i)
      if (i != j) icl.demos.push_back(task.train[i]);
    out.push_back(std::move(icl));
  }
  return out;
}

std::vector<ICLTask> add_permutations(const ICLTask& icl, int n, std::uint64_t seed) {
  std::vector<ICLTask> out{icl};
  Rng rng(seed);
  for (int p = 1; p <= n; ++p) {
    ICLTask copy = icl;
    copy.perm_index = p;
    copy.demos.clear();
    for (std::size_t i : rng.permutation(icl.demos.size())) copy.demos.push_back(icl.demos[i]);
    out.push_back(std::move(copy));
  }
  return out;
}

namespace {

struct Candidate {
  TTTRecord record;
  bool identity;
};

std::string record_transform_name(const Transform& geometric, const std::optional<ColorPermutation>& colors) {
  if (!colors) return to_string(geometric);
  Chain chain;
  if (const auto* c = std::get_if<Chain>(&geometric.variant())) {
    chain.steps = c->steps;
  } else if (!geometric.is<Identity>()) {
    chain.steps.push_back(geometric);
  }
  if (chain.steps.empty()) return to_string(*colors);
  chain.steps.push_back(*colors);
  return to_string(chain);
}

TTTDataset build_dataset(const Task& task, const TTTDataConfig& cfg, std::vector<ICLTask> base) {
  TTTDataset ds;
  ds.task_id = task.id;
  ds.config = cfg;

  std::vector<std::vector<Transform>> per_base(base.size());
  for (std::size_t b = 0; b < base.size(); ++b) {
    per_base[b].push_back(Identity{});
    if (cfg.use_transforms) {
      // The random translation is materialized per base task.
      for (auto& t : ttt_augmentation_set(derive_seed(cfg.seed, task.id, "augment-" + std::to_string(b))))
        per_base[b].push_back(std::move(t));
    }
  }
  const std::size_t num_transforms = per_base.empty() ? 0 : per_base.front().size();

  std::vector<Candidate> all;
  for (std::size_t ti = 0; ti < num_transforms; ++ti) {
    for (std::size_t b = 0; b < base.size(); ++b) {
      ++ds.stats.enumerated;
      const Transform& t = per_base[b][ti];
      const std::size_t ordinal = ti * base.size() + b;
      std::optional<ColorPermutation> colors;
      if (cfg.shuffle_colors)
        colors = permute_colors(derive_seed(cfg.seed, task.id, "colors-" + std::to_string(ordinal)));
      auto map = [&](const Grid& g) {
        Grid out = apply_to_grid(t, g);
        return colors ? apply_to_grid(*colors, out) : out;
      };
      try {
        std::vector<Example> demos;
        for (const auto& d : base[b].demos) demos.push_back({map(d.input), map(d.output)});
        const Example probe{map(base[b].probe.input), map(base[b].probe.output)};
        RecordSource src{base[b].loo_index, record_transform_name(t, colors), base[b].perm_index};
        all.push_back({encode_ttt_record(demos, probe, cfg.loss_mode, task.id, std::move(src)),
                       t.is<Identity>()});
      } catch (const SizeError&) {
        ++ds.stats.size_dropped;
      }
    }
  }

  std::vector<std::size_t> keep;
  if (all.size() <= cfg.cap) {
    for (std::size_t i = 0; i < all.size(); ++i) keep.push_back(i);
  } else {
    std::vector<std::size_t> identity, other;
    for (std::size_t i = 0; i < all.size(); ++i) (all[i].identity ? identity : other).push_back(i);
    Rng rng(derive_seed(cfg.seed, task.id, "cap"));
    if (identity.size() >= cfg.cap) {
      rng.shuffle(identity);
      identity.resize(cfg.cap);
      keep = std::move(identity);
    } else {
      rng.shuffle(other);
      other.resize(cfg.cap - identity.size());
      keep = std::move(identity);
      keep.insert(keep.end(), other.begin(), other.end());
    }
    std::sort(keep.begin(), keep.end());
    ds.stats.cap_dropped = all.size() - keep.size();
  }
  ds.records.reserve(keep.size());
  for (std::size_t i : keep) ds.records.push_back(std::move(all[i].record));
  return ds;
}

}  // namespace

TTTDataset build_ttt_dataset(const Task& task, const TTTDataConfig& cfg) {
  validate_task(task);
  std::vector<ICLTask> base;
  for (const auto& icl : leave_one_out(task)) {
    auto perms = add_permutations(icl, cfg.permutations,
                                  derive_seed(cfg.seed, task.id, "permute-" + std::to_string(icl.loo_index)));
    base.insert(base.end(), perms.begin(), perms.end());
  }
  return build_dataset(task, cfg, std::move(base));
}

TTTDataset build_e2e_dataset(const Task& task, const TTTDataConfig& cfg) {
  validate_task(task);
  std::vector<ICLTask> base;
  for (std::size_t j = 0; j < task.train.size(); ++j)
    base.push_back({{}, task.train[j], static_cast<int>(j), 0, "Identity()"});
  return build_dataset(task, cfg, std::move(base));
}

std::string manifest_to_json(const TrainerManifest& m) {
  ojson j;
  j["adapter_scope"] = m.adapter_scope == AdapterScope::per_task ? "per_task" : "shared";
  j["rank"] = m.rank;
  j["alpha"] = m.alpha;
  j["lr"] = m.lr;
  j["epochs"] = m.epochs;
  j["batch_size"] = m.batch_size;
  j["optimizer"] = m.optimizer;
  j["target_layers"] = m.target_layers;
  j["quantized"] = m.quantized;
  j["config_fingerprint"] = m.config_fingerprint;
  return j.dump(2) + "\n";
}

TrainerManifest manifest_from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  try {
    TrainerManifest m;
    const auto scope = j.at("adapter_scope").get<std::string>();
    if (scope != "per_task" && scope != "shared") throw ParseError("unknown adapter_scope '" + scope + "'", 0);
    m.adapter_scope = scope == "shared" ? AdapterScope::shared : AdapterScope::per_task;
    m.rank = j.at("rank").get<int>();
    m.alpha = j.at("alpha").get<int>();
    m.lr = j.at("lr").get<double>();
    m.epochs = j.at("epochs").get<int>();
    m.batch_size = j.at("batch_size").get<int>();
    m.optimizer = j.at("optimizer").get<std::string>();
    m.target_layers = j.at("target_layers").get<std::vector<std::string>>();
    m.quantized = j.value("quantized", false);
    m.config_fingerprint = j.value("config_fingerprint", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), 0);
  }
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::filesystem::path> emit_training_bundle(std::span<const TTTDataset> datasets,
                                                        const TrainerManifest& manifest,
                                                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& stem, std::string_view records) {
    const auto jsonl = out_dir / (stem + ".jsonl");
    const auto man = out_dir / (stem + ".manifest.json");
    write_file(jsonl, records);
    write_file(man, manifest_to_json(manifest));
    written.push_back(jsonl);
    written.push_back(man);
  };
  if (manifest.adapter_scope == AdapterScope::shared) {
    std::string all;
    for (const auto& ds : datasets) all += write_jsonl(ds.records);
    emit("shared", all);
  } else {
    for (const auto& ds : datasets) emit(ds.task_id, write_jsonl(ds.records));
  }
  return written;
}

}  // namespace ttt
