#include <doctest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "ttt/codec.hpp"
#include "ttt/rng.hpp"
#include "ttt/ttt_data.hpp"

using namespace ttt;
namespace fs = std::filesystem;

namespace {

bool identity_record(const TTTRecord& r) {
  const Transform t = parse_transform(r.source.transform);
  return t.is<Identity>() || t.is<ColorPermutation>();
}

}  // namespace

TEST_SUITE("ttt_data") {
  TEST_CASE("leave_one_out") {
    const Task t4 = test_support::random_task(1, 4);
    const auto loo = leave_one_out(t4);
    REQUIRE(loo.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(loo[j].demos.size() == 3);
      CHECK(loo[j].probe == t4.train[j]);
      std::vector<Example> rest;
      for (std::size_t i = 0; i < 4; ++i)
        if (i != j) rest.push_back(t4.train[i]);
      CHECK(loo[j].demos == rest);
    }
    const auto loo2 = leave_one_out(test_support::random_task(2, 2));
    CHECK(loo2.size() == 2);
    CHECK(loo2[0].demos.size() == 1);
    const auto loo1 = leave_one_out(test_support::random_task(3, 1));
    CHECK(loo1.size() == 1);
    CHECK(loo1[0].demos.empty());
  }

  TEST_CASE("add_permutations") {
    const auto loo = leave_one_out(test_support::random_task(4, 5));
    const auto perms = add_permutations(loo[0], 2, 99);
    REQUIRE(perms.size() == 3);
    CHECK(perms[0].demos == loo[0].demos);
    for (const auto& p : perms) {
      CHECK(p.probe == loo[0].probe);
      CHECK(p.demos.size() == loo[0].demos.size());
    }
    CHECK(add_permutations(loo[0], 2, 99)[2].demos == perms[2].demos);
    const auto small = leave_one_out(test_support::random_task(5, 2));
    for (const auto& p : add_permutations(small[0], 2, 1)) CHECK(p.demos == small[0].demos);
  }

  TEST_CASE("dataset counts and cap policy") {
    const Task t = test_support::random_task(6, 4, 8);
    TTTDataConfig cfg;
    cfg.seed = 5;
    cfg.cap = 100000;
    const auto full = build_ttt_dataset(t, cfg);
    CHECK(full.records.size() == 4 * 3 * 21);
    CHECK(full.stats.size_dropped == 0);

    cfg.cap = 250;
    const auto capped = build_ttt_dataset(t, cfg);
    CHECK(capped.records.size() == 250);
    CHECK(std::count_if(capped.records.begin(), capped.records.end(), identity_record) == 12);

    cfg.cap = 10;
    const auto tiny = build_ttt_dataset(t, cfg);
    CHECK(tiny.records.size() == 10);
    CHECK(std::all_of(tiny.records.begin(), tiny.records.end(), identity_record));

    cfg.cap = 250;
    cfg.loss_mode = LossMode::test_only;
    for (const auto& r : build_ttt_dataset(t, cfg).records) CHECK(r.loss_spans.size() == 1);

    cfg.use_transforms = false;
    CHECK(build_ttt_dataset(t, cfg).records.size() == 12);
  }

  TEST_CASE("oversized records are dropped") {
    const Task t = test_support::random_task(7, 3, 40, 40);
    TTTDataConfig cfg;
    cfg.cap = 100000;
    const auto ds = build_ttt_dataset(t, cfg);
    CHECK(ds.stats.size_dropped > 0);
    CHECK(ds.records.size() + ds.stats.size_dropped == 3 * 3 * 21);
  }

  TEST_CASE("e2e dataset") {
    const Task t = test_support::random_task(8, 4, 8);
    TTTDataConfig cfg;
    cfg.use_transforms = false;
    const auto plain = build_e2e_dataset(t, cfg);
    REQUIRE(plain.records.size() == 4);
    for (const auto& r : plain.records) {
      CHECK(r.loss_spans.size() == 1);
      CHECK(oracle::walk_prompt(r.prompt.text).inputs.size() == 1);
    }
    cfg.use_transforms = true;
    CHECK(build_e2e_dataset(t, cfg).records.size() == 84);
  }

  TEST_CASE("provenance replays to the original pair") {
    const Task t = test_support::random_task(9, 4, 8);
    TTTDataConfig cfg;
    cfg.seed = 17;
    for (const auto& r : build_ttt_dataset(t, cfg).records) {
      CAPTURE(r.source.transform);
      const Transform tr = parse_transform(r.source.transform);
      const Example& src = t.train.at(static_cast<std::size_t>(r.source.loo_index));
      const auto layout = oracle::walk_prompt(r.prompt.text);
      const auto& [is, ie] = layout.inputs.back();
      const auto& [os, oe] = layout.outputs.back();
      CHECK(r.prompt.text.substr(is, ie - is) == render_grid_text(apply_to_grid(tr, src.input)));
      CHECK(r.prompt.text.substr(os, oe - os) == render_grid_text(apply_to_grid(tr, src.output)));
    }
  }

  TEST_CASE("determinism") {
    const Task t = test_support::random_task(10, 4, 8);
    TTTDataConfig cfg;
    cfg.seed = 3;
    const std::string a = write_jsonl(build_ttt_dataset(t, cfg).records);
    CHECK(write_jsonl(build_ttt_dataset(t, cfg).records) == a);
    cfg.seed = 4;
    CHECK(write_jsonl(build_ttt_dataset(t, cfg).records) != a);
  }

  TEST_CASE("manifest and bundle") {
    TrainerManifest m;
    CHECK(m.rank == 128);
    CHECK(m.alpha == 16);
    CHECK(m.epochs == 2);
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
    m.quantized = true;
    m.config_fingerprint = "abc";
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
    CHECK_THROWS_AS(manifest_from_json("{\"rank\": \"x\"}"), ParseError);

    const fs::path dir = test_support::temp_dir("bundle");
    std::vector<TTTDataset> sets;
    TTTDataConfig cfg;
    cfg.cap = 5;
    for (int i = 0; i < 3; ++i) sets.push_back(build_ttt_dataset(test_support::random_task(20 + i, 3, 5), cfg));
    const auto per_task = emit_training_bundle(sets, TrainerManifest{}, dir / "per");
    CHECK(per_task.size() == 6);
    for (const auto& s : sets) {
      CHECK(fs::exists(dir / "per" / (s.task_id + ".jsonl")));
      CHECK(read_jsonl(read_file(dir / "per" / (s.task_id + ".jsonl"))) == s.records);
      CHECK(manifest_from_json(read_file(dir / "per" / (s.task_id + ".manifest.json"))) == TrainerManifest{});
    }
    TrainerManifest shared;
    shared.adapter_scope = AdapterScope::shared;
    const auto one = emit_training_bundle(sets, shared, dir / "shared");
    CHECK(one.size() == 2);
    CHECK(read_jsonl(read_file(dir / "shared" / "shared.jsonl")).size() == 15);
    CHECK_THROWS_AS(emit_training_bundle(sets, shared, "/proc/forbidden/x"), Error);
  }
}
