#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "ttt/inference.hpp"
#include "ttt/voting.hpp"

using namespace ttt;

namespace {

const Grid A = make_grid({{1}}), B = make_grid({{2}}), C = make_grid({{3}});

std::vector<Candidate> cands(const Transform& t, std::initializer_list<Grid> grids) {
  std::vector<Candidate> out;
  int p = 0;
  for (const auto& g : grids) out.push_back({g, t, p++, ""});
  return out;
}

std::vector<Candidate> concat(std::initializer_list<std::vector<Candidate>> parts) {
  std::vector<Candidate> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

GroupSelection sel(const Transform& t, std::vector<Grid> grids) {
  GroupSelection s;
  s.transform = t;
  s.counts.assign(grids.size(), 1);
  s.grids = std::move(grids);
  return s;
}

// Counts predictor calls; answers with the rule applied to the test input.
class CountingPredictor final : public Predictor {
 public:
  explicit CountingPredictor(MockRule rule) : inner_(std::move(rule)) {}
  Prediction predict(const PromptText& p) override {
    ++calls;
    return inner_.predict(p);
  }
  std::string describe() const override { return "counting"; }
  std::atomic<int> calls{0};

 private:
  MockPredictor inner_;
};

class DownPredictor final : public Predictor {
 public:
  Prediction predict(const PromptText&) override { throw PredictorUnavailable("down"); }
  std::string describe() const override { return "down"; }
};

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("demo permutations") {
    const Task t = test_support::random_task(1, 4);
    InferenceConfig cfg;
    const auto perms = demo_permutations(t, 0, 0, cfg);
    REQUIRE(perms.size() == 2);
    CHECK(perms[0] == std::vector<std::size_t>{0, 1, 2, 3});
    auto sorted = perms[1];
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == perms[0]);
    CHECK(demo_permutations(t, 0, 0, cfg) == perms);
    cfg.permutations = 0;
    CHECK_THROWS(demo_permutations(t, 0, 0, cfg));
  }

  TEST_CASE("transformed view") {
    const Task t = test_support::random_task(2, 3, 6);
    const std::vector<std::size_t> perm{2, 0, 1};
    const PromptView v = transformed_view(t, Rotate{1}, perm, 0);
    REQUIRE(v.demos.size() == 3);
    CHECK(v.demos[0].input == apply_to_grid(Rotate{1}, t.train[2].input));
    CHECK(v.demos[1].output == apply_to_grid(Rotate{1}, t.train[0].output));
    CHECK(v.test_input == apply_to_grid(Rotate{1}, t.test[0].input));
    CHECK_THROWS_AS(transformed_view(t, IncreaseResolution{2}, perm, 0), NonInvertibleError);
  }

  TEST_CASE("candidates are inverse-mapped to the original frame") {
    for (const Transform& rule : dihedral_group()) {
      const Task t = test_support::rule_task(3, rule, 3);
      CountingPredictor p(fitting_rule());
      const auto set = generate_candidates(t, 0, p, InferenceConfig{});
      CAPTURE(to_string(rule));
      CHECK(p.calls == 12);
      CHECK(set.candidates.size() == 12);
      CHECK(set.dropped.empty());
      for (const auto& c : set.candidates) CHECK(c.grid == *t.test[0].output);
    }
  }

  TEST_CASE("canonical order and jobs") {
    const Task t = test_support::rule_task(4, Flip{0}, 3);
    MockPredictor p(fitting_rule());
    InferenceConfig cfg;
    const auto serial = generate_candidates(t, 0, p, cfg);
    const auto set = inference_transform_set();
    for (std::size_t i = 0; i < serial.candidates.size(); ++i) {
      CHECK(serial.candidates[i].transform == set[i / 2]);
      CHECK(serial.candidates[i].perm_index == int(i % 2));
    }
    cfg.jobs = 4;
    CHECK(candidates_to_jsonl(generate_candidates(t, 0, p, cfg)) == candidates_to_jsonl(serial));
  }

  TEST_CASE("malformed predictions are dropped, not fatal") {
    const Task t = test_support::rule_task(5, Identity{}, 3);
    int n = 0;
    MockPredictor flaky([&](const PromptView& v) -> Grid {
      if (n++ % 3 == 0) throw MalformedPrediction("junk");
      return v.test_input;
    });
    const auto set = generate_candidates(t, 0, flaky, InferenceConfig{});
    CHECK(set.candidates.size() + set.dropped.size() == 12);
    CHECK(set.dropped.size() == 4);
    for (const auto& d : set.dropped) CHECK(d.failure.starts_with("MalformedPrediction"));

    DownPredictor down;
    CHECK_THROWS_AS(generate_candidates(t, 0, down, InferenceConfig{}), PredictorUnavailable);
  }

  TEST_CASE("candidate jsonl") {
    const Task t = test_support::rule_task(6, Rotate{2}, 3, 2);
    int n = 0;
    MockPredictor p([&](const PromptView& v) -> Grid {
      if (n++ == 5) throw MalformedPrediction("junk");
      return apply_to_grid(Rotate{2}, v.test_input);
    });
    const auto s0 = generate_candidates(t, 0, p, InferenceConfig{});
    const auto s1 = generate_candidates(t, 1, p, InferenceConfig{});
    const std::string bytes = candidates_to_jsonl(s0) + candidates_to_jsonl(s1);
    const auto back = candidates_from_jsonl(bytes);
    REQUIRE(back.size() == 2);
    CHECK(back[0].test_index == 0);
    CHECK(back[1].test_index == 1);
    CHECK(back[0].candidates.size() == 11);
    CHECK(back[0].dropped.size() == 1);
    CHECK(candidates_to_jsonl(back[0]) + candidates_to_jsonl(back[1]) == bytes);
    for (std::size_t i = 0; i < s0.candidates.size(); ++i) CHECK(back[0].candidates[i].grid == s0.candidates[i].grid);
    try {
      candidates_from_jsonl(bytes + "{\"task_id\": 3}\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset == 25);
    }
  }
}

TEST_SUITE("voting") {
  TEST_CASE("row and column majority") {
    const std::vector<Grid> rows{make_grid({{1, 1}, {2, 2}}), make_grid({{1, 1}, {3, 3}}), make_grid({{1, 1}, {2, 2}})};
    CHECK(row_majority(rows) == make_grid({{1, 1}, {2, 2}}));
    const std::vector<Grid> same(3, make_grid({{4, 5}}));
    CHECK(row_majority(same) == same[0]);
    CHECK(col_majority(same) == same[0]);
    const std::vector<Grid> mixed{make_grid({{1, 2}, {3, 4}}), make_grid({{1, 2}, {3, 5}}),
                                  make_grid({{9, 9, 9}, {9, 9, 9}, {9, 9, 9}})};
    const Grid m = row_majority(mixed);
    CHECK(m.rows() == 2);
    CHECK(m == make_grid({{1, 2}, {3, 4}}));
    // Columns mix sources: col 0 from one grid, col 1 from another.
    const std::vector<Grid> cols{make_grid({{1, 5}, {2, 6}}), make_grid({{1, 7}, {2, 8}}), make_grid({{3, 7}, {4, 8}})};
    CHECK(col_majority(cols) == make_grid({{1, 7}, {2, 8}}));
    CHECK_THROWS(row_majority(std::vector<Grid>{}));
  }

  TEST_CASE("select_in_group examples") {
    // With a strict majority grid both majorities reproduce it, so no supplement survives dedupe.
    const std::vector<Grid> aab{A, A, B};
    const auto s = select_in_group(Identity{}, aab);
    CHECK(s.grids == std::vector<Grid>{A, B});
    CHECK(s.counts == std::vector<std::size_t>{2, 1});
    CHECK(s.supplements.empty());

    // Row ties resolve to the smaller row, giving a new grid; columns reproduce the first.
    const Grid p = make_grid({{1}, {5}}), q = make_grid({{2}, {4}});
    const std::vector<Grid> pq{p, q};
    const auto sp = select_in_group(Identity{}, pq);
    REQUIRE(sp.grids.size() == 3);
    CHECK(sp.grids[2] == make_grid({{1}, {4}}));
    CHECK(sp.supplements == std::vector<Grid>{make_grid({{1}, {4}})});
    CHECK(sp.counts == std::vector<std::size_t>{1, 1, 0});

    const std::vector<Grid> aaa{A, A, A};
    CHECK(select_in_group(Identity{}, aaa).grids == std::vector<Grid>{A});

    const std::vector<Grid> abcc{A, B, C, C};
    CHECK(select_in_group(Identity{}, abcc).grids == std::vector<Grid>{C, A, B});
    CHECK(select_in_group(Identity{}, std::vector<Grid>{}).grids.empty());

    CHECK(intra_transform_vote(cands(Rotate{1}, {p, q})) == sp.grids);
    CHECK_THROWS(intra_transform_vote(concat({cands(Rotate{1}, {A}), cands(Flip{0}, {A})})));
  }

  TEST_CASE("global vote examples") {
    std::vector<GroupSelection> s1{sel(Rotate{1}, {A, B}), sel(Flip{1}, {A, C}), sel(Identity{}, {B, C})};
    const auto o1 = global_vote(s1);
    CHECK(o1.attempts == std::vector<Grid>{B, C});
    CHECK_FALSE(o1.audit.tie_breaks.empty());
    CHECK(o1.audit.tie_breaks[0].starts_with("lexicographic"));

    std::vector<GroupSelection> s2{sel(Identity{}, {A}), sel(Rotate{1}, {A}), sel(Flip{1}, {B})};
    CHECK(global_vote(s2).attempts == std::vector<Grid>{A, B});
    std::vector<GroupSelection> s3{sel(Identity{}, {A, B, C})};
    CHECK(global_vote(s3).attempts == std::vector<Grid>{A, B});
    CHECK(global_vote(std::vector<GroupSelection>{}).attempts.empty());

    // C beats A lexicographically only without identity priority.
    std::vector<GroupSelection> s4{sel(Rotate{1}, {A}), sel(Identity{}, {C})};
    const auto o4 = global_vote(s4);
    CHECK(o4.attempts == std::vector<Grid>{C, A});
    CHECK(o4.audit.tie_breaks[0].starts_with("identity_priority"));
  }

  TEST_CASE("frequency weighting differs from endorsement") {
    GroupSelection heavy = sel(Rotate{1}, {A, B});
    heavy.counts = {5, 1};
    std::vector<GroupSelection> s{heavy, sel(Flip{0}, {B}), sel(Transpose{}, {B})};
    CHECK(global_vote(s, GlobalWeighting::endorsement).attempts.front() == B);
    CHECK(global_vote(s, GlobalWeighting::frequency).attempts.front() == A);
  }

  TEST_CASE("flattened vote examples") {
    CHECK(flattened_vote(cands(Rotate{1}, {A, A, A, B, B, C})).attempts == std::vector<Grid>{A, B});
    const auto id_last = concat({cands(Rotate{1}, {A}), cands(Flip{0}, {B}), cands(Identity{}, {C})});
    CHECK(flattened_vote(id_last).attempts.front() == C);
    CHECK(flattened_vote(cands(Identity{}, {B})).attempts == std::vector<Grid>{B});
    CHECK(flattened_vote(std::vector<Candidate>{}).attempts.empty());
  }

  TEST_CASE("oracle select") {
    std::vector<Candidate> twelve;
    for (int i = 0; i < 11; ++i) twelve.push_back({A, Identity{}, 0, ""});
    twelve.push_back({B, Rotate{1}, 1, ""});
    CHECK(oracle_select(twelve, B));
    CHECK_FALSE(oracle_select(twelve, C));
  }

  TEST_CASE("unanimous groups give one attempt and no supplements") {
    std::vector<Candidate> all;
    for (const auto& t : inference_transform_set())
      for (int p = 0; p < 2; ++p) all.push_back({A, t, p, ""});
    const auto o = hierarchical_vote(all);
    CHECK(o.attempts == std::vector<Grid>{A});
    for (const auto& g : o.audit.groups) CHECK(g.supplements.empty());
  }

  TEST_CASE("order independence and oracle agreement on random sets") {
    std::mt19937_64 rng(21);
    const auto transforms = inference_transform_set();
    std::vector<Grid> palette{A, B, C, make_grid({{1, 2}}), make_grid({{2, 1}}), make_grid({{1}, {2}})};
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<Candidate> cs;
      const int n = 1 + int(rng() % 14);
      for (int i = 0; i < n; ++i)
        cs.push_back({palette[rng() % palette.size()], transforms[rng() % transforms.size()], int(rng() % 2), ""});
      const auto h = hierarchical_vote(cs);
      const auto f = flattened_vote(cs);
      auto shuffled = cs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(hierarchical_vote(shuffled).attempts == h.attempts);
      CHECK(vote_audit_to_json(hierarchical_vote(shuffled).audit) == vote_audit_to_json(h.audit));
      CHECK(flattened_vote(shuffled).attempts == f.attempts);
      CHECK(h.attempts.size() <= 2);
      if (h.attempts.size() == 2) CHECK(h.attempts[0] != h.attempts[1]);
      for (const auto& g : h.attempts) {
        const bool supplement = std::any_of(h.audit.groups.begin(), h.audit.groups.end(), [&](const GroupSelection& s) {
          return std::find(s.supplements.begin(), s.supplements.end(), g) != s.supplements.end();
        });
        CHECK((oracle_select(cs, g) || supplement));
      }

      // Independent implementation.
      std::vector<std::pair<bool, oracle::Selection>> groups;
      std::vector<std::pair<bool, oracle::Matrix>> flat;
      for (const auto& t : transforms) {
        std::vector<oracle::Matrix> members;
        for (const auto& c : cs)
          if (c.transform == t) members.push_back(c.grid.to_matrix());
        if (!members.empty()) groups.emplace_back(t.is<Identity>(), oracle::select_top3(members));
      }
      for (const auto& c : cs) flat.emplace_back(c.transform.is<Identity>(), c.grid.to_matrix());
      std::vector<oracle::Matrix> got_h, got_f;
      for (const auto& g : h.attempts) got_h.push_back(g.to_matrix());
      for (const auto& g : f.attempts) got_f.push_back(g.to_matrix());
      CHECK(got_h == oracle::global_top2(groups, false));
      CHECK(got_f == oracle::flattened_top2(flat));
      std::vector<oracle::Matrix> got_freq;
      for (const auto& g : hierarchical_vote(cs, GlobalWeighting::frequency).attempts) got_freq.push_back(g.to_matrix());
      CHECK(got_freq == oracle::global_top2(groups, true));
    }
  }

  TEST_CASE("audit json") {
    const auto o = hierarchical_vote(concat({cands(Identity{}, {A, B}), cands(Rotate{1}, {A})}));
    const auto j = nlohmann::json::parse(vote_audit_to_json(o.audit));
    CHECK(j["groups"].size() == 2);
    CHECK(j["final_tally"][0]["grid"] == "[[1]]");
    CHECK(j["final_tally"][0]["weight"] == 2);
    CHECK(j.contains("tie_breaks"));
  }
}
