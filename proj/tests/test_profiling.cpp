/*
 * Copyright 2026 The sdag Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "support.hpp"

#include "sdag/error.hpp"
#include "sdag/profiling.hpp"
#include "sdag/question.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>

using namespace sdag;
using namespace sdag::testing;

namespace {

double at(const SubjectScores& s, Subject subj) { return s[index_of(subj)]; }

ProfileStore store_from_raw(const std::map<std::string, SubjectScores>& raw) {
    ProfileStore st;
    for (const auto& [id, r] : raw) st.profiles[id] = make_profile(id, r);
    return st;
}

SubjectScores scores(std::initializer_list<std::pair<Subject, double>> entries) {
    SubjectScores s{};
    for (const auto& [subj, v] : entries) s[index_of(subj)] = v;
    return s;
}

QuestionRecord profiling_question(const std::string& id, const std::string& text, SubjectWeights w) {
    QuestionRecord q;
    q.id = id;
    q.question = text;
    q.options = {"one", "two", "three", "four"};
    q.gold = "A";
    q.subjects = std::move(w);
    q.split = Split::Profiling;
    return q;
}

ModelPool two_model_pool() {
    ModelPool pool;
    pool.models = {{"alpha", "mock", {}}, {"beta", "mock", {}}};
    return pool;
}

} // namespace

TEST_CASE("accumulate: a correct answer credits every weighted subject") {
    const SubjectWeights w{{Subject::Math, 0.5}, {Subject::Physics, 0.3}, {Subject::Biology, 0.2}};
    auto raw = accumulate_scores({{"q1", w, "m", true}});
    CHECK(at(raw["m"], Subject::Math) == doctest::Approx(0.5));
    CHECK(at(raw["m"], Subject::Physics) == doctest::Approx(0.3));
    CHECK(at(raw["m"], Subject::Biology) == doctest::Approx(0.2));

    raw = accumulate_scores({{"q1", w, "m", false}});
    for (double v : raw["m"]) CHECK(v == 0.0);
}

TEST_CASE("accumulate: credit adds across questions") {
    auto raw = accumulate_scores({{"q1", {{Subject::Math, 1.0}}, "m", true},
                                  {"q2", {{Subject::Math, 0.5}, {Subject::Law, 0.5}}, "m", true}});
    CHECK(at(raw["m"], Subject::Math) == doctest::Approx(1.5));
    CHECK(at(raw["m"], Subject::Law) == doctest::Approx(0.5));
    CHECK(std::accumulate(raw["m"].begin(), raw["m"].end(), 0.0) == doctest::Approx(2.0));
}

TEST_CASE("accumulate is independent of input order") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScoredAnswer> results;
        const std::size_t n = 5 + rng.below(40);
        for (std::size_t k = 0; k < n; ++k) {
            results.push_back({"q" + std::to_string(k), to_weights(random_weights(rng)),
                               "m" + std::to_string(rng.below(4)), rng.uniform() < 0.6});
        }
        const auto base = accumulate_scores(results);
        rng.shuffle(results);
        const auto shuffled = accumulate_scores(results);
        REQUIRE(base.size() == shuffled.size());
        for (const auto& [id, s] : base) {
            for (std::size_t j = 0; j < kSubjectCount; ++j) CHECK(std::abs(s[j] - shuffled.at(id)[j]) <= 1e-12);
        }
    }
}

TEST_CASE("normalize examples") {
    auto n = normalize_profile(scores({{Subject::Math, 2}, {Subject::Physics, 1}, {Subject::Biology, 1}}));
    CHECK_FALSE(n.uniform_fallback);
    CHECK(at(n.normalized, Subject::Math) == doctest::Approx(0.5));
    CHECK(at(n.normalized, Subject::Physics) == doctest::Approx(0.25));
    CHECK(at(n.normalized, Subject::Biology) == doctest::Approx(0.25));

    n = normalize_profile(SubjectScores{});
    CHECK(n.uniform_fallback);
    for (double v : n.normalized) CHECK(v == doctest::Approx(1.0 / 15.0));

    n = normalize_profile(scores({{Subject::Math, 3}}));
    CHECK(at(n.normalized, Subject::Math) == 1.0);
    CHECK(at(n.normalized, Subject::Law) == 0.0);
}

TEST_CASE("normalized rows sum to one") {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        SubjectScores raw{};
        for (double& v : raw)
            if (rng.uniform() < 0.5) v = rng.uniform(0.0, 50.0);
        const auto n = normalize_profile(raw);
        const double sum = std::accumulate(n.normalized.begin(), n.normalized.end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("select: strict argmax and lexicographic ties") {
    auto st = store_from_raw({{"A", scores({{Subject::Math, 0.5}, {Subject::Law, 0.5}})},
                              {"B", scores({{Subject::Math, 0.3}, {Subject::Law, 0.7}})}});
    CHECK(select_model(Subject::Math, st) == "A");
    CHECK(select_model(Subject::Law, st) == "B");

    st = store_from_raw({{"zeta", scores({{Subject::Math, 0.4}, {Subject::Law, 0.6}})},
                         {"eta", scores({{Subject::Math, 0.4}, {Subject::Law, 0.6}})}});
    CHECK(select_model(Subject::Math, st) == "eta");

    try {
        select_model(Subject::Math, ProfileStore{});
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyPool);
    }
}

TEST_CASE("selection is invariant to scaling one model's raw scores") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, SubjectScores> raw;
        for (int m = 0; m < 4; ++m) {
            SubjectScores s{};
            for (double& v : s) v = static_cast<double>(rng.below(6));  // small integers make ties common
            raw["m" + std::to_string(m)] = s;
        }
        const auto base = store_from_raw(raw);
        auto scaled_raw = raw;
        const auto victim = "m" + std::to_string(rng.below(4));
        const double c = trial % 2 == 0 ? 10.0 : rng.uniform(0.01, 100.0);
        for (double& v : scaled_raw[victim]) v *= c;
        const auto scaled = store_from_raw(scaled_raw);
        for (auto s : all_subjects()) CHECK(select_model(s, base) == select_model(s, scaled));
    }
}

TEST_CASE("profiling run: a model that only knows math peaks at math") {
    MockScript script;
    script.rules.push_back(reply_rule("The integral evaluates nicely. <<A>>", {{"model", "alpha"}}));
    script.rules.back().contains = "integral";
    script.rules.push_back(reply_rule("Not sure. <<B>>", {{"model", "alpha"}}));
    script.rules.push_back(reply_rule("<<A>>", {{"model", "beta"}}));
    auto reg = registry_with("mock", script);

    const std::vector<QuestionRecord> split{
        profiling_question("p1", "Compute the integral of x.", {{Subject::Math, 0.8}, {Subject::Physics, 0.2}}),
        profiling_question("p2", "Name the organelle.", {{Subject::Biology, 1.0}}),
        profiling_question("p3", "Which statute applies?", {{Subject::Law, 0.7}, {Subject::Economics, 0.3}}),
    };
    ProfilingConfig cfg;
    cfg.seed = 5;
    cfg.date = "2026-01-01";
    const auto store = run_profiling(two_model_pool(), split, *reg, cfg);

    REQUIRE(store.profiles.size() == 2);
    const auto& alpha = store.profiles.at("alpha");
    CHECK(at(alpha.normalized, Subject::Math) == doctest::Approx(0.8));
    CHECK(at(alpha.normalized, Subject::Physics) == doctest::Approx(0.2));
    CHECK(at(alpha.normalized, Subject::Biology) == 0.0);
    CHECK(select_model(Subject::Math, store) == "alpha");
    CHECK(select_model(Subject::Biology, store) == "beta");

    CHECK(store.provenance.grading_calls == 6);
    CHECK(store.provenance.outcomes.size() == 6);
    CHECK(reg->counter().total() == 6);
    CHECK(store.provenance.seed == 5);
    CHECK(store.provenance.date == "2026-01-01");
    CHECK_FALSE(store.provenance.profiling_set_hash.empty());
}

TEST_CASE("profiling run: failed calls count as incorrect and are flagged") {
    MockScript script;
    script.rules.push_back(reply_rule("", {{"model", "alpha"}}));
    script.rules.back().error = "transport";
    script.rules.push_back(reply_rule("<<A>>"));
    auto reg = registry_with("mock", script);
    const std::vector<QuestionRecord> split{profiling_question("p1", "q", {{Subject::Math, 1.0}})};
    const auto store = run_profiling(two_model_pool(), split, *reg);
    CHECK(store.profiles.at("alpha").uniform_fallback);
    CHECK_FALSE(store.profiles.at("beta").uniform_fallback);
    std::size_t flagged = 0;
    for (const auto& o : store.provenance.outcomes) {
        if (o.model_id == "alpha") {
            CHECK(o.error);
            CHECK_FALSE(o.correct);
            ++flagged;
        }
    }
    CHECK(flagged == 1);
}

TEST_CASE("profiling run: schedule does not change the store") {
    MockScript script;
    script.rules.push_back(reply_rule("<<A>>", {{"model", "alpha"}}));
    script.rules.push_back(reply_rule("<<C>>"));
    std::vector<QuestionRecord> split;
    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
        auto q = profiling_question("p" + std::to_string(k), "question " + std::to_string(k),
                                    to_weights(random_weights(rng)));
        q.gold = k % 3 == 0 ? "C" : "A";
        split.push_back(q);
    }
    ProfilingConfig cfg;
    cfg.date = "2026-01-01";
    auto reg1 = registry_with("mock", script);
    const auto serial = run_profiling(two_model_pool(), split, *reg1, cfg);
    cfg.parallelism = 6;
    auto reg2 = registry_with("mock", script);
    const auto parallel = run_profiling(two_model_pool(), split, *reg2, cfg);
    CHECK(serial == parallel);
    CHECK(to_json(serial).dump() == to_json(parallel).dump());
}

TEST_CASE("profiling run: empty split") {
    auto reg = registry_with("mock", MockScript{{reply_rule("<<A>>")}, 0, 10.0, 100.0, {}});
    try {
        run_profiling(two_model_pool(), {}, *reg);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySplit);
    }
}

TEST_CASE("profile store round-trip") {
    ProfileStore st = store_from_raw({{"a", scores({{Subject::Math, 1.0 / 3.0}})}, {"b", SubjectScores{}}});
    st.provenance.date = "2026-02-03";
    st.provenance.seed = 9;
    st.provenance.profiling_set_hash = "abc";
    st.provenance.grading_calls = 2;
    st.provenance.outcomes = {{"a", "q1", true, false}, {"b", "q1", false, true}};
    const auto path = std::filesystem::temp_directory_path() / "sdag_profiles_roundtrip.json";
    save_profile_store(st, path);
    CHECK(load_profile_store(path) == st);
    std::filesystem::remove(path);

    auto j = to_json(st);
    j["version"] = 7;
    CHECK_THROWS_AS(profile_store_from_json(j), Error);
}

TEST_CASE("pool parsing") {
    const nlohmann::json j = {{"models",
                               {{{"model_id", "m1"}, {"backend", "b"}, {"declared_subjects", {"Math", "Physics"}}},
                                {{"model_id", "m2"}, {"backend", "b"}}}}};
    const auto pool = pool_from_json(j);
    REQUIRE(pool.models.size() == 2);
    CHECK(pool.at("m1").declared_subjects == std::vector<Subject>{Subject::Math, Subject::Physics});
    CHECK(pool.model_ids() == std::vector<std::string>{"m1", "m2"});
    CHECK_THROWS_AS(pool.at("nope"), Error);

    auto dup = j;
    dup["models"][1]["model_id"] = "m1";
    CHECK_THROWS_AS(pool_from_json(dup), Error);
}
