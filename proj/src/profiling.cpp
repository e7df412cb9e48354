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

#include "sdag/profiling.hpp"

#include "sdag/error.hpp"
#include "sdag/hash.hpp"
#include "sdag/parallel.hpp"
#include "sdag/prompts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>
#include <tuple>

namespace sdag {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Pool

const ModelPoolEntry& ModelPool::at(const std::string& model_id) const {
    for (const auto& m : models) {
        if (m.model_id == model_id) return m;
    }
    throw Error(ErrorCode::ConfigError, "model " + model_id + " is not in the pool");
}

std::vector<std::string> ModelPool::model_ids() const {
    std::vector<std::string> ids;
    for (const auto& m : models) ids.push_back(m.model_id);
    return ids;
}

ModelPool pool_from_json(const json& j, const std::filesystem::path& base_dir) {
    try {
        ModelPool pool;
        for (const auto& b : j.value("backends", json::array())) {
            pool.backends.push_back(backend_config_from_json(b, base_dir));
        }
        std::set<std::string> ids;
        for (const auto& m : j.at("models")) {
            ModelPoolEntry e;
            e.model_id = m.at("model_id").get<std::string>();
            e.backend = m.value("backend", e.model_id);
            for (const auto& s : m.value("declared_subjects", std::vector<std::string>{})) {
                e.declared_subjects.push_back(parse_subject(s));
            }
            if (!ids.insert(e.model_id).second) throw Error(ErrorCode::ConfigError, "duplicate model " + e.model_id);
            if (!pool.backends.empty() &&
                std::none_of(pool.backends.begin(), pool.backends.end(),
                             [&](const BackendConfig& c) { return c.name == e.backend; })) {
                throw Error(ErrorCode::ConfigError, "model " + e.model_id + " names unknown backend " + e.backend);
            }
            pool.models.push_back(std::move(e));
        }
        return pool;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed pool: ") + e.what());
    }
}

json to_json(const ModelPool& pool) {
    json models = json::array();
    for (const auto& m : pool.models) {
        json entry = {{"model_id", m.model_id}, {"backend", m.backend}};
        if (!m.declared_subjects.empty()) {
            json subjects = json::array();
            for (auto s : m.declared_subjects) subjects.push_back(std::string(subject_name(s)));
            entry["declared_subjects"] = subjects;
        }
        models.push_back(std::move(entry));
    }
    json out = {{"models", models}};
    if (!pool.backends.empty()) {
        json backends = json::array();
        for (const auto& b : pool.backends) backends.push_back(to_json(b));
        out["backends"] = backends;
    }
    return out;
}

ModelPool load_pool(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return pool_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Scoring and selection

std::map<std::string, SubjectScores> accumulate_scores(std::vector<ScoredAnswer> results) {
    std::sort(results.begin(), results.end(), [](const ScoredAnswer& a, const ScoredAnswer& b) {
        return std::tie(a.model_id, a.question_id, a.correct, a.weights) <
               std::tie(b.model_id, b.question_id, b.correct, b.weights);
    });
    std::map<std::string, SubjectScores> raw;
    for (const auto& r : results) {
        auto& row = raw[r.model_id];
        if (!r.correct) continue;
        for (const auto& [subject, w] : r.weights) row[index_of(subject)] += w;
    }
    return raw;
}

NormalizedScores normalize_profile(const SubjectScores& raw) {
    NormalizedScores out;
    double total = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidArgument, "raw scores must be finite and >= 0");
        total += v;
    }
    if (total == 0.0) {
        out.normalized.fill(1.0 / static_cast<double>(kSubjectCount));
        out.uniform_fallback = true;
        return out;
    }
    for (std::size_t j = 0; j < kSubjectCount; ++j) out.normalized[j] = raw[j] / total;
    return out;
}

ModelProfile make_profile(const std::string& model_id, const SubjectScores& raw) {
    const auto n = normalize_profile(raw);
    return {model_id, raw, n.normalized, n.uniform_fallback};
}

std::string select_model(Subject subject, const ProfileStore& store) {
    if (store.profiles.empty()) throw Error(ErrorCode::EmptyPool, "no profiled models");
    const std::string* best = nullptr;
    double best_score = -1.0;
    for (const auto& [id, profile] : store.profiles) {
        const double c = profile.normalized[index_of(subject)];
        if (c > best_score) {
            best_score = c;
            best = &id;
        }
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Profiling run

namespace {

std::string today_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

std::string profiling_set_hash(const std::vector<const QuestionRecord*>& questions) {
    std::uint64_t h = kFnvOffsetBasis;
    for (const auto* q : questions) {
        h = fnv1a64(q->id, h);
        h = fnv1a64(q->gold, h);
        for (const auto& [s, w] : *q->subjects) {
            h = fnv1a64(subject_name(s), h);
            h = fnv1a64(json(w).dump(), h);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

ProfileStore run_profiling(const ModelPool& pool, const std::vector<QuestionRecord>& profiling_split,
                           BackendRegistry& backends, const ProfilingConfig& cfg) {
    if (profiling_split.empty()) throw Error(ErrorCode::EmptySplit, "profiling split is empty");
    if (pool.models.empty()) throw Error(ErrorCode::EmptyPool, "model pool is empty");
    for (const auto& m : pool.models) {
        if (!backends.contains(m.backend)) {
            throw Error(ErrorCode::ConfigError, "model " + m.model_id + " names unknown backend " + m.backend);
        }
    }

    std::vector<const QuestionRecord*> questions;
    for (const auto& q : profiling_split) {
        if (!q.subjects) throw Error(ErrorCode::InvalidArgument, "profiling question " + q.id + " has no subjects");
        check_record(q);
        questions.push_back(&q);
    }
    std::sort(questions.begin(), questions.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<std::string> model_ids = pool.model_ids();
    std::sort(model_ids.begin(), model_ids.end());

    const std::size_t total = model_ids.size() * questions.size();
    std::vector<ProfilingOutcome> outcomes(total);
    parallel_for(total, cfg.parallelism, [&](std::size_t k) {
        const auto& model = pool.at(model_ids[k / questions.size()]);
        const auto& q = *questions[k % questions.size()];
        ProfilingOutcome& o = outcomes[k];
        o.model_id = model.model_id;
        o.question_id = q.id;

        ChatRequest req;
        req.backend = model.backend;
        req.user = render_single_model_prompt(format_question(q));
        req.metadata = {{"question_id", q.id}, {"model", model.model_id}, {"mode", "profiling"}};
        try {
            const auto answer = extract_answer(backends.complete(req).text);
            o.correct = answer && *answer == q.gold;
        } catch (const Error&) {
            o.error = true;
        }
    });

    std::vector<ScoredAnswer> scored;
    scored.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        scored.push_back({outcomes[k].question_id, *questions[k % questions.size()]->subjects, outcomes[k].model_id,
                          outcomes[k].correct});
    }
    auto raw = accumulate_scores(std::move(scored));

    ProfileStore store;
    for (const auto& id : model_ids) store.profiles[id] = make_profile(id, raw[id]);
    store.provenance.profiling_set_hash = profiling_set_hash(questions);
    store.provenance.date = cfg.date.empty() ? today_utc() : cfg.date;
    store.provenance.seed = cfg.seed;
    store.provenance.grading_calls = total;
    store.provenance.outcomes = std::move(outcomes);
    return store;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json scores_to_json(const SubjectScores& s) {
    json j = json::object();
    for (std::size_t k = 0; k < kSubjectCount; ++k) j[std::string(subject_name(subject_at(k)))] = s[k];
    return j;
}

SubjectScores scores_from_json(const json& j) {
    SubjectScores s{};
    if (!j.is_object()) throw Error(ErrorCode::CorruptCheckpoint, "score row must be an object");
    for (const auto& [name, v] : j.items()) {
        if (!v.is_number()) throw Error(ErrorCode::CorruptCheckpoint, "score for " + name + " is not a number");
        s[index_of(parse_subject(name))] = v.get<double>();
    }
    return s;
}

} // namespace

json to_json(const ProfileStore& store) {
    json profiles = json::object();
    for (const auto& [id, p] : store.profiles) {
        profiles[id] = {{"raw", scores_to_json(p.raw)},
                        {"normalized", scores_to_json(p.normalized)},
                        {"uniform_fallback", p.uniform_fallback}};
    }
    json outcomes = json::array();
    for (const auto& o : store.provenance.outcomes) {
        outcomes.push_back(
            {{"model_id", o.model_id}, {"question_id", o.question_id}, {"correct", o.correct}, {"error", o.error}});
    }
    return {{"version", kProfileStoreVersion},
            {"provenance",
             {{"profiling_set_hash", store.provenance.profiling_set_hash},
              {"date", store.provenance.date},
              {"seed", store.provenance.seed},
              {"grading_calls", store.provenance.grading_calls},
              {"outcomes", outcomes}}},
            {"profiles", profiles}};
}

ProfileStore profile_store_from_json(const json& j) {
    try {
        if (!j.is_object() || !j.contains("version")) throw Error(ErrorCode::CorruptCheckpoint, "missing version");
        const int version = j.at("version").get<int>();
        if (version != kProfileStoreVersion) {
            throw Error(ErrorCode::VersionMismatch, "profile store version " + std::to_string(version));
        }
        ProfileStore store;
        const auto& prov = j.at("provenance");
        store.provenance.profiling_set_hash = prov.value("profiling_set_hash", std::string{});
        store.provenance.date = prov.value("date", std::string{});
        store.provenance.seed = prov.value("seed", std::uint64_t{0});
        store.provenance.grading_calls = prov.value("grading_calls", std::uint64_t{0});
        for (const auto& o : prov.value("outcomes", json::array())) {
            store.provenance.outcomes.push_back({o.at("model_id").get<std::string>(),
                                                 o.at("question_id").get<std::string>(), o.at("correct").get<bool>(),
                                                 o.value("error", false)});
        }
        for (const auto& [id, p] : j.at("profiles").items()) {
            ModelProfile mp;
            mp.model_id = id;
            mp.raw = scores_from_json(p.at("raw"));
            mp.normalized = scores_from_json(p.at("normalized"));
            mp.uniform_fallback = p.value("uniform_fallback", false);
            store.profiles[id] = mp;
        }
        return store;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("malformed profile store: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptCheckpoint) throw;
        throw Error(ErrorCode::CorruptCheckpoint, e.what());
    }
}

void save_profile_store(const ProfileStore& store, const std::filesystem::path& path) {
    write_text_file(path, to_json(store).dump(2) + "\n");
}

ProfileStore load_profile_store(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    return profile_store_from_json(j);
}

} // namespace sdag
