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

#pragma once

#include "sdag/backend.hpp"
#include "sdag/question.hpp"
#include "sdag/subject.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdag {

struct ModelPoolEntry {
    std::string model_id;
    std::string backend;
    std::vector<Subject> declared_subjects;  ///< documentation only
};

struct ModelPool {
    std::vector<ModelPoolEntry> models;
    std::vector<BackendConfig> backends;  ///< optional inline backend definitions

    const ModelPoolEntry& at(const std::string& model_id) const;
    std::vector<std::string> model_ids() const;
};

/// {"models": [{model_id, backend, declared_subjects?}], "backends": [...]}.
/// Rejects duplicate model ids and (when backends are inline) unresolved refs.
ModelPool load_pool(const std::filesystem::path& path);
ModelPool pool_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ModelPool& pool);

using SubjectScores = std::array<double, kSubjectCount>;

struct ModelProfile {
    std::string model_id;
    SubjectScores raw{};
    SubjectScores normalized{};
    bool uniform_fallback = false;

    friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

struct ProfilingOutcome {
    std::string model_id;
    std::string question_id;
    bool correct = false;
    bool error = false;

    friend bool operator==(const ProfilingOutcome&, const ProfilingOutcome&) = default;
};

struct ProfileProvenance {
    std::string profiling_set_hash;
    std::string date;
    std::uint64_t seed = 0;
    std::uint64_t grading_calls = 0;
    std::vector<ProfilingOutcome> outcomes;

    friend bool operator==(const ProfileProvenance&, const ProfileProvenance&) = default;
};

struct ProfileStore {
    std::map<std::string, ModelProfile> profiles;
    ProfileProvenance provenance;

    friend bool operator==(const ProfileStore&, const ProfileStore&) = default;
};

/// One graded profiling answer.
struct ScoredAnswer {
    std::string question_id;
    SubjectWeights weights;
    std::string model_id;
    bool correct = false;
};

/// Credits each correct answer with its question's subject weights. Summation
/// runs in (model, question) order so the result is independent of input order.
std::map<std::string, SubjectScores> accumulate_scores(std::vector<ScoredAnswer> results);

struct NormalizedScores {
    SubjectScores normalized{};
    bool uniform_fallback = false;
};

/// Row normalization; all-zero rows fall back to uniform 1/15 and set the flag.
NormalizedScores normalize_profile(const SubjectScores& raw);

ModelProfile make_profile(const std::string& model_id, const SubjectScores& raw);

/// argmax over models of the normalized score for `subject`; ties go to the
/// lexicographically smallest model id. Throws EmptyPool.
std::string select_model(Subject subject, const ProfileStore& store);

struct ProfilingConfig {
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    std::string date;  ///< provenance stamp; empty = today (UTC)
};

/// One single-model CoT call per (model, question), graded against gold.
/// Failed calls count as incorrect and are flagged in the provenance.
ProfileStore run_profiling(const ModelPool& pool, const std::vector<QuestionRecord>& profiling_split,
                           BackendRegistry& backends, const ProfilingConfig& cfg = {});

inline constexpr int kProfileStoreVersion = 1;

nlohmann::json to_json(const ProfileStore& store);
ProfileStore profile_store_from_json(const nlohmann::json& j);
void save_profile_store(const ProfileStore& store, const std::filesystem::path& path);
ProfileStore load_profile_store(const std::filesystem::path& path);

} // namespace sdag
