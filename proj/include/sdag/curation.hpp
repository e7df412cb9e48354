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
#include <cstdint>
#include <string>
#include <vector>

namespace sdag {

/// Annotation prompt with the formatted question substituted verbatim.
/// Throws InvalidArgument for an empty question.
std::string render_annotation_prompt(const QuestionRecord& q);

/// Parses `<Name Weight>` groups after the last "Keywords:" marker. Groups
/// naming a non-taxonomy subject are skipped; a repeated subject keeps its
/// last weight; the result is renormalized.
SubjectWeights parse_annotation_reply(const std::string& reply);

inline constexpr std::size_t kAnnotationRounds = 3;

/// Keeps subjects present in every round, averages their weights, and
/// renormalizes. Throws NoConsensus on an empty intersection.
SubjectWeights consensus_merge(const std::array<SubjectWeights, kAnnotationRounds>& runs);

struct AnnotationRun {
    std::string question_id;
    std::size_t round_index = 0;
    std::string raw_reply;
    std::optional<SubjectWeights> parsed;  ///< nullopt marks a parse failure
};

struct CurationConfig {
    std::string annotator;  ///< backend name
    std::uint64_t seed = 0;
    std::size_t profiling_size = 200;
    double train_ratio = 0.7;
    /// Draw the profiling split out of the test split instead of keeping it disjoint.
    bool profiling_from_test = false;
    std::size_t parallelism = 1;
};

struct SkipEntry {
    std::string id;
    std::string reason;
};

struct CuratedDataset {
    std::vector<QuestionRecord> records;
    std::vector<SkipEntry> skip_log;
    std::vector<std::string> warnings;
    std::vector<AnnotationRun> runs;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t profiling_size = 0;

    double avg_subjects_per_question() const noexcept;
};

inline constexpr const char* kProfilingCopySuffix = "@profiling";

CuratedDataset curate_dataset(const std::vector<QuestionRecord>& raw, BackendRegistry& backends,
                              const CurationConfig& cfg);

} // namespace sdag
