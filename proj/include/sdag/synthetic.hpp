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
#include "sdag/profiling.hpp"
#include "sdag/question.hpp"
#include "sdag/router.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdag {

/// Templated multi-subject questions with planted subject keywords. The
/// dominant subject's keyword is repeated so that it is recoverable from a
/// bag-of-words embedding; supporting keywords appear once.
struct SyntheticConfig {
    std::size_t count = 500;
    std::uint64_t seed = 1;
    std::size_t min_subjects = 2;
    std::size_t max_subjects = 4;
    std::size_t dominant_repeats = 3;
    std::string id_prefix = "syn";
};

std::vector<QuestionRecord> generate_synthetic_questions(const SyntheticConfig& cfg);

/// Highest-weight subject, canonical order on ties; Other is never dominant.
Subject dominant_subject(const SubjectWeights& w);

/// Pairs each annotated record with its ground-truth S-DAG.
std::vector<TrainingSample> training_samples(const std::vector<QuestionRecord>& records,
                                             double threshold = kDefaultDropThreshold);

/// A pool with one specialist per subject (Other excluded) behind a single
/// mock backend: a specialist answers correctly iff its subject is the
/// question's dominant subject.
struct OracleFixture {
    ModelPool pool;
    MockScript script;
};

inline constexpr const char* kOracleBackend = "oracle";

std::string specialist_id(Subject s);
OracleFixture make_oracle_fixture(const std::vector<QuestionRecord>& questions, std::uint64_t seed = 7);

/// Mock annotator replying with each question's stored weights in the
/// curation reply format.
MockScript make_annotator_script(const std::vector<QuestionRecord>& questions, std::uint64_t seed = 7);

} // namespace sdag
