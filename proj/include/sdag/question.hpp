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

#include "sdag/subject.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdag {

enum class Split { Train, Test, Profiling };

std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view name);

struct QuestionRecord {
    std::string id;
    std::string question;
    std::vector<std::string> options;
    std::string gold;  ///< option label, "A".."J"
    std::optional<SubjectWeights> subjects;
    std::optional<Split> split;

    friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// Label for the option at `index` ("A" for 0). At most ten options.
std::string option_label(std::size_t index);

/// Question text followed by its lettered options, as shown to agents.
std::string format_question(const QuestionRecord& q);

/// Throws InvalidArgument when the gold label does not name an option.
void check_record(const QuestionRecord& q);

nlohmann::json to_json(const SubjectWeights& w);
SubjectWeights subject_weights_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuestionRecord& q);
QuestionRecord question_from_json(const nlohmann::json& j);

/// One record per line, UTF-8, LF endings. Duplicate ids are rejected.
std::vector<QuestionRecord> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<QuestionRecord>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<QuestionRecord>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace sdag
