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

#include "sdag/question.hpp"

#include "sdag/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sdag {

using nlohmann::json;

std::string_view split_name(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Profiling: return "profiling";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    if (name == "profiling") return Split::Profiling;
    throw Error(ErrorCode::ParseFailure, "unknown split '" + std::string(name) + "'");
}

std::string option_label(std::size_t index) {
    if (index >= 10) throw Error(ErrorCode::InvalidArgument, "at most ten options are supported");
    return std::string(1, static_cast<char>('A' + index));
}

std::string format_question(const QuestionRecord& q) {
    std::string out = q.question;
    if (!q.options.empty()) out += "\nOptions:";
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        out += "\n" + option_label(i) + ". " + q.options[i];
    }
    return out;
}

void check_record(const QuestionRecord& q) {
    if (q.id.empty()) throw Error(ErrorCode::InvalidArgument, "record without id");
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        if (option_label(i) == q.gold) return;
    }
    throw Error(ErrorCode::InvalidArgument, "record " + q.id + ": gold '" + q.gold + "' labels no option");
}

json to_json(const SubjectWeights& w) {
    json j = json::object();
    for (const auto& [s, v] : w) j[std::string(subject_name(s))] = v;
    return j;
}

SubjectWeights subject_weights_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "subjects must be an object");
    SubjectWeights w;
    for (const auto& [name, value] : j.items()) {
        if (!value.is_number()) throw Error(ErrorCode::ParseFailure, "weight for " + name + " is not a number");
        w[parse_subject(name)] = value.get<double>();
    }
    return w;
}

json to_json(const QuestionRecord& q) {
    json j;
    j["id"] = q.id;
    j["question"] = q.question;
    j["options"] = q.options;
    j["gold"] = q.gold;
    if (q.subjects) j["subjects"] = to_json(*q.subjects);
    if (q.split) j["split"] = std::string(split_name(*q.split));
    return j;
}

QuestionRecord question_from_json(const json& j) {
    try {
        QuestionRecord q;
        q.id = j.at("id").get<std::string>();
        q.question = j.at("question").get<std::string>();
        q.options = j.value("options", std::vector<std::string>{});
        q.gold = j.value("gold", std::string{});
        if (j.contains("subjects") && !j["subjects"].is_null()) q.subjects = subject_weights_from_json(j["subjects"]);
        if (j.contains("split") && !j["split"].is_null()) q.split = parse_split(j["split"].get<std::string>());
        return q;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed question record: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<QuestionRecord> read_jsonl(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<QuestionRecord> records;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseFailure, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto q = question_from_json(j);
        if (!ids.insert(q.id).second) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ": duplicate id " + q.id);
        }
        records.push_back(std::move(q));
    }
    return records;
}

std::string to_jsonl(const std::vector<QuestionRecord>& records) {
    std::string out;
    for (const auto& q : records) {
        out += to_json(q).dump();
        out += '\n';
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<QuestionRecord>& records) {
    write_text_file(path, to_jsonl(records));
}

} // namespace sdag
