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
#include "sdag/embedding.hpp"
#include "sdag/orchestrator.hpp"
#include "sdag/profiling.hpp"
#include "sdag/question.hpp"
#include "sdag/router.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sdag {

enum class EvalMode { Sdag, Fcg, NoGnn, RandomModel, SingleCot };

std::string_view mode_name(EvalMode m) noexcept;
/// Human-readable variant label used in rendered tables.
std::string_view mode_label(EvalMode m) noexcept;
EvalMode parse_mode(std::string_view name);

struct EvalConfig {
    std::vector<EvalMode> modes{EvalMode::Sdag};
    std::size_t seeds = 3;
    std::uint64_t base_seed = 0;  ///< trial t uses base_seed + t
    std::size_t parallelism = 1;  ///< questions in flight
    std::size_t node_parallelism = 4;
    std::string single_model;     ///< single_cot model; empty = smallest model id
    GenerationConfig generation;
    bool wall_clock = false;      ///< measured time instead of simulated critical path
    bool keep_traces = true;
};

/// Loaded artifacts. Pointers the selected modes do not need may be null.
struct EvalInputs {
    const std::vector<QuestionRecord>* questions = nullptr;
    const ModelPool* pool = nullptr;
    BackendRegistry* backends = nullptr;
    const ProfileStore* profiles = nullptr;
    const RouterParams* router = nullptr;
    const Embedder* embedder = nullptr;
};

struct QuestionOutcome {
    std::string mode;
    std::size_t trial = 0;
    std::string question_id;
    std::string gold;
    std::optional<std::string> answer;
    bool correct = false;
    std::uint64_t calls = 0;
    double time_ms = 0.0;
    std::uint64_t failed_calls = 0;
    nlohmann::json trace = nlohmann::json::array();

    friend bool operator==(const QuestionOutcome&, const QuestionOutcome&) = default;
};

struct ModeSummary {
    std::string mode;
    std::vector<double> trial_accuracy;  ///< fractions in [0, 1]
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;           ///< sample std over trials, 0 for one trial
    double avg_time_s = 0.0;
    double avg_calls = 0.0;
    std::uint64_t total_calls = 0;       ///< backend counter delta over the mode
    std::size_t questions = 0;

    friend bool operator==(const ModeSummary&, const ModeSummary&) = default;
};

struct EvalReport {
    std::size_t seeds = 0;
    std::uint64_t base_seed = 0;
    std::string time_basis;  ///< "simulated" or "wall_clock"
    std::vector<ModeSummary> modes;
    std::vector<QuestionOutcome> outcomes;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Runs every configured mode over every question for every trial. Inputs
/// missing for a selected mode raise ConfigError before any call is made.
EvalReport evaluate(const EvalConfig& cfg, const EvalInputs& in);

enum class ReportFormat { Text, Json };

/// "59.73" for 0.5973.
std::string format_percent(double fraction);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string render_report(const EvalReport& r, ReportFormat format);

} // namespace sdag
