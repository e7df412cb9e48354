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
#include "sdag/prompts.hpp"
#include "sdag/subject.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdag {

/// SubjectExpert: no in-edges but some out-edges. Supporting: both.
/// Dominant: no out-edges (isolated nodes included).
std::map<Subject, AgentRole> assign_roles(const SDag& g);

/// Dominant node with the highest relevance score; canonical order on ties.
Subject final_node(const SDag& g);

using ModelSelection = std::map<Subject, std::string>;

/// Capability-based model choice for every node of `g`.
ModelSelection select_models(const SDag& g, const ProfileStore& store);

struct AgentQuestion {
    std::string id;
    std::string text;  ///< as shown to agents (question plus options)
};

struct NodeRecord {
    std::size_t index = 0;  ///< serialization position
    int round = 1;          ///< FCG round; always 1 for S-DAG execution
    Subject subject = Subject::Other;
    AgentRole role = AgentRole::Dominant;
    std::string model_id;
    std::string prompt;
    std::string reply;
    double latency_ms = 0.0;
    int attempts = 0;
    double start_ms = 0.0;   ///< latest upstream finish
    double finish_ms = 0.0;  ///< start + latency
    bool failed = false;
    std::string error;

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct ExecutionTrace {
    std::string question_id;
    std::string mode;
    std::vector<NodeRecord> records;
    std::uint64_t calls = 0;
    double total_ms = 0.0;  ///< critical-path time over backend latencies
    Subject final_node = Subject::Other;
    std::optional<std::string> final_answer;

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

struct ExecutionOptions {
    std::size_t parallelism = 4;
    std::string mode = "sdag";
};

/// Runs every node once after all of its in-neighbours, feeding their replies
/// into its prompt. Ready nodes run concurrently; records are ordered by
/// topological index whatever the interleaving.
ExecutionTrace execute_dag(const SDag& g, const AgentQuestion& question, const ModelSelection& selection,
                           const ModelPool& pool, BackendRegistry& backends, const ExecutionOptions& opts = {});

/// Fully connected two-round baseline: independent answers, then a revision
/// round seeing every peer's first answer. 2n calls.
ExecutionTrace execute_fcg(const std::vector<SDagNode>& nodes, const AgentQuestion& question,
                           const ModelSelection& selection, const ModelPool& pool, BackendRegistry& backends,
                           const ExecutionOptions& opts = {});

nlohmann::json to_json(const NodeRecord& r, const ExecutionTrace& owner);
nlohmann::json trace_summary_json(const ExecutionTrace& t);
/// One JSON line per node record followed by a summary line.
std::string trace_to_jsonl(const ExecutionTrace& t);

} // namespace sdag
