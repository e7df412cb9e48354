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

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdag {

/// Closed subject taxonomy. Enumerator order is the canonical order used for
/// every tie-break and for the row/column layout of router tensors.
enum class Subject : std::size_t {
    Math,
    Physics,
    Chemistry,
    Law,
    Engineering,
    Economics,
    Health,
    Psychology,
    Business,
    Biology,
    Philosophy,
    ComputerScience,
    History,
    Medicine,
    Other,
};

inline constexpr std::size_t kSubjectCount = 15;
inline constexpr std::size_t kMaxDagNodes = 5;

constexpr std::size_t index_of(Subject s) noexcept { return static_cast<std::size_t>(s); }
Subject subject_at(std::size_t index);
std::string_view subject_name(Subject s) noexcept;
const std::array<Subject, kSubjectCount>& all_subjects() noexcept;

/// Case-insensitive lookup after trimming; throws UnknownSubject.
Subject parse_subject(std::string_view name);
std::optional<Subject> try_parse_subject(std::string_view name) noexcept;

using SubjectWeights = std::map<Subject, double>;

double weight_sum(const SubjectWeights& w) noexcept;
/// Scales entries to sum to one. Throws InvalidArgument on a zero sum.
SubjectWeights renormalized(const SubjectWeights& w);

struct SDagNode {
    Subject subject;
    double score = 0.0;

    friend bool operator==(const SDagNode&, const SDagNode&) = default;
};

struct SDagEdge {
    Subject src;
    Subject dst;
    double score = 1.0;

    friend bool operator==(const SDagEdge&, const SDagEdge&) = default;
};

struct SDag {
    std::vector<SDagNode> nodes;
    std::vector<SDagEdge> edges;

    bool has_node(Subject s) const noexcept;
    bool has_edge(Subject src, Subject dst) const noexcept;
    const SDagNode* find_node(Subject s) const noexcept;
    std::size_t in_degree(Subject s) const noexcept;
    std::size_t out_degree(Subject s) const noexcept;
    /// Predecessors of `s`, in canonical order.
    std::vector<Subject> predecessors(Subject s) const;
    /// Binary adjacency over the full taxonomy, row = src.
    std::array<std::array<int, kSubjectCount>, kSubjectCount> adjacency() const noexcept;

    friend bool operator==(const SDag&, const SDag&) = default;
};

/// Kahn's algorithm with canonical-order tie-break; nullopt when a cycle exists
/// or an edge names a missing node.
std::optional<std::vector<Subject>> topological_order(const SDag& g);

enum class ViolationKind {
    NoNodes,
    TooManyNodes,
    DuplicateNode,
    DuplicateEdge,
    SelfLoop,
    DanglingEdge,
    ScoreOutOfRange,
    Cycle,
};

std::string_view violation_name(ViolationKind kind) noexcept;

struct Violation {
    ViolationKind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    bool has(ViolationKind kind) const noexcept;
};

ValidationReport validate_dag(const SDag& g);

inline constexpr double kDefaultDropThreshold = 0.1;

/// Ground-truth S-DAG from annotation weights: drop entries under `threshold`
/// (and the Other bucket), keep the five heaviest, renormalize, split survivors into dominant
/// (weight > 1/k) and supporting, and connect every supporting subject to
/// every dominant one. When nobody beats the average, all maximum-weight
/// subjects become dominant and there are no edges.
SDag build_ground_truth_dag(const SubjectWeights& weights, double threshold = kDefaultDropThreshold);

} // namespace sdag
