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

#include "sdag/subject.hpp"

#include "sdag/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <utility>

namespace sdag {

namespace {

constexpr std::array<std::string_view, kSubjectCount> kNames = {
    "Math",      "Physics",    "Chemistry",        "Law",     "Engineering",
    "Economics", "Health",     "Psychology",       "Business", "Biology",
    "Philosophy", "Computer Science", "History",   "Medicine", "Other",
};

constexpr std::array<Subject, kSubjectCount> kAll = {
    Subject::Math,      Subject::Physics,    Subject::Chemistry,       Subject::Law,
    Subject::Engineering, Subject::Economics, Subject::Health,         Subject::Psychology,
    Subject::Business,  Subject::Biology,    Subject::Philosophy,      Subject::ComputerScience,
    Subject::History,   Subject::Medicine,   Subject::Other,
};

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

} // namespace

Subject subject_at(std::size_t index) {
    if (index >= kSubjectCount) {
        throw Error(ErrorCode::InvalidArgument, "subject index " + std::to_string(index) + " out of range");
    }
    return kAll[index];
}

std::string_view subject_name(Subject s) noexcept { return kNames[index_of(s)]; }

const std::array<Subject, kSubjectCount>& all_subjects() noexcept { return kAll; }

std::optional<Subject> try_parse_subject(std::string_view name) noexcept {
    const auto t = trim(name);
    for (std::size_t i = 0; i < kSubjectCount; ++i) {
        if (iequals(t, kNames[i])) return kAll[i];
    }
    return std::nullopt;
}

Subject parse_subject(std::string_view name) {
    if (auto s = try_parse_subject(name)) return *s;
    throw Error(ErrorCode::UnknownSubject, "'" + std::string(name) + "' is not a taxonomy subject");
}

double weight_sum(const SubjectWeights& w) noexcept {
    double total = 0.0;
    for (const auto& [s, v] : w) total += v;
    return total;
}

SubjectWeights renormalized(const SubjectWeights& w) {
    const double total = weight_sum(w);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw Error(ErrorCode::InvalidArgument, "cannot renormalize weights with sum " + std::to_string(total));
    }
    SubjectWeights out;
    for (const auto& [s, v] : w) out[s] = v / total;
    return out;
}

// ---------------------------------------------------------------------------
// SDag

bool SDag::has_node(Subject s) const noexcept { return find_node(s) != nullptr; }

const SDagNode* SDag::find_node(Subject s) const noexcept {
    for (const auto& n : nodes) {
        if (n.subject == s) return &n;
    }
    return nullptr;
}

bool SDag::has_edge(Subject src, Subject dst) const noexcept {
    return std::any_of(edges.begin(), edges.end(),
                       [&](const SDagEdge& e) { return e.src == src && e.dst == dst; });
}

std::size_t SDag::in_degree(Subject s) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [&](const SDagEdge& e) { return e.dst == s; }));
}

std::size_t SDag::out_degree(Subject s) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [&](const SDagEdge& e) { return e.src == s; }));
}

std::vector<Subject> SDag::predecessors(Subject s) const {
    std::vector<Subject> out;
    for (const auto& e : edges) {
        if (e.dst == s) out.push_back(e.src);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::array<std::array<int, kSubjectCount>, kSubjectCount> SDag::adjacency() const noexcept {
    std::array<std::array<int, kSubjectCount>, kSubjectCount> a{};
    for (const auto& e : edges) a[index_of(e.src)][index_of(e.dst)] = 1;
    return a;
}

std::optional<std::vector<Subject>> topological_order(const SDag& g) {
    std::array<bool, kSubjectCount> present{};
    for (const auto& n : g.nodes) present[index_of(n.subject)] = true;

    std::array<std::size_t, kSubjectCount> indeg{};
    std::set<std::pair<Subject, Subject>> unique_edges;
    for (const auto& e : g.edges) {
        if (!present[index_of(e.src)] || !present[index_of(e.dst)]) return std::nullopt;
        if (unique_edges.insert({e.src, e.dst}).second) ++indeg[index_of(e.dst)];
    }

    std::set<Subject> ready;
    std::set<Subject> seen;
    for (const auto& n : g.nodes) {
        if (seen.insert(n.subject).second && indeg[index_of(n.subject)] == 0) ready.insert(n.subject);
    }

    std::vector<Subject> order;
    while (!ready.empty()) {
        const Subject s = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(s);
        for (const auto& [src, dst] : unique_edges) {
            if (src == s && --indeg[index_of(dst)] == 0) ready.insert(dst);
        }
    }
    if (order.size() != seen.size()) return std::nullopt;
    return order;
}

std::string_view violation_name(ViolationKind kind) noexcept {
    switch (kind) {
    case ViolationKind::NoNodes: return "no_nodes";
    case ViolationKind::TooManyNodes: return "too_many_nodes";
    case ViolationKind::DuplicateNode: return "duplicate_node";
    case ViolationKind::DuplicateEdge: return "duplicate_edge";
    case ViolationKind::SelfLoop: return "self_loop";
    case ViolationKind::DanglingEdge: return "dangling_edge";
    case ViolationKind::ScoreOutOfRange: return "score_out_of_range";
    case ViolationKind::Cycle: return "cycle";
    }
    return "unknown";
}

bool ValidationReport::has(ViolationKind kind) const noexcept {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_dag(const SDag& g) {
    ValidationReport report;
    auto add = [&](ViolationKind k, std::string detail) { report.violations.push_back({k, std::move(detail)}); };
    auto in_unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };

    if (g.nodes.empty()) add(ViolationKind::NoNodes, "graph has no nodes");
    if (g.nodes.size() > kMaxDagNodes) {
        add(ViolationKind::TooManyNodes,
            std::to_string(g.nodes.size()) + " nodes exceed the cap of " + std::to_string(kMaxDagNodes));
    }

    std::set<Subject> nodes;
    for (const auto& n : g.nodes) {
        if (!nodes.insert(n.subject).second) {
            add(ViolationKind::DuplicateNode, std::string(subject_name(n.subject)));
        }
        if (!in_unit(n.score)) {
            add(ViolationKind::ScoreOutOfRange, "node " + std::string(subject_name(n.subject)));
        }
    }

    bool structurally_sound = true;
    std::set<std::pair<Subject, Subject>> edges;
    for (const auto& e : g.edges) {
        const std::string label = std::string(subject_name(e.src)) + "->" + std::string(subject_name(e.dst));
        if (e.src == e.dst) {
            add(ViolationKind::SelfLoop, label);
            structurally_sound = false;
        }
        if (!edges.insert({e.src, e.dst}).second) add(ViolationKind::DuplicateEdge, label);
        if (!nodes.count(e.src) || !nodes.count(e.dst)) {
            add(ViolationKind::DanglingEdge, label);
            structurally_sound = false;
        }
        if (!in_unit(e.score)) add(ViolationKind::ScoreOutOfRange, "edge " + label);
    }

    // Self-loops and dangling edges are reported on their own; a self-loop is
    // also a cycle, so only run the cycle check on otherwise sound graphs.
    if (structurally_sound && !topological_order(g)) add(ViolationKind::Cycle, "no topological order exists");
    return report;
}

SDag build_ground_truth_dag(const SubjectWeights& weights, double threshold) {
    if (weights.empty()) throw Error(ErrorCode::InvalidArgument, "empty subject weights");
    for (const auto& [s, w] : weights) {
        if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
            throw Error(ErrorCode::InvalidWeight, std::string(subject_name(s)) + " weight " + std::to_string(w));
        }
    }
    if (std::abs(weight_sum(weights) - 1.0) > 1e-6) {
        throw Error(ErrorCode::InvalidArgument, "weights sum to " + std::to_string(weight_sum(weights)));
    }

    SubjectWeights kept;
    for (const auto& [s, w] : weights) {
        if (s != Subject::Other && w >= threshold) kept[s] = w;
    }
    if (kept.empty()) throw Error(ErrorCode::EmptyAfterThreshold, "no subject reaches threshold");
    if (kept.size() > kMaxDagNodes) {
        // Heaviest five survive; canonical order breaks ties.
        std::vector<std::pair<Subject, double>> ranked(kept.begin(), kept.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        ranked.resize(kMaxDagNodes);
        kept = SubjectWeights(ranked.begin(), ranked.end());
    }
    kept = renormalized(kept);

    // Renormalization rounding must not split subjects that tie at the average.
    constexpr double kTieTolerance = 1e-12;
    const double average = 1.0 / static_cast<double>(kept.size());
    std::vector<Subject> dominant;
    std::vector<Subject> supporting;
    for (const auto& [s, w] : kept) (w > average + kTieTolerance ? dominant : supporting).push_back(s);

    if (dominant.empty()) {
        double top = 0.0;
        for (const auto& [s, w] : kept) top = std::max(top, w);
        supporting.clear();
        for (const auto& [s, w] : kept) (w >= top - kTieTolerance ? dominant : supporting).push_back(s);
    }

    SDag g;
    for (const auto& [s, w] : kept) g.nodes.push_back({s, w});
    for (Subject src : supporting) {
        for (Subject dst : dominant) g.edges.push_back({src, dst, 1.0});
    }
    return g;
}

} // namespace sdag
