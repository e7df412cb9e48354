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
#include "sdag/error.hpp"
#include "sdag/random.hpp"
#include "sdag/subject.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace sdag::testing {

/// Independent restatement of the ground-truth rule over plain vectors, used
/// to cross-check build_ground_truth_dag.
struct OracleDag {
    std::set<std::size_t> nodes;
    std::set<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> score = std::vector<double>(kSubjectCount, 0.0);
};

inline OracleDag oracle_dag(const std::vector<double>& raw, double threshold = 0.1) {
    const std::size_t other = kSubjectCount - 1;
    std::vector<std::size_t> keep;
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i != other && raw[i] >= threshold) {
            keep.push_back(i);
            total += raw[i];
        }
    }
    OracleDag d;
    if (keep.empty()) return d;
    if (keep.size() > kMaxDagNodes) {
        std::stable_sort(keep.begin(), keep.end(), [&](auto a, auto b) { return raw[a] > raw[b]; });
        keep.resize(kMaxDagNodes);
        std::sort(keep.begin(), keep.end());
        total = 0.0;
        for (auto i : keep) total += raw[i];
    }
    const double avg = 1.0 / static_cast<double>(keep.size());
    for (auto i : keep) {
        d.score[i] = raw[i] / total;
        d.nodes.insert(i);
    }
    std::vector<std::size_t> dom, sup;
    for (auto i : keep) (d.score[i] > avg ? dom : sup).push_back(i);
    if (dom.empty()) return d;  // everyone dominant, no edges
    for (auto s : sup)
        for (auto t : dom) d.edges.insert({s, t});
    return d;
}

/// Random weight vector over the taxonomy with 1..12 draws, summing to 1.
inline std::vector<double> random_weights(Rng& rng) {
    std::vector<double> w(kSubjectCount, 0.0);
    const std::size_t k = 1 + rng.below(12);
    for (std::size_t n = 0; n < k; ++n) w[rng.below(kSubjectCount)] += rng.uniform(0.01, 1.0);
    double total = 0.0;
    for (double v : w) total += v;
    for (double& v : w) v /= total;
    return w;
}

/// Ground truth for a random weight draw; empty when nothing clears the threshold.
inline SDag random_ground_truth(Rng& rng) {
    for (;;) {
        std::vector<double> w(kSubjectCount, 0.0);
        const std::size_t k = 1 + rng.below(12);
        for (std::size_t n = 0; n < k; ++n) w[rng.below(kSubjectCount)] += rng.uniform(0.01, 1.0);
        SubjectWeights sw;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] > 0.0) sw[subject_at(i)] = w[i];
        sw = renormalized(sw);
        try {
            return build_ground_truth_dag(sw);
        } catch (const Error&) {
            // all mass below the threshold or on Other; draw again
        }
    }
}

inline SubjectWeights to_weights(const std::vector<double>& w) {
    SubjectWeights out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) out[subject_at(i)] = w[i];
    }
    return out;
}

inline MockRule reply_rule(std::string reply, std::map<std::string, std::string> metadata = {}) {
    MockRule r;
    r.reply = std::move(reply);
    r.metadata = std::move(metadata);
    return r;
}

inline std::shared_ptr<BackendRegistry> registry_with(const std::string& name, MockScript script) {
    auto reg = std::make_shared<BackendRegistry>();
    reg->add(std::make_shared<MockBackend>(name, std::move(script)));
    return reg;
}

} // namespace sdag::testing
