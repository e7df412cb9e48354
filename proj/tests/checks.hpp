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

#include "sdag/router.hpp"
#include "sdag/random.hpp"
#include "sdag/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sdag::testing {

inline Embedding random_question(Rng& rng, std::size_t dim) {
    Embedding q(dim);
    for (double& v : q) v = rng.normal();
    return q;
}

inline RouterLabels random_labels(Rng& rng) {
    RouterLabels y;
    for (double& v : y.node) v = rng.uniform() < 0.35 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < kSubjectCount; ++i) {
        for (std::size_t j = 0; j < kSubjectCount; ++j) {
            if (i != j) y.edge[i][j] = rng.uniform() < 0.2 ? 1.0 : 0.0;
        }
    }
    return y;
}

inline double loss_only(const RouterParams& p, const Embedding& q, const RouterLabels& y, const LossWeights& w) {
    return compute_loss(forward(p, q).output, y, w).loss;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t compared = 0;
    std::size_t kinks = 0;  ///< comparisons skipped because +h and -h straddle a ReLU or clamp boundary
    std::string worst;
};

/// Which side of every ReLU and probability clamp the forward pass landed on.
inline std::vector<bool> piecewise_pattern(const RouterParams& p, const ForwardCache& c) {
    std::vector<bool> bits;
    auto add = [&](const Tensor& t) {
        for (double v : t.data) bits.push_back(v > 0.0);
    };
    add(c.init_pre);
    if (p.dims.message_activation == Activation::Relu) {
        for (const auto& t : c.layer_pre) add(t);
    }
    add(c.node_pre);
    const auto h = p.dims.hidden;
    for (std::size_t i = 0; i < kSubjectCount; ++i) {
        for (std::size_t j = 0; j < kSubjectCount; ++j) {
            if (i == j) continue;
            for (std::size_t k = 0; k < h; ++k) bits.push_back(c.edge_src(i, k) + c.edge_dst(j, k) + c.edge_shared[k] > 0.0);
            const double pr = c.output.edge_probs[i][j];
            bits.push_back(pr < kProbClamp || pr > 1.0 - kProbClamp);
        }
        const double pr = c.output.node_probs[i];
        bits.push_back(pr < kProbClamp || pr > 1.0 - kProbClamp);
    }
    return bits;
}

/// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero components from
/// turning finite-difference rounding noise into huge ratios.
inline constexpr double kGradCheckFloor = 1e-3;

/// Analytic gradients against central differences on small random routers.
inline GradCheckResult gradient_check(std::uint64_t seed, std::size_t pairs, double step = 1e-5) {
    RouterDims dims;
    dims.subject_dim = 8;
    dims.question_dim = 8;
    dims.hidden = 8;
    dims.layers = 2;
    Rng rng(seed);
    GradCheckResult out;
    for (std::size_t n = 0; n < pairs; ++n) {
        RouterParams p = RouterParams::random(dims, rng.next(), 0.5);
        // Non-zero biases so that every bias gradient path is exercised.
        p.for_each([&](const std::string& name, Tensor& t) {
            if (name.ends_with("bias")) {
                for (double& v : t.data) v = 0.1 * rng.normal();
            }
        });
        const auto q = random_question(rng, dims.question_dim);
        const auto y = random_labels(rng);
        const LossWeights w{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
        const auto analytic = loss_and_gradient(p, q, y, w).gradient;

        std::vector<const Tensor*> grads;
        analytic.for_each([&](const std::string&, const Tensor& t) { grads.push_back(&t); });
        std::size_t t_index = 0;
        p.for_each([&](const std::string& name, Tensor& t) {
            const Tensor& g = *grads[t_index++];
            for (std::size_t k = 0; k < t.size(); ++k) {
                const double saved = t.data[k];
                t.data[k] = saved + step;
                const auto cache_up = forward(p, q);
                const double up = compute_loss(cache_up.output, y, w).loss;
                t.data[k] = saved - step;
                const auto cache_down = forward(p, q);
                const double down = compute_loss(cache_down.output, y, w).loss;
                t.data[k] = saved;
                // A difference quotient across a kink measures no derivative at all.
                if (piecewise_pattern(p, cache_up) != piecewise_pattern(p, cache_down)) {
                    ++out.kinks;
                    continue;
                }
                const double numeric = (up - down) / (2.0 * step);
                const double a = g.data[k];
                const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
                ++out.compared;
                if (rel > out.max_rel_error) {
                    out.max_rel_error = rel;
                    out.worst = name + "[" + std::to_string(k) + "] analytic " + std::to_string(a) + " numeric " +
                                std::to_string(numeric);
                }
            }
        });
    }
    return out;
}

struct MaskingResult {
    std::size_t masked_pairs = 0;
    std::size_t perturbations = 0;
    bool loss_unchanged = true;
    bool gradient_unchanged = true;
};

/// Moves every masked edge prediction (both endpoints labelled 0) to several
/// values and checks that the loss and all logit gradients stay bit-identical.
inline MaskingResult masking_check(std::uint64_t seed, std::size_t trials) {
    Rng rng(seed);
    MaskingResult r;
    for (std::size_t t = 0; t < trials; ++t) {
        RouterOutput out;
        for (std::size_t i = 0; i < kSubjectCount; ++i) {
            out.node_logits[i] = 3.0 * rng.normal();
            out.node_probs[i] = 1.0 / (1.0 + std::exp(-out.node_logits[i]));
            for (std::size_t j = 0; j < kSubjectCount; ++j) {
                if (i == j) continue;
                out.edge_logits[i][j] = 3.0 * rng.normal();
                out.edge_probs[i][j] = 1.0 / (1.0 + std::exp(-out.edge_logits[i][j]));
            }
        }
        const auto y = random_labels(rng);
        const LossWeights w{1.0, 1.0};
        const auto base = compute_loss(out, y, w);
        for (std::size_t i = 0; i < kSubjectCount; ++i) {
            for (std::size_t j = 0; j < kSubjectCount; ++j) {
                if (i == j || !edge_masked(y, i, j)) continue;
                ++r.masked_pairs;
                for (double z : {-40.0, -2.0, 0.0, 2.2, 40.0}) {
                    RouterOutput moved = out;
                    moved.edge_logits[i][j] = z;
                    moved.edge_probs[i][j] = 1.0 / (1.0 + std::exp(-z));
                    const auto lv = compute_loss(moved, y, w);
                    ++r.perturbations;
                    r.loss_unchanged = r.loss_unchanged && lv.loss == base.loss;
                    r.gradient_unchanged = r.gradient_unchanged && lv.node_logit_grad == base.node_logit_grad &&
                                           lv.edge_logit_grad == base.edge_logit_grad;
                }
            }
        }
    }
    return r;
}

struct F1Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
    double f1() const { return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn); }
};

struct StructureScore {
    F1Counts nodes;
    F1Counts edges;
};

inline void score_structure(const SDag& predicted, const SDag& truth, StructureScore& s) {
    for (auto a : all_subjects()) {
        const bool p = predicted.has_node(a), t = truth.has_node(a);
        s.nodes.tp += p && t;
        s.nodes.fp += p && !t;
        s.nodes.fn += !p && t;
        for (auto b : all_subjects()) {
            if (a == b) continue;
            const bool pe = predicted.has_edge(a, b), te = truth.has_edge(a, b);
            s.edges.tp += pe && te;
            s.edges.fp += pe && !te;
            s.edges.fn += !pe && te;
        }
    }
}

} // namespace sdag::testing
