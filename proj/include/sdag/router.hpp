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

#include "sdag/embedding.hpp"
#include "sdag/subject.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sdag {

/// Dense row-major matrix. Vectors are stored as 1 x n.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }
    std::size_t size() const noexcept { return data.size(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Activation { Relu, Identity };

std::string_view activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct RouterDims {
    std::size_t subject_dim = 64;   ///< d_s
    std::size_t question_dim = 256; ///< d_q, equals the embedder dimension
    std::size_t hidden = 128;       ///< h
    std::size_t layers = 2;         ///< L
    Activation message_activation = Activation::Relu;

    friend bool operator==(const RouterDims&, const RouterDims&) = default;
};

struct MessageLayer {
    Tensor w_self;  ///< h x h
    Tensor w_in;    ///< h x h
    Tensor w_out;   ///< h x h
    Tensor bias;    ///< 1 x h

    friend bool operator==(const MessageLayer&, const MessageLayer&) = default;
};

/// Two-layer head: hidden linear + ReLU, then a linear map to one logit.
struct Head {
    Tensor hidden_weight;
    Tensor hidden_bias;
    Tensor out_weight;  ///< 1 x h
    Tensor out_bias;    ///< 1 x 1

    friend bool operator==(const Head&, const Head&) = default;
};

struct RouterParams {
    RouterDims dims;
    Tensor subject_embeddings;  ///< 15 x d_s
    Tensor init_weight;         ///< h x (d_s + d_q)
    Tensor init_bias;           ///< 1 x h
    std::vector<MessageLayer> layers;
    Head node_head;  ///< input x_i (h)
    Head edge_head;  ///< input [x_src; x_dst; h_Q] (2h + d_q)

    /// Zero-valued parameters with the shapes implied by `dims`.
    static RouterParams zeros(const RouterDims& dims);
    /// Weights and subject embeddings ~ N(0, scale^2), biases zero.
    static RouterParams random(const RouterDims& dims, std::uint64_t seed, double scale = 0.1);

    /// Visits every tensor under its checkpoint name, in a fixed order.
    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const RouterParams&, const RouterParams&) = default;
};

using NodeArray = std::array<double, kSubjectCount>;
using PairArray = std::array<std::array<double, kSubjectCount>, kSubjectCount>;

struct RouterOutput {
    NodeArray node_logits{};
    NodeArray node_probs{};
    PairArray edge_logits{};  ///< diagonal unused
    PairArray edge_probs{};   ///< diagonal unused
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
    Embedding question;
    Tensor init_pre;                  ///< 15 x h
    std::vector<Tensor> layer_input;  ///< L entries, 15 x h
    std::vector<Tensor> layer_mean;
    std::vector<Tensor> layer_pre;
    Tensor final_states;              ///< X_L
    Tensor node_pre;                  ///< 15 x h
    Tensor edge_src;                  ///< 15 x h, A x_i
    Tensor edge_dst;                  ///< 15 x h, B x_j
    std::vector<double> edge_shared;  ///< h, C h_Q + b
    RouterOutput output;
};

/// Node initialization: ReLU(W [h_i; h_Q] + b) for every subject.
Tensor init_node_features(const RouterParams& p, std::span<const double> question);
/// L rounds of directional message passing over the complete subject graph.
Tensor message_pass(const RouterParams& p, const Tensor& x);
/// Node and edge heads on final node states.
RouterOutput predict(const RouterParams& p, const Tensor& states, std::span<const double> question);
/// The three stages above, keeping intermediates.
ForwardCache forward(const RouterParams& p, std::span<const double> question);

struct RouterLabels {
    NodeArray node{};
    PairArray edge{};
};

RouterLabels labels_from_dag(const SDag& g);

struct LossWeights {
    double node = 1.0;
    double edge = 1.0;
};

inline constexpr double kProbClamp = 1e-7;

/// True when the edge term (i, j) is excluded from the loss.
constexpr bool edge_masked(const RouterLabels& y, std::size_t i, std::size_t j) noexcept {
    return y.node[i] == 0.0 && y.node[j] == 0.0;
}

struct LossValue {
    double loss = 0.0;
    NodeArray node_logit_grad{};
    PairArray edge_logit_grad{};
};

/// Masked multi-task BCE over clamped probabilities, with dL/dlogit. Terms are
/// evaluated from the logits; the probabilities are not read.
LossValue compute_loss(const RouterOutput& out, const RouterLabels& y, const LossWeights& w);

/// Reverse-mode pass from logit gradients back to every parameter.
RouterParams backward(const RouterParams& p, const ForwardCache& cache, const LossValue& loss);

struct LossAndGradient {
    double loss = 0.0;
    RouterParams gradient;
};

LossAndGradient loss_and_gradient(const RouterParams& p, std::span<const double> question, const RouterLabels& y,
                                  const LossWeights& w);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double lambda_node = 1.0;
    double lambda_edge = 1.0;
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double init_scale = 0.1;

    /// Throws InvalidArgument when the lambdas/learning rate are out of range.
    void validate() const;
};

struct TrainingSample {
    std::string question;
    SDag target;
};

struct TrainResult {
    RouterParams params;
    std::vector<double> epoch_losses;  ///< mean per-sample loss of each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

TrainResult train(const std::vector<TrainingSample>& data, const TrainConfig& cfg, const RouterDims& dims,
                  const Embedder& embedder, const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Inference

struct GenerationConfig {
    double node_threshold = 0.5;
    double edge_threshold = 0.5;
    std::size_t max_nodes = kMaxDagNodes;
};

/// Thresholding, node cap, and acyclicity repair on raw router output.
SDag sdag_from_output(const RouterOutput& out, const GenerationConfig& cfg = {});

SDag generate_sdag(std::string_view question, const RouterParams& p, const Embedder& embedder,
                   const GenerationConfig& cfg = {});

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    RouterParams params;
    std::uint64_t seed = 0;
    nlohmann::json embedder = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace sdag
