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

#include "checks.hpp"

#include "sdag/error.hpp"
#include "sdag/router.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace sdag;
using namespace sdag::testing;

namespace {

RouterDims tiny_dims(std::size_t ds, std::size_t dq, std::size_t h, std::size_t layers,
                     Activation act = Activation::Relu) {
    RouterDims d;
    d.subject_dim = ds;
    d.question_dim = dq;
    d.hidden = h;
    d.layers = layers;
    d.message_activation = act;
    return d;
}

void set_identity(Tensor& t) {
    for (std::size_t i = 0; i < std::min(t.rows, t.cols); ++i) t(i, i) = 1.0;
}

RouterOutput output_from(const NodeArray& node, const PairArray& edge) {
    RouterOutput out;
    for (std::size_t i = 0; i < kSubjectCount; ++i) {
        out.node_probs[i] = node[i];
        out.node_logits[i] = std::log(node[i] / (1.0 - node[i]));
        for (std::size_t j = 0; j < kSubjectCount; ++j) {
            if (i == j) continue;
            out.edge_probs[i][j] = edge[i][j];
            out.edge_logits[i][j] = std::log(edge[i][j] / (1.0 - edge[i][j]));
        }
    }
    return out;
}

NodeArray filled(double v) {
    NodeArray a;
    a.fill(v);
    return a;
}

PairArray filled_pairs(double v) {
    PairArray a;
    for (auto& r : a) r.fill(v);
    return a;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sdag_router_" + name);
}

} // namespace

TEST_CASE("init features: zero parameters give zero states") {
    const auto p = RouterParams::zeros(tiny_dims(4, 6, 5, 2));
    const Embedding q(6, 0.7);
    const auto x = init_node_features(p, q);
    CHECK(x.rows == kSubjectCount);
    CHECK(x.cols == 5);
    for (double v : x.data) CHECK(v == 0.0);
}

TEST_CASE("init features: one-dimensional toy") {
    auto p = RouterParams::zeros(tiny_dims(1, 1, 1, 1));
    p.init_weight(0, 0) = 1.0;
    p.init_weight(0, 1) = 1.0;
    for (std::size_t i = 0; i < kSubjectCount; ++i) p.subject_embeddings(i, 0) = 0.2;
    auto x = init_node_features(p, Embedding{0.3});
    for (std::size_t i = 0; i < kSubjectCount; ++i) CHECK(x(i, 0) == doctest::Approx(0.5));

    for (std::size_t i = 0; i < kSubjectCount; ++i) p.subject_embeddings(i, 0) = -1.0;
    x = init_node_features(p, Embedding{0.0});
    for (std::size_t i = 0; i < kSubjectCount; ++i) CHECK(x(i, 0) == 0.0);
}

TEST_CASE("init features reject a question of the wrong width") {
    const auto p = RouterParams::zeros(tiny_dims(2, 3, 2, 1));
    try {
        init_node_features(p, Embedding(4, 0.0));
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("message passing examples") {
    Rng rng(3);
    Tensor x(kSubjectCount, 4);
    for (double& v : x.data) v = rng.normal();

    SUBCASE("zero weights") {
        const auto p = RouterParams::zeros(tiny_dims(2, 2, 4, 2));
        for (double v : message_pass(p, x).data) CHECK(v == 0.0);
    }
    SUBCASE("identity self transform, linear") {
        auto p = RouterParams::zeros(tiny_dims(2, 2, 4, 1, Activation::Identity));
        set_identity(p.layers[0].w_self);
        CHECK(message_pass(p, x) == x);
    }
    SUBCASE("mean of identical neighbours") {
        auto p = RouterParams::zeros(tiny_dims(2, 2, 4, 1, Activation::Identity));
        set_identity(p.layers[0].w_in);
        Tensor same(kSubjectCount, 4);
        const std::vector<double> v{0.5, -1.25, 2.0, 0.0};
        for (std::size_t i = 0; i < kSubjectCount; ++i)
            for (std::size_t k = 0; k < 4; ++k) same(i, k) = v[k];
        const auto out = message_pass(p, same);
        for (std::size_t i = 0; i < kSubjectCount; ++i)
            for (std::size_t k = 0; k < 4; ++k) CHECK(out(i, k) == doctest::Approx(v[k]));
    }
    SUBCASE("neighbour mean excludes the node itself") {
        auto p = RouterParams::zeros(tiny_dims(2, 2, 4, 1, Activation::Identity));
        set_identity(p.layers[0].w_out);
        const auto out = message_pass(p, x);
        for (std::size_t i = 0; i < kSubjectCount; ++i) {
            for (std::size_t k = 0; k < 4; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < kSubjectCount; ++j)
                    if (j != i) s += x(j, k);
                CHECK(out(i, k) == doctest::Approx(s / (kSubjectCount - 1)));
            }
        }
    }
}

TEST_CASE("prediction heads") {
    SUBCASE("zero heads give one half everywhere") {
        const auto p = RouterParams::zeros(tiny_dims(2, 3, 4, 1));
        Tensor x(kSubjectCount, 4);
        const auto out = predict(p, x, Embedding(3, 1.0));
        for (std::size_t i = 0; i < kSubjectCount; ++i) {
            CHECK(out.node_probs[i] == 0.5);
            for (std::size_t j = 0; j < kSubjectCount; ++j)
                if (i != j) CHECK(out.edge_probs[i][j] == 0.5);
        }
    }
    SUBCASE("a +20 logit saturates") {
        auto p = RouterParams::zeros(tiny_dims(2, 3, 4, 1));
        set_identity(p.node_head.hidden_weight);
        p.node_head.out_weight(0, 0) = 1.0;
        Tensor x(kSubjectCount, 4);
        x(3, 0) = 20.0;
        const auto out = predict(p, x, Embedding(3, 0.0));
        CHECK(out.node_logits[3] == doctest::Approx(20.0));
        CHECK(std::abs(out.node_probs[3] - 1.0) < 1e-8);
        CHECK(out.node_probs[2] == 0.5);
    }
}

TEST_CASE("loss examples") {
    SUBCASE("exact labels give zero loss") {
        RouterLabels y;
        y.node[0] = y.node[4] = 1.0;
        y.edge[4][0] = 1.0;
        NodeArray node = filled(0.0);
        node[0] = node[4] = 1.0;
        PairArray edge = filled_pairs(0.0);
        edge[4][0] = 1.0;
        RouterOutput out;
        for (std::size_t i = 0; i < kSubjectCount; ++i) {
            out.node_logits[i] = node[i] == 1.0 ? 60.0 : -60.0;
            out.node_probs[i] = node[i];
            for (std::size_t j = 0; j < kSubjectCount; ++j) {
                out.edge_logits[i][j] = edge[i][j] == 1.0 ? 60.0 : -60.0;
                out.edge_probs[i][j] = edge[i][j];
            }
        }
        const auto lv = compute_loss(out, y, {1.0, 1.0});
        CHECK(lv.loss < 1e-5);  // clamp floor: -ln(1 - 1e-7) per term
    }
    SUBCASE("single node at one half") {
        RouterLabels y;
        y.node[0] = 1.0;
        NodeArray node = filled(1e-9);
        node[0] = 0.5;
        auto out = output_from(node, filled_pairs(0.5));
        for (std::size_t i = 1; i < kSubjectCount; ++i) out.node_logits[i] = -100.0;
        const auto lv = compute_loss(out, y, {1.0, 0.0});
        // 14 clamped terms at -ln(1 - 1e-7) each add about 1.4e-6
        CHECK(lv.loss == doctest::Approx(std::log(2.0)).epsilon(1e-5));
        CHECK(lv.node_logit_grad[0] == doctest::Approx(-0.5));
    }
    SUBCASE("masked edge contributes nothing") {
        RouterLabels y;
        y.node[0] = 1.0;
        auto out = output_from(filled(0.3), filled_pairs(0.4));
        const auto base = compute_loss(out, y, {1.0, 1.0});
        out.edge_probs[2][3] = 0.9;
        out.edge_logits[2][3] = std::log(9.0);
        const auto moved = compute_loss(out, y, {1.0, 1.0});
        CHECK(moved.loss == base.loss);
        CHECK(moved.edge_logit_grad[2][3] == 0.0);
        // an unmasked pair does move the loss
        out.edge_logits[0][3] = 5.0;
        CHECK(compute_loss(out, y, {1.0, 1.0}).loss != base.loss);
    }
    SUBCASE("non-finite logits are reported") {
        RouterLabels y;
        auto out = output_from(filled(0.3), filled_pairs(0.4));
        out.node_logits[1] = std::nan("");
        try {
            compute_loss(out, y, {1.0, 1.0});
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonFiniteLoss);
        }
    }
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed : {1u, 2u}) {
        const auto r = gradient_check(seed, 1);
        INFO("seed " << seed << " worst " << r.worst << " kinks " << r.kinks);
        CHECK(r.compared > 0);
        CHECK(r.max_rel_error <= 1e-4);
    }
}

TEST_CASE("masked edge predictions never reach loss or gradient") {
    const auto r = masking_check(17, 20);
    CHECK(r.masked_pairs > 0);
    CHECK(r.loss_unchanged);
    CHECK(r.gradient_unchanged);
}

TEST_CASE("positive scaling of the node output layer keeps the logit order") {
    const auto dims = tiny_dims(6, 8, 8, 2);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = RouterParams::random(dims, rng.next(), 0.5);
        p.node_head.out_bias(0, 0) = rng.normal();
        const auto q = random_question(rng, dims.question_dim);
        const auto base = forward(p, q).output;
        const double c = rng.uniform(1.01, 10.0);
        for (double& v : p.node_head.out_weight.data) v *= c;
        p.node_head.out_bias(0, 0) *= c;
        const auto scaled = forward(p, q).output;

        std::vector<std::size_t> a(kSubjectCount), b(kSubjectCount);
        std::iota(a.begin(), a.end(), 0);
        std::iota(b.begin(), b.end(), 0);
        std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return base.node_logits[x] > base.node_logits[y]; });
        std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return scaled.node_logits[x] > scaled.node_logits[y]; });
        CHECK(a == b);
        for (std::size_t i = 0; i < kSubjectCount; ++i)
            CHECK((base.node_logits[i] > 0.0) == (scaled.node_logits[i] > 0.0));
    }
}

TEST_CASE("generation: threshold and acyclicity repair") {
    NodeArray node = filled(0.1);
    node[index_of(Subject::Math)] = 0.9;
    node[index_of(Subject::Physics)] = 0.7;
    PairArray edge = filled_pairs(0.2);
    edge[index_of(Subject::Physics)][index_of(Subject::Math)] = 0.8;
    edge[index_of(Subject::Math)][index_of(Subject::Physics)] = 0.6;
    const auto g = sdag_from_output(output_from(node, edge));
    REQUIRE(g.nodes.size() == 2);
    CHECK(g.has_node(Subject::Math));
    CHECK(g.has_node(Subject::Physics));
    CHECK(g.has_edge(Subject::Physics, Subject::Math));
    CHECK_FALSE(g.has_edge(Subject::Math, Subject::Physics));
    CHECK(g.edges.size() == 1);
    CHECK(validate_dag(g).ok());
}

TEST_CASE("generation: fallback to the single best node") {
    NodeArray node = filled(0.2);
    node[index_of(Subject::Biology)] = 0.4;
    node[index_of(Subject::Other)] = 0.45;  // Other never enters a DAG
    const auto g = sdag_from_output(output_from(node, filled_pairs(0.9)));
    REQUIRE(g.nodes.size() == 1);
    CHECK(g.nodes[0].subject == Subject::Biology);
    CHECK(g.nodes[0].score == doctest::Approx(0.4));
    CHECK(g.edges.empty());
}

TEST_CASE("generation: at most five nodes survive") {
    NodeArray node = filled(0.1);
    const double probs[] = {0.95, 0.6, 0.85, 0.7, 0.9, 0.65, 0.8};
    for (std::size_t i = 0; i < 7; ++i) node[i] = probs[i];
    const auto g = sdag_from_output(output_from(node, filled_pairs(0.9)));
    REQUIRE(g.nodes.size() == 5);
    for (std::size_t i : {0u, 2u, 3u, 4u, 6u}) CHECK(g.has_node(subject_at(i)));
    CHECK_FALSE(g.has_node(subject_at(1)));
    CHECK_FALSE(g.has_node(subject_at(5)));
    // every retained edge points toward the higher-scoring node
    for (const auto& e : g.edges) CHECK(node[index_of(e.src)] < node[index_of(e.dst)]);
    CHECK(g.edges.size() == 10);
    CHECK(validate_dag(g).ok());
}

TEST_CASE("generation: equal node scores break ties canonically") {
    NodeArray node = filled(0.1);
    node[0] = node[1] = 0.8;
    const auto g = sdag_from_output(output_from(node, filled_pairs(0.9)));
    CHECK(g.has_edge(subject_at(0), subject_at(1)));
    CHECK_FALSE(g.has_edge(subject_at(1), subject_at(0)));
}

TEST_CASE("generated DAGs are always valid") {
    const auto dims = tiny_dims(4, 16, 6, 2);
    HashedEmbedder emb(16);
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = RouterParams::random(dims, rng.next(), rng.uniform(0.1, 3.0));
        const auto g = generate_sdag("question " + std::to_string(rng.next()), p, emb);
        const auto report = validate_dag(g);
        REQUIRE(report.ok());
        CHECK_FALSE(g.nodes.empty());
        CHECK(g.nodes.size() <= kMaxDagNodes);
        CHECK_FALSE(g.has_node(Subject::Other));
    }
}

TEST_CASE("training config guards") {
    TrainConfig c;
    c.lambda_node = 0.0;
    c.lambda_edge = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.lambda_edge = 1.0;
    CHECK_NOTHROW(c.validate());
    c.lambda_node = -0.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c.lambda_node = 1.0;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("training is deterministic and lowers the loss") {
    SyntheticConfig sc;
    sc.count = 60;
    sc.seed = 4;
    const auto data = training_samples(generate_synthetic_questions(sc), kDefaultDropThreshold);
    REQUIRE(data.size() == 60);
    HashedEmbedder emb(64);
    const auto dims = tiny_dims(8, 64, 16, 2);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 11;
    cfg.learning_rate = 5e-3;
    std::vector<double> seen;
    const auto a = train(data, cfg, dims, emb, [&](std::size_t, double l) { seen.push_back(l); });
    const auto b = train(data, cfg, dims, emb);
    CHECK(a.params == b.params);
    CHECK(a.epoch_losses == b.epoch_losses);
    CHECK(seen == a.epoch_losses);
    REQUIRE(a.epoch_losses.size() == 6);
    CHECK(a.epoch_losses.back() < a.epoch_losses.front());
    CHECK(a.params.all_finite());

    cfg.seed = 12;
    CHECK_FALSE(train(data, cfg, dims, emb).params == a.params);
}

TEST_CASE("training rejects an embedder of the wrong width") {
    std::vector<TrainingSample> data{{"q", build_ground_truth_dag({{Subject::Math, 1.0}})}};
    HashedEmbedder emb(32);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(data, cfg, tiny_dims(4, 16, 4, 1), emb), Error);
    CHECK_THROWS_AS(train({}, cfg, tiny_dims(4, 32, 4, 1), emb), Error);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Checkpoint c;
    c.params = RouterParams::random(tiny_dims(5, 7, 6, 2), 21, 0.3);
    c.params.init_bias(0, 2) = 0.1 + 0.2;  // not representable in short decimal
    c.params.edge_head.out_bias(0, 0) = -1.0 / 3.0;
    c.seed = 21;
    c.embedder = HashedEmbedder(7).describe();
    const auto path = temp_file("roundtrip.json");
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    CHECK(back.params == c.params);
    CHECK(back.params.dims == c.params.dims);
    CHECK(back.seed == 21);
    CHECK(back.embedder == c.embedder);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint error codes") {
    Checkpoint c;
    c.params = RouterParams::random(tiny_dims(2, 3, 2, 1), 1);
    auto j = checkpoint_to_json(c);

    auto expect = [](auto&& fn, ErrorCode code) {
        try {
            fn();
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };

    SUBCASE("future version") {
        auto bad = j;
        bad["version"] = 99;
        expect([&] { checkpoint_from_json(bad); }, ErrorCode::VersionMismatch);
    }
    SUBCASE("truncated file") {
        const auto path = temp_file("truncated.json");
        const auto text = j.dump();
        std::ofstream(path) << text.substr(0, text.size() / 2);
        expect([&] { load_checkpoint(path); }, ErrorCode::CorruptCheckpoint);
        std::filesystem::remove(path);
    }
    SUBCASE("missing tensor") {
        auto bad = j;
        bad["tensors"].erase(bad["tensors"].begin());
        expect([&] { checkpoint_from_json(bad); }, ErrorCode::CorruptCheckpoint);
    }
    SUBCASE("missing file") {
        expect([&] { load_checkpoint(temp_file("does_not_exist.json")); }, ErrorCode::IoError);
    }
}
