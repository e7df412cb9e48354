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

#include "sdag/router.hpp"

#include "sdag/error.hpp"
#include "sdag/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdag {

namespace {

constexpr std::size_t kN = kSubjectCount;

/// out += W[:, offset : offset + x.size()] * x. Zero inputs are skipped, which
/// matters for the sparse hashed question vectors.
void matvec_add(const Tensor& w, std::size_t offset, std::span<const double> x, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double xc = x[c];
        if (xc == 0.0) continue;
        for (std::size_t r = 0; r < w.rows; ++r) out[r] += w(r, offset + c) * xc;
    }
}

/// out += W[:, offset : offset + x.size()] * x for dense x, row by row.
void matvec_dense_add(const Tensor& w, std::size_t offset, std::span<const double> x, std::span<double> out) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.data.data() + r * w.cols + offset;
        double acc = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) acc += wr[c] * x[c];
        out[r] += acc;
    }
}

/// out += W[:, offset : offset + out.size()]^T * dz.
void matvec_t_add(const Tensor& w, std::size_t offset, std::span<const double> dz, std::span<double> out) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        const double* wr = w.data.data() + r * w.cols + offset;
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += wr[c] * d;
    }
}

/// G[:, offset : offset + x.size()] += dz x^T.
void outer_add(Tensor& g, std::size_t offset, std::span<const double> dz, std::span<const double> x) {
    for (std::size_t r = 0; r < g.rows; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        double* gr = g.data.data() + r * g.cols + offset;
        for (std::size_t c = 0; c < x.size(); ++c) gr[c] += d * x[c];
    }
}

/// outer_add for a mostly-zero x.
void sparse_outer_add(Tensor& g, std::size_t offset, std::span<const double> dz, std::span<const double> x) {
    std::vector<std::size_t> nz;
    for (std::size_t c = 0; c < x.size(); ++c) {
        if (x[c] != 0.0) nz.push_back(c);
    }
    for (std::size_t r = 0; r < g.rows; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        double* gr = g.data.data() + r * g.cols + offset;
        for (auto c : nz) gr[c] += d * x[c];
    }
}

void add_into(std::span<double> out, std::span<const double> x) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += x[k];
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

double activate(Activation a, double z) { return a == Activation::Relu ? relu(z) : z; }

double activate_grad(Activation a, double z) { return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0; }

void check_question(const RouterParams& p, std::span<const double> q) {
    if (q.size() != p.dims.question_dim) {
        throw Error(ErrorCode::DimensionMismatch, "question embedding has " + std::to_string(q.size()) +
                                                      " entries, router expects " +
                                                      std::to_string(p.dims.question_dim));
    }
}

void check_states(const RouterParams& p, const Tensor& x) {
    if (x.rows != kN || x.cols != p.dims.hidden) {
        throw Error(ErrorCode::DimensionMismatch, "node states must be 15 x " + std::to_string(p.dims.hidden));
    }
}

Tensor init_pre_activation(const RouterParams& p, std::span<const double> q) {
    const auto h = p.dims.hidden;
    const auto ds = p.dims.subject_dim;
    std::vector<double> shared(p.init_bias.data);
    matvec_add(p.init_weight, ds, q, shared);
    Tensor z(kN, h);
    for (std::size_t i = 0; i < kN; ++i) {
        auto zi = z.row(i);
        std::copy(shared.begin(), shared.end(), zi.begin());
        matvec_dense_add(p.init_weight, 0, p.subject_embeddings.row(i), zi);
    }
    return z;
}

Tensor neighbour_mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(kN - 1);
    std::vector<double> total(x.cols, 0.0);
    for (std::size_t i = 0; i < kN; ++i) add_into(total, x.row(i));
    Tensor m(kN, x.cols);
    for (std::size_t i = 0; i < kN; ++i) {
        for (std::size_t k = 0; k < x.cols; ++k) m(i, k) = (total[k] - x(i, k)) * inv;
    }
    return m;
}

Tensor layer_pre_activation(const MessageLayer& layer, const Tensor& x, const Tensor& m) {
    Tensor z(kN, x.cols);
    for (std::size_t i = 0; i < kN; ++i) {
        auto zi = z.row(i);
        std::copy(layer.bias.data.begin(), layer.bias.data.end(), zi.begin());
        matvec_dense_add(layer.w_self, 0, x.row(i), zi);
        matvec_dense_add(layer.w_in, 0, m.row(i), zi);
        matvec_dense_add(layer.w_out, 0, m.row(i), zi);
    }
    return z;
}

Tensor map_activation(Activation a, const Tensor& z) {
    Tensor out = z;
    for (double& v : out.data) v = activate(a, v);
    return out;
}

void run_heads(const RouterParams& p, const Tensor& x, std::span<const double> q, ForwardCache& c) {
    const auto h = p.dims.hidden;
    auto& out = c.output;

    c.node_pre = Tensor(kN, h);
    for (std::size_t i = 0; i < kN; ++i) {
        auto zi = c.node_pre.row(i);
        std::copy(p.node_head.hidden_bias.data.begin(), p.node_head.hidden_bias.data.end(), zi.begin());
        matvec_dense_add(p.node_head.hidden_weight, 0, x.row(i), zi);
        double logit = p.node_head.out_bias.data[0];
        for (std::size_t k = 0; k < h; ++k) logit += p.node_head.out_weight.data[k] * relu(zi[k]);
        out.node_logits[i] = logit;
        out.node_probs[i] = sigmoid(logit);
    }

    const auto& eh = p.edge_head;
    c.edge_src = Tensor(kN, h);
    c.edge_dst = Tensor(kN, h);
    for (std::size_t i = 0; i < kN; ++i) {
        matvec_dense_add(eh.hidden_weight, 0, x.row(i), c.edge_src.row(i));
        matvec_dense_add(eh.hidden_weight, h, x.row(i), c.edge_dst.row(i));
    }
    c.edge_shared = eh.hidden_bias.data;
    matvec_add(eh.hidden_weight, 2 * h, q, c.edge_shared);

    for (std::size_t i = 0; i < kN; ++i) {
        for (std::size_t j = 0; j < kN; ++j) {
            if (i == j) {
                out.edge_logits[i][j] = 0.0;
                out.edge_probs[i][j] = 0.0;
                continue;
            }
            double logit = eh.out_bias.data[0];
            for (std::size_t k = 0; k < h; ++k) {
                logit += eh.out_weight.data[k] * relu(c.edge_src(i, k) + c.edge_dst(j, k) + c.edge_shared[k]);
            }
            out.edge_logits[i][j] = logit;
            out.edge_probs[i][j] = sigmoid(logit);
        }
    }
}

void backward_head_hidden(const Head& head, const Tensor& pre, std::size_t row, double dlogit, Head& grad,
                          std::vector<double>& dpre) {
    const auto h = pre.cols;
    grad.out_bias.data[0] += dlogit;
    for (std::size_t k = 0; k < h; ++k) {
        const double z = pre(row, k);
        grad.out_weight.data[k] += dlogit * relu(z);
        dpre[k] = z > 0.0 ? dlogit * head.out_weight.data[k] : 0.0;
    }
}

} // namespace

std::string_view activation_name(Activation a) noexcept { return a == Activation::Relu ? "relu" : "identity"; }

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "identity" || name == "linear") return Activation::Identity;
    throw Error(ErrorCode::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Parameters

RouterParams RouterParams::zeros(const RouterDims& d) {
    if (d.subject_dim == 0 || d.question_dim == 0 || d.hidden == 0) {
        throw Error(ErrorCode::DimensionMismatch, "router dimensions must be positive");
    }
    RouterParams p;
    p.dims = d;
    p.subject_embeddings = Tensor(kN, d.subject_dim);
    p.init_weight = Tensor(d.hidden, d.subject_dim + d.question_dim);
    p.init_bias = Tensor(1, d.hidden);
    for (std::size_t l = 0; l < d.layers; ++l) {
        p.layers.push_back({Tensor(d.hidden, d.hidden), Tensor(d.hidden, d.hidden), Tensor(d.hidden, d.hidden),
                            Tensor(1, d.hidden)});
    }
    p.node_head = {Tensor(d.hidden, d.hidden), Tensor(1, d.hidden), Tensor(1, d.hidden), Tensor(1, 1)};
    p.edge_head = {Tensor(d.hidden, 2 * d.hidden + d.question_dim), Tensor(1, d.hidden), Tensor(1, d.hidden),
                   Tensor(1, 1)};
    return p;
}

RouterParams RouterParams::random(const RouterDims& d, std::uint64_t seed, double scale) {
    RouterParams p = zeros(d);
    Rng rng(seed);
    p.for_each([&](const std::string& name, Tensor& t) {
        if (name.ends_with("bias")) return;
        for (double& v : t.data) v = scale * rng.normal();
    });
    return p;
}

void RouterParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("subject_embeddings", subject_embeddings);
    fn("init.weight", init_weight);
    fn("init.bias", init_bias);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto prefix = "layers." + std::to_string(l) + ".";
        fn(prefix + "w_self", layers[l].w_self);
        fn(prefix + "w_in", layers[l].w_in);
        fn(prefix + "w_out", layers[l].w_out);
        fn(prefix + "bias", layers[l].bias);
    }
    for (auto [head, prefix] : {std::pair<Head*, const char*>{&node_head, "node_head."},
                                std::pair<Head*, const char*>{&edge_head, "edge_head."}}) {
        fn(std::string(prefix) + "hidden.weight", head->hidden_weight);
        fn(std::string(prefix) + "hidden.bias", head->hidden_bias);
        fn(std::string(prefix) + "out.weight", head->out_weight);
        fn(std::string(prefix) + "out.bias", head->out_bias);
    }
}

void RouterParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<RouterParams*>(this)->for_each([&](const std::string& n, Tensor& t) { fn(n, t); });
}

std::size_t RouterParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

bool RouterParams::all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Tensor& t) {
        ok = ok && std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
    });
    return ok;
}

// ---------------------------------------------------------------------------
// Forward

Tensor init_node_features(const RouterParams& p, std::span<const double> question) {
    check_question(p, question);
    return map_activation(Activation::Relu, init_pre_activation(p, question));
}

Tensor message_pass(const RouterParams& p, const Tensor& x) {
    check_states(p, x);
    Tensor cur = x;
    for (const auto& layer : p.layers) {
        cur = map_activation(p.dims.message_activation, layer_pre_activation(layer, cur, neighbour_mean(cur)));
    }
    return cur;
}

RouterOutput predict(const RouterParams& p, const Tensor& states, std::span<const double> question) {
    check_states(p, states);
    check_question(p, question);
    ForwardCache c;
    run_heads(p, states, question, c);
    return c.output;
}

ForwardCache forward(const RouterParams& p, std::span<const double> question) {
    check_question(p, question);
    ForwardCache c;
    c.question.assign(question.begin(), question.end());
    c.init_pre = init_pre_activation(p, question);
    Tensor cur = map_activation(Activation::Relu, c.init_pre);
    for (const auto& layer : p.layers) {
        c.layer_mean.push_back(neighbour_mean(cur));
        c.layer_pre.push_back(layer_pre_activation(layer, cur, c.layer_mean.back()));
        c.layer_input.push_back(std::move(cur));
        cur = map_activation(p.dims.message_activation, c.layer_pre.back());
    }
    c.final_states = std::move(cur);
    run_heads(p, c.final_states, question, c);
    return c;
}

// ---------------------------------------------------------------------------
// Loss

RouterLabels labels_from_dag(const SDag& g) {
    RouterLabels y;
    for (const auto& n : g.nodes) y.node[index_of(n.subject)] = 1.0;
    for (const auto& e : g.edges) y.edge[index_of(e.src)][index_of(e.dst)] = 1.0;
    return y;
}

namespace {

/// Logit at which sigmoid reaches 1 - kProbClamp.
const double kLogitClamp = std::log((1.0 - kProbClamp) / kProbClamp);

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// BCE on the clamped probability, evaluated from the logit so that terms with
/// p near 0 or 1 do not cancel. The logit gradient is zero where the clamp is active.
std::pair<double, double> bce_term(double logit, double label) {
    const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
    const double loss = label * softplus(-z) + (1.0 - label) * softplus(z);
    const bool clamped = logit < -kLogitClamp || logit > kLogitClamp;
    return {loss, clamped ? 0.0 : sigmoid(logit) - label};
}

} // namespace

LossValue compute_loss(const RouterOutput& out, const RouterLabels& y, const LossWeights& w) {
    LossValue v;
    double node_sum = 0.0;
    double edge_sum = 0.0;
    for (std::size_t i = 0; i < kN; ++i) {
        const auto [l, g] = bce_term(out.node_logits[i], y.node[i]);
        node_sum += l;
        v.node_logit_grad[i] = w.node * g;
    }
    for (std::size_t i = 0; i < kN; ++i) {
        for (std::size_t j = 0; j < kN; ++j) {
            if (i == j || edge_masked(y, i, j)) continue;
            const auto [l, g] = bce_term(out.edge_logits[i][j], y.edge[i][j]);
            edge_sum += l;
            v.edge_logit_grad[i][j] = w.edge * g;
        }
    }
    v.loss = w.node * node_sum + w.edge * edge_sum;
    if (!std::isfinite(v.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss evaluated to " + std::to_string(v.loss));
    return v;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

/// Adds the gradient into `g`, which must have the shapes of `p`.
void backward_add(const RouterParams& p, const ForwardCache& c, const LossValue& lv, RouterParams& g) {
    const auto h = p.dims.hidden;
    const auto ds = p.dims.subject_dim;
    Tensor dx(kN, h);  // gradient w.r.t. final node states
    std::vector<double> dpre(h);

    // Node head.
    for (std::size_t i = 0; i < kN; ++i) {
        const double d = lv.node_logit_grad[i];
        if (d == 0.0) continue;
        backward_head_hidden(p.node_head, c.node_pre, i, d, g.node_head, dpre);
        outer_add(g.node_head.hidden_weight, 0, dpre, c.final_states.row(i));
        add_into(g.node_head.hidden_bias.data, dpre);
        matvec_t_add(p.node_head.hidden_weight, 0, dpre, dx.row(i));
    }

    // Edge head: pre_ij = A x_i + B x_j + (C h_Q + b).
    const auto& eh = p.edge_head;
    Tensor dsrc(kN, h);
    Tensor ddst(kN, h);
    std::vector<double> dshared(h, 0.0);
    for (std::size_t i = 0; i < kN; ++i) {
        for (std::size_t j = 0; j < kN; ++j) {
            const double d = i == j ? 0.0 : lv.edge_logit_grad[i][j];
            if (d == 0.0) continue;
            g.edge_head.out_bias.data[0] += d;
            for (std::size_t k = 0; k < h; ++k) {
                const double z = c.edge_src(i, k) + c.edge_dst(j, k) + c.edge_shared[k];
                if (z <= 0.0) continue;
                g.edge_head.out_weight.data[k] += d * z;
                const double dz = d * eh.out_weight.data[k];
                dsrc(i, k) += dz;
                ddst(j, k) += dz;
                dshared[k] += dz;
            }
        }
    }
    for (std::size_t i = 0; i < kN; ++i) {
        outer_add(g.edge_head.hidden_weight, 0, dsrc.row(i), c.final_states.row(i));
        outer_add(g.edge_head.hidden_weight, h, ddst.row(i), c.final_states.row(i));
        matvec_t_add(eh.hidden_weight, 0, dsrc.row(i), dx.row(i));
        matvec_t_add(eh.hidden_weight, h, ddst.row(i), dx.row(i));
    }
    sparse_outer_add(g.edge_head.hidden_weight, 2 * h, dshared, c.question);
    add_into(g.edge_head.hidden_bias.data, dshared);

    // Message-passing layers, last to first.
    const double inv = 1.0 / static_cast<double>(kN - 1);
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const auto& layer = p.layers[l];
        auto& gl = g.layers[l];
        const Tensor& xin = c.layer_input[l];
        const Tensor& m = c.layer_mean[l];
        const Tensor& z = c.layer_pre[l];

        Tensor dz(kN, h);
        for (std::size_t i = 0; i < kN; ++i) {
            for (std::size_t k = 0; k < h; ++k) dz(i, k) = dx(i, k) * activate_grad(p.dims.message_activation, z(i, k));
        }

        Tensor dprev(kN, h);
        Tensor dm(kN, h);
        for (std::size_t i = 0; i < kN; ++i) {
            outer_add(gl.w_self, 0, dz.row(i), xin.row(i));
            outer_add(gl.w_in, 0, dz.row(i), m.row(i));
            outer_add(gl.w_out, 0, dz.row(i), m.row(i));
            add_into(gl.bias.data, dz.row(i));
            matvec_t_add(layer.w_self, 0, dz.row(i), dprev.row(i));
            matvec_t_add(layer.w_in, 0, dz.row(i), dm.row(i));
            matvec_t_add(layer.w_out, 0, dz.row(i), dm.row(i));
        }

        std::vector<double> dm_total(h, 0.0);
        for (std::size_t i = 0; i < kN; ++i) add_into(dm_total, dm.row(i));
        for (std::size_t i = 0; i < kN; ++i) {
            for (std::size_t k = 0; k < h; ++k) dprev(i, k) += (dm_total[k] - dm(i, k)) * inv;
        }
        dx = std::move(dprev);
    }

    // Node initialization.
    std::vector<double> dz_total(h, 0.0);
    for (std::size_t i = 0; i < kN; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
            dpre[k] = c.init_pre(i, k) > 0.0 ? dx(i, k) : 0.0;
        }
        outer_add(g.init_weight, 0, dpre, p.subject_embeddings.row(i));
        matvec_t_add(p.init_weight, 0, dpre, g.subject_embeddings.row(i));
        add_into(dz_total, dpre);
    }
    sparse_outer_add(g.init_weight, ds, dz_total, c.question);
    add_into(g.init_bias.data, dz_total);
}

} // namespace

RouterParams backward(const RouterParams& p, const ForwardCache& c, const LossValue& lv) {
    RouterParams g = RouterParams::zeros(p.dims);
    backward_add(p, c, lv, g);
    return g;
}

LossAndGradient loss_and_gradient(const RouterParams& p, std::span<const double> question, const RouterLabels& y,
                                  const LossWeights& w) {
    const auto cache = forward(p, question);
    const auto lv = compute_loss(cache.output, y, w);
    return {lv.loss, backward(p, cache, lv)};
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (!(lambda_node >= 0.0) || !(lambda_edge >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
    }
    if (lambda_node == 0.0 && lambda_edge == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "lambda_node and lambda_edge cannot both be zero");
    }
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "optimizer hyperparameters out of range");
    }
}

namespace {

class Adam {
public:
    Adam(RouterParams& params, RouterParams& grad, const TrainConfig& cfg)
        : cfg_(cfg), m_(RouterParams::zeros(params.dims)), v_(RouterParams::zeros(params.dims)) {
        params.for_each([&](const std::string&, Tensor& t) { ps.push_back(&t); });
        grad.for_each([&](const std::string&, Tensor& t) { gs.push_back(&t); });
        m_.for_each([&](const std::string&, Tensor& t) { ms.push_back(&t); });
        v_.for_each([&](const std::string&, Tensor& t) { vs.push_back(&t); });
    }

    /// One update of the bound parameters from the bound gradient buffer.
    void step(double grad_scale) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t n = 0; n < ps.size(); ++n) {
            auto& pd = ps[n]->data;
            const auto& gd = gs[n]->data;
            auto& md = ms[n]->data;
            auto& vd = vs[n]->data;
            for (std::size_t k = 0; k < pd.size(); ++k) {
                const double gk = gd[k] * grad_scale;
                md[k] = cfg_.beta1 * md[k] + (1.0 - cfg_.beta1) * gk;
                vd[k] = cfg_.beta2 * vd[k] + (1.0 - cfg_.beta2) * gk * gk;
                pd[k] -= cfg_.learning_rate * (md[k] / c1) / (std::sqrt(vd[k] / c2) + cfg_.epsilon);
            }
        }
    }

private:
    TrainConfig cfg_;
    RouterParams m_;
    RouterParams v_;
    std::vector<Tensor*> ps, gs, ms, vs;
    std::uint64_t t_ = 0;
};

void zero_fill(RouterParams& g) {
    g.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
}

} // namespace

TrainResult train(const std::vector<TrainingSample>& data, const TrainConfig& cfg, const RouterDims& dims,
                  const Embedder& embedder, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
    if (dims.question_dim != embedder.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "router question_dim " + std::to_string(dims.question_dim) +
                                                      " != embedder dim " + std::to_string(embedder.dim()));
    }

    std::vector<Embedding> questions;
    std::vector<RouterLabels> labels;
    questions.reserve(data.size());
    for (const auto& s : data) {
        questions.push_back(embedder.embed(s.question));
        labels.push_back(labels_from_dag(s.target));
    }

    TrainResult result;
    result.params = RouterParams::random(dims, cfg.seed, cfg.init_scale);
    RouterParams grad = RouterParams::zeros(dims);
    Adam opt(result.params, grad, cfg);
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const LossWeights w{cfg.lambda_node, cfg.lambda_edge};

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            zero_fill(grad);
            for (std::size_t b = start; b < end; ++b) {
                const auto cache = forward(result.params, questions[order[b]]);
                const auto lv = compute_loss(cache.output, labels[order[b]], w);
                total += lv.loss;
                backward_add(result.params, cache, lv, grad);
            }
            opt.step(1.0 / static_cast<double>(end - start));
        }
        if (!result.params.all_finite()) {
            throw Error(ErrorCode::NonFiniteLoss, "parameters diverged in epoch " + std::to_string(epoch));
        }
        const double mean = total / static_cast<double>(data.size());
        result.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Inference

SDag sdag_from_output(const RouterOutput& out, const GenerationConfig& cfg) {
    const std::size_t cap = std::clamp<std::size_t>(cfg.max_nodes, 1, kMaxDagNodes);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < kN; ++i) {
        if (subject_at(i) != Subject::Other) candidates.push_back(i);
    }
    // Descending probability, canonical order on ties.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return out.node_probs[a] > out.node_probs[b]; });

    std::vector<std::size_t> kept;
    for (std::size_t i : candidates) {
        if (out.node_probs[i] > cfg.node_threshold && kept.size() < cap) kept.push_back(i);
    }
    if (kept.empty()) kept.push_back(candidates.front());
    std::sort(kept.begin(), kept.end());

    SDag g;
    for (std::size_t i : kept) g.nodes.push_back({subject_at(i), out.node_probs[i]});
    for (std::size_t i : kept) {
        for (std::size_t j : kept) {
            if (i == j || !(out.edge_probs[i][j] > cfg.edge_threshold)) continue;
            const double pi = out.node_probs[i];
            const double pj = out.node_probs[j];
            if (pi < pj || (pi == pj && i < j)) g.edges.push_back({subject_at(i), subject_at(j), out.edge_probs[i][j]});
        }
    }
    return g;
}

SDag generate_sdag(std::string_view question, const RouterParams& p, const Embedder& embedder,
                   const GenerationConfig& cfg) {
    const auto q = embedder.embed(question);
    const auto states = message_pass(p, init_node_features(p, q));
    return sdag_from_output(predict(p, states, q), cfg);
}

} // namespace sdag
