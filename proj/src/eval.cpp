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

#include "sdag/eval.hpp"

#include "sdag/error.hpp"
#include "sdag/hash.hpp"
#include "sdag/parallel.hpp"
#include "sdag/random.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sdag {

using nlohmann::json;

namespace {

struct ModeInfo {
    EvalMode mode;
    const char* name;
    const char* label;
};

constexpr std::array<ModeInfo, 5> kModes = {{
    {EvalMode::Sdag, "sdag", "S-DAG"},
    {EvalMode::Fcg, "fcg", "FCG"},
    {EvalMode::NoGnn, "no_gnn", "w/o GNN"},
    {EvalMode::RandomModel, "random_model", "w/ GNN, random model"},
    {EvalMode::SingleCot, "single_cot", "single model CoT"},
}};

bool uses_router(EvalMode m) { return m == EvalMode::Sdag || m == EvalMode::Fcg || m == EvalMode::RandomModel; }
bool uses_profiles(EvalMode m) { return m == EvalMode::Sdag || m == EvalMode::Fcg || m == EvalMode::NoGnn; }

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ConfigError, what);
}

void check_inputs(const EvalConfig& cfg, const EvalInputs& in) {
    require(!cfg.modes.empty(), "no evaluation mode selected");
    require(cfg.seeds > 0, "at least one seed is required");
    require(in.questions != nullptr && in.backends != nullptr && in.pool != nullptr,
            "evaluation needs questions, a model pool and backends");
    if (in.questions->empty()) throw Error(ErrorCode::EmptySplit, "evaluation set is empty");
    if (in.pool->models.empty()) throw Error(ErrorCode::EmptyPool, "model pool is empty");
    for (const auto& m : in.pool->models) {
        require(in.backends->contains(m.backend), "model " + m.model_id + " uses unknown backend " + m.backend);
    }
    for (auto mode : cfg.modes) {
        const std::string name(mode_name(mode));
        if (uses_router(mode)) {
            require(in.router != nullptr && in.embedder != nullptr, name + " needs a router checkpoint");
            require(in.embedder->dim() == in.router->dims.question_dim,
                    "embedder dimension does not match the checkpoint");
        }
        if (uses_profiles(mode)) require(in.profiles != nullptr && !in.profiles->profiles.empty(), name + " needs profiles");
        if (mode == EvalMode::NoGnn) {
            for (const auto& q : *in.questions) {
                require(q.subjects.has_value(), "no_gnn needs subject annotations; " + q.id + " has none");
            }
        }
        if (mode == EvalMode::SingleCot && !cfg.single_model.empty()) in.pool->at(cfg.single_model);
    }
}

std::string default_single_model(const ModelPool& pool) {
    auto ids = pool.model_ids();
    return *std::min_element(ids.begin(), ids.end());
}

json trace_json(const ExecutionTrace& t) {
    json arr = json::array();
    for (const auto& r : t.records) arr.push_back(to_json(r, t));
    arr.push_back(trace_summary_json(t));
    return arr;
}

ExecutionTrace run_single(const QuestionRecord& q, const std::string& model_id, const ModelPool& pool,
                          BackendRegistry& backends) {
    ExecutionTrace t;
    t.question_id = q.id;
    t.mode = "single_cot";
    NodeRecord rec;
    rec.subject = Subject::Other;
    rec.role = AgentRole::Dominant;
    rec.model_id = model_id;
    rec.prompt = render_single_model_prompt(format_question(q));
    ChatRequest req;
    req.backend = pool.at(model_id).backend;
    req.user = rec.prompt;
    req.metadata = {{"question_id", q.id}, {"model", model_id}, {"mode", "single_cot"}};
    try {
        const auto res = backends.complete(req);
        rec.reply = res.text;
        rec.latency_ms = res.latency_ms;
        rec.attempts = res.attempts;
    } catch (const Error& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.reply = std::string(kUnavailable);
    }
    rec.finish_ms = rec.latency_ms;
    t.records.push_back(rec);
    t.calls = 1;
    t.total_ms = rec.finish_ms;
    if (!rec.failed) t.final_answer = extract_answer(rec.reply);
    return t;
}

ModelSelection random_selection(const SDag& g, const std::vector<std::string>& ids, std::uint64_t trial_seed,
                                const std::string& qid) {
    Rng rng(trial_seed ^ fnv1a64(qid));
    ModelSelection sel;
    for (const auto& n : g.nodes) sel[n.subject] = ids[rng.below(ids.size())];
    return sel;
}

ExecutionTrace run_mode(EvalMode mode, const QuestionRecord& q, std::uint64_t trial_seed, const EvalConfig& cfg,
                        const EvalInputs& in, const std::vector<std::string>& sorted_ids,
                        const std::string& single_model) {
    if (mode == EvalMode::SingleCot) return run_single(q, single_model, *in.pool, *in.backends);

    const AgentQuestion aq{q.id, format_question(q)};
    const ExecutionOptions opts{cfg.node_parallelism, std::string(mode_name(mode))};
    // The router sees the question text only; annotations are read solely by no_gnn.
    const SDag g = mode == EvalMode::NoGnn ? build_ground_truth_dag(*q.subjects)
                                            : generate_sdag(q.question, *in.router, *in.embedder, cfg.generation);
    if (mode == EvalMode::RandomModel) {
        return execute_dag(g, aq, random_selection(g, sorted_ids, trial_seed, q.id), *in.pool, *in.backends, opts);
    }
    const auto sel = select_models(g, *in.profiles);
    if (mode == EvalMode::Fcg) return execute_fcg(g.nodes, aq, sel, *in.pool, *in.backends, opts);
    return execute_dag(g, aq, sel, *in.pool, *in.backends, opts);
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

} // namespace

std::string_view mode_name(EvalMode m) noexcept {
    for (const auto& info : kModes) {
        if (info.mode == m) return info.name;
    }
    return "sdag";
}

std::string_view mode_label(EvalMode m) noexcept {
    for (const auto& info : kModes) {
        if (info.mode == m) return info.label;
    }
    return "S-DAG";
}

EvalMode parse_mode(std::string_view name) {
    for (const auto& info : kModes) {
        if (name == info.name) return info.mode;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown evaluation mode: " + std::string(name));
}

EvalReport evaluate(const EvalConfig& cfg, const EvalInputs& in) {
    check_inputs(cfg, in);
    const auto& questions = *in.questions;
    auto sorted_ids = in.pool->model_ids();
    std::sort(sorted_ids.begin(), sorted_ids.end());
    const std::string single_model = cfg.single_model.empty() ? default_single_model(*in.pool) : cfg.single_model;

    EvalReport report;
    report.seeds = cfg.seeds;
    report.base_seed = cfg.base_seed;
    report.time_basis = cfg.wall_clock ? "wall_clock" : "simulated";

    for (auto mode : cfg.modes) {
        const auto calls_before = in.backends->counter().total();
        ModeSummary summary;
        summary.mode = std::string(mode_name(mode));
        summary.questions = questions.size();
        std::uint64_t trace_calls = 0;
        double time_total = 0.0;

        for (std::size_t trial = 0; trial < cfg.seeds; ++trial) {
            const std::uint64_t trial_seed = cfg.base_seed + trial;
            std::vector<QuestionOutcome> slots(questions.size());
            parallel_for(questions.size(), cfg.parallelism, [&](std::size_t i) {
                const auto& q = questions[i];
                const auto started = std::chrono::steady_clock::now();
                const auto t = run_mode(mode, q, trial_seed, cfg, in, sorted_ids, single_model);
                const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - started;

                auto& o = slots[i];
                o.mode = summary.mode;
                o.trial = trial;
                o.question_id = q.id;
                o.gold = q.gold;
                o.answer = t.final_answer;
                o.correct = t.final_answer.has_value() && *t.final_answer == q.gold;
                o.calls = t.calls;
                o.time_ms = cfg.wall_clock ? elapsed.count() : t.total_ms;
                o.failed_calls = static_cast<std::uint64_t>(
                    std::count_if(t.records.begin(), t.records.end(), [](const auto& r) { return r.failed; }));
                if (cfg.keep_traces) o.trace = trace_json(t);
            });

            std::size_t correct = 0;
            for (auto& o : slots) {
                correct += o.correct ? 1 : 0;
                trace_calls += o.calls;
                time_total += o.time_ms;
                report.outcomes.push_back(std::move(o));
            }
            summary.trial_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(questions.size()));
        }

        summary.total_calls = in.backends->counter().total() - calls_before;
        if (summary.total_calls != trace_calls) {
            throw Error(ErrorCode::InvalidArgument, "backend counter disagrees with traced calls; registry shared?");
        }
        const double runs = static_cast<double>(cfg.seeds * questions.size());
        summary.accuracy_mean = std::accumulate(summary.trial_accuracy.begin(), summary.trial_accuracy.end(), 0.0) /
                                static_cast<double>(cfg.seeds);
        summary.accuracy_std = sample_std(summary.trial_accuracy);
        summary.avg_calls = static_cast<double>(trace_calls) / runs;
        summary.avg_time_s = time_total / runs / 1000.0;
        report.modes.push_back(std::move(summary));
    }
    return report;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

json to_json(const EvalReport& r) {
    json modes = json::array();
    for (const auto& m : r.modes) {
        modes.push_back({{"mode", m.mode},
                         {"trial_accuracy", m.trial_accuracy},
                         {"accuracy_mean", m.accuracy_mean},
                         {"accuracy_std", m.accuracy_std},
                         {"avg_time_s", m.avg_time_s},
                         {"avg_calls", m.avg_calls},
                         {"total_calls", m.total_calls},
                         {"questions", m.questions}});
    }
    json outcomes = json::array();
    for (const auto& o : r.outcomes) {
        outcomes.push_back({{"mode", o.mode},
                            {"trial", o.trial},
                            {"question_id", o.question_id},
                            {"gold", o.gold},
                            {"answer", o.answer ? json(*o.answer) : json(nullptr)},
                            {"correct", o.correct},
                            {"calls", o.calls},
                            {"time_ms", o.time_ms},
                            {"failed_calls", o.failed_calls},
                            {"trace", o.trace}});
    }
    return {{"seeds", r.seeds}, {"base_seed", r.base_seed}, {"time_basis", r.time_basis},
            {"modes", modes},   {"outcomes", outcomes}};
}

EvalReport eval_report_from_json(const json& j) {
    try {
        EvalReport r;
        r.seeds = j.at("seeds").get<std::size_t>();
        r.base_seed = j.at("base_seed").get<std::uint64_t>();
        r.time_basis = j.at("time_basis").get<std::string>();
        for (const auto& m : j.at("modes")) {
            ModeSummary s;
            s.mode = m.at("mode").get<std::string>();
            s.trial_accuracy = m.at("trial_accuracy").get<std::vector<double>>();
            s.accuracy_mean = m.at("accuracy_mean").get<double>();
            s.accuracy_std = m.at("accuracy_std").get<double>();
            s.avg_time_s = m.at("avg_time_s").get<double>();
            s.avg_calls = m.at("avg_calls").get<double>();
            s.total_calls = m.at("total_calls").get<std::uint64_t>();
            s.questions = m.at("questions").get<std::size_t>();
            r.modes.push_back(std::move(s));
        }
        for (const auto& o : j.at("outcomes")) {
            QuestionOutcome q;
            q.mode = o.at("mode").get<std::string>();
            q.trial = o.at("trial").get<std::size_t>();
            q.question_id = o.at("question_id").get<std::string>();
            q.gold = o.at("gold").get<std::string>();
            if (!o.at("answer").is_null()) q.answer = o.at("answer").get<std::string>();
            q.correct = o.at("correct").get<bool>();
            q.calls = o.at("calls").get<std::uint64_t>();
            q.time_ms = o.at("time_ms").get<double>();
            q.failed_calls = o.at("failed_calls").get<std::uint64_t>();
            q.trace = o.at("trace");
            r.outcomes.push_back(std::move(q));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed report: ") + e.what());
    }
}

std::string render_report(const EvalReport& r, ReportFormat format) {
    if (format == ReportFormat::Json) return to_json(r).dump(2) + "\n";

    std::vector<std::array<std::string, 4>> rows{{"Variant", "Accuracy", "Inf. Time", "#LLM Calls"}};
    for (const auto& m : r.modes) {
        char time[32];
        char calls[32];
        std::snprintf(time, sizeof time, "%.2fs", m.avg_time_s);
        std::snprintf(calls, sizeof calls, "%.1f", m.avg_calls);
        rows.push_back({std::string(mode_label(parse_mode(m.mode))),
                        format_percent(m.accuracy_mean) + " +/- " + format_percent(m.accuracy_std), time, calls});
    }
    std::array<std::size_t, 4> width{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    auto emit = [&](const std::array<std::string, 4>& row) {
        for (std::size_t c = 0; c < 4; ++c) {
            const std::string pad(width[c] - row[c].size(), ' ');
            if (c > 0) out += "  ";
            out += c == 0 ? row[c] + pad : pad + row[c];
        }
        out += "\n";
    };
    emit(rows[0]);
    std::string rule;
    for (std::size_t c = 0; c < 4; ++c) rule += std::string(width[c], '-') + (c < 3 ? "  " : "");
    out += rule + "\n";
    for (std::size_t k = 1; k < rows.size(); ++k) emit(rows[k]);
    return out;
}

} // namespace sdag
