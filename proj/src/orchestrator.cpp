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

#include "sdag/orchestrator.hpp"

#include "sdag/error.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace sdag {

using nlohmann::json;

std::map<Subject, AgentRole> assign_roles(const SDag& g) {
    std::map<Subject, AgentRole> roles;
    for (const auto& n : g.nodes) {
        const auto in = g.in_degree(n.subject);
        const auto out = g.out_degree(n.subject);
        if (out == 0) {
            roles[n.subject] = AgentRole::Dominant;
        } else if (in == 0) {
            roles[n.subject] = AgentRole::SubjectExpert;
        } else {
            roles[n.subject] = AgentRole::Supporting;
        }
    }
    return roles;
}

Subject final_node(const SDag& g) {
    const auto roles = assign_roles(g);
    const SDagNode* best = nullptr;
    for (const auto& n : g.nodes) {
        if (roles.at(n.subject) != AgentRole::Dominant) continue;
        if (best == nullptr || n.score > best->score || (n.score == best->score && n.subject < best->subject)) {
            best = &n;
        }
    }
    if (best == nullptr) throw Error(ErrorCode::InvalidArgument, "graph has no dominant node");
    return best->subject;
}

ModelSelection select_models(const SDag& g, const ProfileStore& store) {
    ModelSelection sel;
    for (const auto& n : g.nodes) sel[n.subject] = select_model(n.subject, store);
    return sel;
}

namespace {

struct Task {
    std::vector<std::size_t> deps;
    std::function<void()> run;
};

/// Dependency-driven execution on up to `parallelism` workers.
void run_task_graph(std::vector<Task>& tasks, std::size_t parallelism) {
    const std::size_t n = tasks.size();
    std::vector<std::vector<std::size_t>> successors(n);
    std::vector<std::size_t> pending(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        pending[t] = tasks[t].deps.size();
        for (auto d : tasks[t].deps) successors[d].push_back(t);
    }

    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::size_t> ready;
    std::size_t finished = 0;
    std::exception_ptr failure;
    for (std::size_t t = 0; t < n; ++t) {
        if (pending[t] == 0) ready.push_back(t);
    }

    auto worker = [&] {
        for (;;) {
            std::size_t task;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [&] { return !ready.empty() || finished == n; });
                if (ready.empty()) return;
                task = ready.front();
                ready.pop_front();
            }
            std::exception_ptr err;
            try {
                tasks[task].run();
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::lock_guard lock(mu);
                if (err && !failure) failure = err;
                ++finished;
                for (auto s : successors[task]) {
                    if (--pending[s] == 0) ready.push_back(s);
                }
            }
            cv.notify_all();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

void call_agent(NodeRecord& rec, const AgentQuestion& question, const ModelPool& pool, BackendRegistry& backends,
                const std::string& mode) {
    const auto& model = pool.at(rec.model_id);
    ChatRequest req;
    req.backend = model.backend;
    req.user = rec.prompt;
    req.metadata = {{"question_id", question.id},
                    {"subject", std::string(subject_name(rec.subject))},
                    {"role", std::string(role_name(rec.role))},
                    {"model", rec.model_id},
                    {"node_index", std::to_string(rec.index)},
                    {"round", std::to_string(rec.round)},
                    {"mode", mode}};
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
    rec.finish_ms = rec.start_ms + rec.latency_ms;
}

const std::string& model_for(const ModelSelection& selection, Subject s) {
    auto it = selection.find(s);
    if (it == selection.end()) {
        throw Error(ErrorCode::InvalidArgument, "no model selected for " + std::string(subject_name(s)));
    }
    return it->second;
}

void finish_trace(ExecutionTrace& t) {
    t.calls = t.records.size();
    for (const auto& r : t.records) t.total_ms = std::max(t.total_ms, r.finish_ms);
}

} // namespace

ExecutionTrace execute_dag(const SDag& g, const AgentQuestion& question, const ModelSelection& selection,
                           const ModelPool& pool, BackendRegistry& backends, const ExecutionOptions& opts) {
    const auto report = validate_dag(g);
    if (!report.ok()) {
        throw Error(ErrorCode::InvalidArgument,
                    "cannot execute invalid graph (" + std::string(violation_name(report.violations[0].kind)) + ")");
    }
    const auto order = *topological_order(g);
    const auto roles = assign_roles(g);
    const Subject last = final_node(g);

    std::map<Subject, std::size_t> position;
    for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;

    ExecutionTrace trace;
    trace.question_id = question.id;
    trace.mode = opts.mode;
    trace.final_node = last;
    trace.records.resize(order.size());

    std::vector<Task> tasks(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Subject s = order[k];
        auto& rec = trace.records[k];
        rec.index = k;
        rec.subject = s;
        rec.role = roles.at(s);
        rec.model_id = model_for(selection, s);
        pool.at(rec.model_id);
        for (Subject p : g.predecessors(s)) tasks[k].deps.push_back(position.at(p));

        tasks[k].run = [&, k, s] {
            auto& r = trace.records[k];
            std::vector<UpstreamReply> upstream;
            for (auto d : tasks[k].deps) {
                const auto& up = trace.records[d];
                upstream.push_back({up.subject, up.reply});
                r.start_ms = std::max(r.start_ms, up.finish_ms);
            }
            // A sink without upstream content is prompted as a subject expert.
            const AgentRole prompt_role = upstream.empty() ? AgentRole::SubjectExpert : r.role;
            r.prompt = render_prompt(prompt_role, s, question.text, std::move(upstream), s == last);
            call_agent(r, question, pool, backends, opts.mode);
        };
    }
    run_task_graph(tasks, opts.parallelism);

    finish_trace(trace);
    const auto& final_rec = trace.records[position.at(last)];
    if (!final_rec.failed) trace.final_answer = extract_answer(final_rec.reply);
    return trace;
}

ExecutionTrace execute_fcg(const std::vector<SDagNode>& nodes, const AgentQuestion& question,
                           const ModelSelection& selection, const ModelPool& pool, BackendRegistry& backends,
                           const ExecutionOptions& opts) {
    if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "fully connected execution needs at least one node");
    std::vector<SDagNode> sorted = nodes;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.subject < b.subject; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].subject == sorted[k - 1].subject) throw Error(ErrorCode::InvalidArgument, "duplicate node");
    }
    const SDagNode* best = &sorted.front();
    for (const auto& n : sorted) {
        if (n.score > best->score) best = &n;
    }
    const Subject last = best->subject;
    const std::size_t n = sorted.size();

    ExecutionTrace trace;
    trace.question_id = question.id;
    trace.mode = opts.mode;
    trace.final_node = last;
    trace.records.resize(2 * n);

    std::vector<Task> tasks(2 * n);
    for (std::size_t idx = 0; idx < 2 * n; ++idx) {
        const std::size_t k = idx % n;
        auto& rec = trace.records[idx];
        rec.index = idx;
        rec.round = idx < n ? 1 : 2;
        rec.subject = sorted[k].subject;
        rec.model_id = model_for(selection, rec.subject);
        pool.at(rec.model_id);
        if (rec.round == 1) {
            rec.role = AgentRole::SubjectExpert;
            tasks[idx].run = [&, idx] {
                auto& r = trace.records[idx];
                r.prompt = render_prompt(AgentRole::SubjectExpert, r.subject, question.text, {}, false);
                call_agent(r, question, pool, backends, opts.mode);
            };
            continue;
        }
        rec.role = rec.subject == last ? AgentRole::Dominant : AgentRole::Supporting;
        // The revision round starts once every first-round answer is in.
        for (std::size_t p = 0; p < n; ++p) tasks[idx].deps.push_back(p);
        tasks[idx].run = [&, idx, k] {
            auto& r = trace.records[idx];
            std::vector<UpstreamReply> upstream;
            for (std::size_t p = 0; p < n; ++p) {
                r.start_ms = std::max(r.start_ms, trace.records[p].finish_ms);
                // Peers only; a lone agent revises its own first answer.
                if (p != k || n == 1) upstream.push_back({trace.records[p].subject, trace.records[p].reply});
            }
            r.prompt = render_prompt(AgentRole::Supporting, r.subject, question.text, std::move(upstream),
                                     r.subject == last);
            call_agent(r, question, pool, backends, opts.mode);
        };
    }
    run_task_graph(tasks, opts.parallelism);

    finish_trace(trace);
    const auto& final_rec = trace.records[n + static_cast<std::size_t>(best - sorted.data())];
    if (!final_rec.failed) trace.final_answer = extract_answer(final_rec.reply);
    return trace;
}

json to_json(const NodeRecord& r, const ExecutionTrace& owner) {
    json j = {{"type", "node"},
              {"question_id", owner.question_id},
              {"mode", owner.mode},
              {"index", r.index},
              {"round", r.round},
              {"subject", std::string(subject_name(r.subject))},
              {"role", std::string(role_name(r.role))},
              {"model_id", r.model_id},
              {"prompt", r.prompt},
              {"reply", r.reply},
              {"latency_ms", r.latency_ms},
              {"attempts", r.attempts},
              {"start_ms", r.start_ms},
              {"finish_ms", r.finish_ms},
              {"failed", r.failed}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

json trace_summary_json(const ExecutionTrace& t) {
    return {{"type", "summary"},
            {"question_id", t.question_id},
            {"mode", t.mode},
            {"calls", t.calls},
            {"total_ms", t.total_ms},
            {"final_node", std::string(subject_name(t.final_node))},
            {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)}};
}

std::string trace_to_jsonl(const ExecutionTrace& t) {
    std::string out;
    for (const auto& r : t.records) out += to_json(r, t).dump() + "\n";
    out += trace_summary_json(t).dump() + "\n";
    return out;
}

} // namespace sdag
