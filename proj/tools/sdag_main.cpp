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

// Command-line front end: curate | train | profile | run | eval, plus synth
// for generating a self-contained mock workspace.

#include "sdag/curation.hpp"
#include "sdag/error.hpp"
#include "sdag/eval.hpp"
#include "sdag/orchestrator.hpp"
#include "sdag/profiling.hpp"
#include "sdag/router.hpp"
#include "sdag/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

/// Registry over the pool's inline backends plus any from --backends.
std::shared_ptr<sdag::BackendRegistry> make_registry(const std::optional<sdag::ModelPool>& pool,
                                                     const std::string& backends_path) {
    std::vector<sdag::BackendConfig> configs;
    if (pool) configs = pool->backends;
    if (!backends_path.empty()) {
        auto extra = sdag::load_backend_configs(backends_path);
        configs.insert(configs.end(), extra.begin(), extra.end());
    }
    return sdag::BackendRegistry::from_configs(configs);
}

/// "auto" keeps records of `wanted` when any record carries a split label.
std::vector<sdag::QuestionRecord> select_split(std::vector<sdag::QuestionRecord> records, const std::string& split,
                                               sdag::Split wanted) {
    if (split == "all") return records;
    const bool labelled = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.split.has_value(); });
    if (split == "auto" && !labelled) return records;
    const sdag::Split target = split == "auto" ? wanted : sdag::parse_split(split);
    std::erase_if(records, [&](const auto& r) { return r.split != target; });
    return records;
}

struct Loaded {
    std::optional<sdag::Checkpoint> checkpoint;
    std::unique_ptr<sdag::Embedder> embedder;
    std::optional<sdag::ProfileStore> profiles;
};

Loaded load_artifacts(const std::string& checkpoint, const std::string& profiles) {
    Loaded l;
    if (!checkpoint.empty()) {
        l.checkpoint = sdag::load_checkpoint(checkpoint);
        l.embedder = sdag::make_embedder(l.checkpoint->embedder);
    }
    if (!profiles.empty()) l.profiles = sdag::load_profile_store(profiles);
    return l;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::size_t count = 200;
    std::uint64_t seed = 1;
    std::string out_dir;
};

void cmd_synth(const SynthArgs& a) {
    sdag::SyntheticConfig cfg;
    cfg.count = a.count;
    cfg.seed = a.seed;
    const auto questions = sdag::generate_synthetic_questions(cfg);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);

    auto raw = questions;
    for (auto& q : raw) q.subjects.reset();
    sdag::write_jsonl(dir / "raw.jsonl", raw);
    sdag::write_jsonl(dir / "annotated.jsonl", questions);

    const auto fixture = sdag::make_oracle_fixture(questions, a.seed);
    sdag::write_text_file(dir / "oracle.json", sdag::to_json(fixture.script).dump(2) + "\n");
    sdag::write_text_file(dir / "annotator.json",
                          sdag::to_json(sdag::make_annotator_script(questions, a.seed)).dump(2) + "\n");

    json pool = sdag::to_json(fixture.pool);
    pool["backends"] = json::array({{{"name", sdag::kOracleBackend}, {"kind", "mock"}, {"script", "oracle.json"}}});
    sdag::write_text_file(dir / "pool.json", pool.dump(2) + "\n");
    const json backends = json::array({{{"name", "annotator"}, {"kind", "mock"}, {"script", "annotator.json"}}});
    sdag::write_text_file(dir / "backends.json", backends.dump(2) + "\n");
    log_line("wrote " + std::to_string(questions.size()) + " questions and mock configs to " + dir.string());
}

struct CurateArgs {
    std::string in, out, backends, backend, skip_log;
    std::size_t profiling_size = 200;
    double train_ratio = 0.7;
    std::uint64_t seed = 0;
    bool profiling_from_test = false;
    std::size_t parallelism = 1;
};

void cmd_curate(const CurateArgs& a) {
    const auto raw = sdag::read_jsonl(a.in);
    auto registry = make_registry(std::nullopt, a.backends);
    sdag::CurationConfig cfg;
    cfg.annotator = a.backend;
    cfg.seed = a.seed;
    cfg.profiling_size = a.profiling_size;
    cfg.train_ratio = a.train_ratio;
    cfg.profiling_from_test = a.profiling_from_test;
    cfg.parallelism = a.parallelism;
    const auto ds = sdag::curate_dataset(raw, *registry, cfg);
    sdag::write_jsonl(a.out, ds.records);
    if (!a.skip_log.empty()) {
        std::string lines;
        for (const auto& s : ds.skip_log) lines += json{{"id", s.id}, {"reason", s.reason}}.dump() + "\n";
        sdag::write_text_file(a.skip_log, lines);
    }
    for (const auto& w : ds.warnings) log_line("warning: " + w);
    char summary[256];
    std::snprintf(summary, sizeof summary,
                  "curated %zu records (train %zu, test %zu, profiling %zu), skipped %zu, avg subjects/question %.2f, "
                  "%llu annotation calls",
                  ds.records.size(), ds.train_size, ds.test_size, ds.profiling_size, ds.skip_log.size(),
                  ds.avg_subjects_per_question(), static_cast<unsigned long long>(registry->counter().total()));
    log_line(summary);
}

struct TrainArgs {
    std::string data, out, split = "auto", embedder_config;
    std::size_t epochs = 50, batch_size = 1, hidden = 128, subject_dim = 64, layers = 2, embed_dim = 256;
    double lr = 1e-3, lambda_node = 1.0, lambda_edge = 1.0;
    std::uint64_t seed = 0;
    std::string activation = "relu";
    bool quiet = false;
};

void cmd_train(const TrainArgs& a) {
    const auto records = select_split(sdag::read_jsonl(a.data), a.split, sdag::Split::Train);
    if (records.empty()) throw sdag::Error(sdag::ErrorCode::EmptySplit, "no training records selected");
    const auto samples = sdag::training_samples(records);

    std::unique_ptr<sdag::Embedder> embedder;
    if (a.embedder_config.empty()) {
        embedder = std::make_unique<sdag::HashedEmbedder>(a.embed_dim);
    } else {
        embedder = sdag::make_embedder(json::parse(sdag::read_text_file(a.embedder_config)));
    }
    sdag::RouterDims dims;
    dims.subject_dim = a.subject_dim;
    dims.question_dim = embedder->dim();
    dims.hidden = a.hidden;
    dims.layers = a.layers;
    dims.message_activation = sdag::parse_activation(a.activation);

    sdag::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.lambda_node = a.lambda_node;
    cfg.lambda_edge = a.lambda_edge;
    cfg.seed = a.seed;
    const auto result = sdag::train(samples, cfg, dims, *embedder, [&](std::size_t epoch, double loss) {
        if (a.quiet) return;
        char line[96];
        std::snprintf(line, sizeof line, "epoch %zu/%zu  loss %.6f", epoch + 1, a.epochs, loss);
        log_line(line);
    });
    sdag::save_checkpoint({result.params, a.seed, embedder->describe()}, a.out);
    log_line("saved checkpoint to " + a.out);
}

struct ProfileArgs {
    std::string data, pool, backends, out, split = "auto", date;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
};

void cmd_profile(const ProfileArgs& a) {
    const auto records = select_split(sdag::read_jsonl(a.data), a.split, sdag::Split::Profiling);
    const auto pool = sdag::load_pool(a.pool);
    auto registry = make_registry(pool, a.backends);
    sdag::ProfilingConfig cfg{a.seed, a.parallelism, a.date};
    const auto store = sdag::run_profiling(pool, records, *registry, cfg);
    sdag::save_profile_store(store, a.out);
    log_line("profiled " + std::to_string(pool.models.size()) + " models on " + std::to_string(records.size()) +
             " questions (" + std::to_string(store.provenance.grading_calls) + " calls); wrote " + a.out);
}

struct RunArgs {
    std::string data, id, question, checkpoint, profiles, pool, backends, trace_out, mode = "sdag";
    std::vector<std::string> options;
    std::size_t parallelism = 4;
};

void cmd_run(const RunArgs& a) {
    sdag::QuestionRecord q;
    if (!a.question.empty()) {
        q.id = a.id.empty() ? "adhoc" : a.id;
        q.question = a.question;
        q.options = a.options;
    } else {
        const auto records = sdag::read_jsonl(a.data);
        auto it = a.id.empty() ? records.begin()
                               : std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == a.id; });
        if (it == records.end()) throw sdag::Error(sdag::ErrorCode::InvalidArgument, "no question with id " + a.id);
        q = *it;
    }
    const auto artifacts = load_artifacts(a.checkpoint, a.profiles);
    const auto pool = sdag::load_pool(a.pool);
    auto registry = make_registry(pool, a.backends);

    const auto g = sdag::generate_sdag(q.question, artifacts.checkpoint->params, *artifacts.embedder);
    const auto selection = sdag::select_models(g, *artifacts.profiles);
    const sdag::AgentQuestion aq{q.id, sdag::format_question(q)};
    const sdag::ExecutionOptions opts{a.parallelism, a.mode};
    const auto trace = a.mode == "fcg" ? sdag::execute_fcg(g.nodes, aq, selection, pool, *registry, opts)
                                       : sdag::execute_dag(g, aq, selection, pool, *registry, opts);
    if (!a.trace_out.empty()) sdag::write_text_file(a.trace_out, sdag::trace_to_jsonl(trace));
    std::cout << "graph:";
    for (const auto& n : g.nodes) std::cout << ' ' << sdag::subject_name(n.subject) << "->" << selection.at(n.subject);
    std::cout << "\nedges:";
    for (const auto& e : g.edges) std::cout << ' ' << sdag::subject_name(e.src) << ">" << sdag::subject_name(e.dst);
    std::cout << "\nanswer: " << trace.final_answer.value_or("(none)") << "\ncalls: " << trace.calls << '\n';
}

struct EvalArgs {
    std::string modes = "sdag", data, checkpoint, profiles, pool, backends, out, split = "auto", single_model, text_out;
    std::size_t seeds = 3, parallelism = 1;
    std::uint64_t base_seed = 0;
    bool wall_clock = false, no_traces = false;
};

void cmd_eval(const EvalArgs& a) {
    sdag::EvalConfig cfg;
    cfg.modes.clear();
    std::stringstream ss(a.modes);
    for (std::string m; std::getline(ss, m, ',');) cfg.modes.push_back(sdag::parse_mode(m));
    cfg.seeds = a.seeds;
    cfg.base_seed = a.base_seed;
    cfg.parallelism = a.parallelism;
    cfg.single_model = a.single_model;
    cfg.wall_clock = a.wall_clock;
    cfg.keep_traces = !a.no_traces;

    const auto questions = select_split(sdag::read_jsonl(a.data), a.split, sdag::Split::Test);
    const auto artifacts = load_artifacts(a.checkpoint, a.profiles);
    const auto pool = sdag::load_pool(a.pool);
    auto registry = make_registry(pool, a.backends);

    sdag::EvalInputs in;
    in.questions = &questions;
    in.pool = &pool;
    in.backends = registry.get();
    in.profiles = artifacts.profiles ? &*artifacts.profiles : nullptr;
    in.router = artifacts.checkpoint ? &artifacts.checkpoint->params : nullptr;
    in.embedder = artifacts.embedder.get();

    const auto report = sdag::evaluate(cfg, in);
    const auto table = sdag::render_report(report, sdag::ReportFormat::Text);
    if (!a.out.empty()) sdag::write_text_file(a.out, sdag::render_report(report, sdag::ReportFormat::Json));
    if (!a.text_out.empty()) sdag::write_text_file(a.text_out, table);
    std::cout << table;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subject-DAG routing for multi-agent question answering"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic question set with mock annotator and oracle pool");
    s->add_option("--count", synth.count, "Number of questions")->capture_default_str();
    s->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();

    CurateArgs curate;
    auto* c = app.add_subcommand("curate", "Annotate subjects (three rounds, consensus) and split the dataset");
    c->add_option("--in", curate.in, "Raw questions (JSONL)")->required()->check(CLI::ExistingFile);
    c->add_option("--out", curate.out, "Curated output (JSONL)")->required();
    c->add_option("--backends", curate.backends, "Backend config file")->required()->check(CLI::ExistingFile);
    c->add_option("--backend", curate.backend, "Annotator backend name")->required();
    c->add_option("--profiling-size", curate.profiling_size, "Profiling split size")->capture_default_str();
    c->add_option("--train-ratio", curate.train_ratio, "Train share of the remaining questions")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    c->add_option("--seed", curate.seed, "Split seed")->capture_default_str();
    c->add_flag("--profiling-from-test", curate.profiling_from_test, "Copy the profiling split out of the test split");
    c->add_option("--parallelism", curate.parallelism, "Concurrent annotation calls")->capture_default_str();
    c->add_option("--skip-log", curate.skip_log, "Write skipped ids and reasons (JSONL)");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the subject router");
    t->add_option("--data", train.data, "Curated questions (JSONL)")->required()->check(CLI::ExistingFile);
    t->add_option("--out", train.out, "Checkpoint path")->required();
    t->add_option("--split", train.split, "train | test | profiling | all | auto")->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--batch-size", train.batch_size)->capture_default_str();
    t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--lambda-node", train.lambda_node)->capture_default_str();
    t->add_option("--lambda-edge", train.lambda_edge)->capture_default_str();
    t->add_option("--hidden", train.hidden)->capture_default_str();
    t->add_option("--subject-dim", train.subject_dim)->capture_default_str();
    t->add_option("--layers", train.layers)->capture_default_str();
    t->add_option("--activation", train.activation, "relu | identity")->capture_default_str();
    t->add_option("--embed-dim", train.embed_dim, "Hashed embedder dimension")->capture_default_str();
    t->add_option("--embedder", train.embedder_config, "Embedder description (JSON) instead of the hashed default");
    t->add_option("--seed", train.seed)->capture_default_str();
    t->add_flag("--quiet", train.quiet, "No per-epoch log");

    ProfileArgs profile;
    auto* p = app.add_subcommand("profile", "Score every pool model on the profiling split");
    p->add_option("--data", profile.data, "Curated questions (JSONL)")->required()->check(CLI::ExistingFile);
    p->add_option("--pool", profile.pool, "Model pool config")->required()->check(CLI::ExistingFile);
    p->add_option("--backends", profile.backends, "Extra backend config file")->check(CLI::ExistingFile);
    p->add_option("--out", profile.out, "Profile store path")->required();
    p->add_option("--split", profile.split, "profiling | test | train | all | auto")->capture_default_str();
    p->add_option("--seed", profile.seed)->capture_default_str();
    p->add_option("--parallelism", profile.parallelism)->capture_default_str();
    p->add_option("--date", profile.date, "Provenance date stamp (default today)");

    RunArgs run;
    auto* r = app.add_subcommand("run", "Answer one question through the routed agent graph");
    r->add_option("--data", run.data, "Questions (JSONL)")->check(CLI::ExistingFile);
    r->add_option("--id", run.id, "Question id (default: first record)");
    r->add_option("--question", run.question, "Ad-hoc question text instead of --data");
    r->add_option("--option", run.options, "Ad-hoc answer option (repeatable)");
    r->add_option("--checkpoint", run.checkpoint)->required()->check(CLI::ExistingFile);
    r->add_option("--profiles", run.profiles)->required()->check(CLI::ExistingFile);
    r->add_option("--pool", run.pool)->required()->check(CLI::ExistingFile);
    r->add_option("--backends", run.backends)->check(CLI::ExistingFile);
    r->add_option("--mode", run.mode, "sdag | fcg")->capture_default_str()->check(CLI::IsMember({"sdag", "fcg"}));
    r->add_option("--trace-out", run.trace_out, "Write the execution trace (JSONL)");
    r->add_option("--parallelism", run.parallelism)->capture_default_str();

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Benchmark one or more routing modes");
    e->add_option("--mode", eval.modes, "Comma list of sdag, fcg, no_gnn, random_model, single_cot")
        ->capture_default_str();
    e->add_option("--data", eval.data, "Questions (JSONL)")->required()->check(CLI::ExistingFile);
    e->add_option("--split", eval.split, "test | train | profiling | all | auto")->capture_default_str();
    e->add_option("--seeds", eval.seeds, "Number of trials")->capture_default_str();
    e->add_option("--base-seed", eval.base_seed)->capture_default_str();
    e->add_option("--checkpoint", eval.checkpoint)->check(CLI::ExistingFile);
    e->add_option("--profiles", eval.profiles)->check(CLI::ExistingFile);
    e->add_option("--pool", eval.pool)->required()->check(CLI::ExistingFile);
    e->add_option("--backends", eval.backends)->check(CLI::ExistingFile);
    e->add_option("--single-model", eval.single_model, "Model for single_cot (default: smallest id)");
    e->add_option("--parallelism", eval.parallelism, "Questions in flight")->capture_default_str();
    e->add_option("--out", eval.out, "Report JSON path");
    e->add_option("--text-out", eval.text_out, "Also write the text table here");
    e->add_flag("--wall-clock", eval.wall_clock, "Report measured time instead of simulated critical-path time");
    e->add_flag("--no-traces", eval.no_traces, "Omit per-question traces from the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*s) cmd_synth(synth);
        if (*c) cmd_curate(curate);
        if (*t) cmd_train(train);
        if (*p) cmd_profile(profile);
        if (*r) {
            if (run.question.empty() && run.data.empty()) {
                std::cerr << "run: one of --data or --question is required\n";
                return kExitUsage;
            }
            cmd_run(run);
        }
        if (*e) cmd_eval(eval);
    } catch (const sdag::Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
