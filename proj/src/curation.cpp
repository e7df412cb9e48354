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

#include "sdag/curation.hpp"

#include "sdag/error.hpp"
#include "sdag/parallel.hpp"
#include "sdag/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

namespace sdag {

std::string render_annotation_prompt(const QuestionRecord& q) {
    if (q.question.empty()) throw Error(ErrorCode::InvalidArgument, "annotation prompt needs a question");
    return "Question: " + format_question(q) +
           "\nWhat are the core knowledge, subjects or skills needed to solve this problem? List 2-5 keywords "
           "separated in comma, with the weights (0~1.0). These weights represent the proportion of these skills "
           "are needed in the question. And the proportion of all keywords sum to 1. Candidate keywords: Math, "
           "Physics, Chemistry, Law, Engineering, Economics, Health, Psychology, Business, Biology, Philosophy, "
           "Computer Science, History, Medicine, Other. Give ONLY the keywords with weights, no other words or "
           "explanation.\nPlease follow this format: Keywords: <Math 0.6>, <Physics 0.3>, <Chemistry 0.1>...";
}

SubjectWeights parse_annotation_reply(const std::string& reply) {
    std::string_view body = reply;
    {
        // Last "Keywords:" marker, case-insensitive.
        std::string lower(reply.size(), '\0');
        std::transform(reply.begin(), reply.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const auto pos = lower.rfind("keywords:");
        if (pos != std::string::npos) body.remove_prefix(pos + 9);
    }

    static const std::regex group(R"(<\s*([A-Za-z][A-Za-z ]*?)\s*[:=]?\s+([+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+))\s*>)");
    SubjectWeights parsed;
    for (std::cregex_iterator it(body.data(), body.data() + body.size(), group), end; it != end; ++it) {
        const auto subject = try_parse_subject((*it)[1].str());
        if (!subject) continue;
        const double w = std::stod((*it)[2].str());
        if (!(w >= 0.0 && w <= 1.0)) {
            throw Error(ErrorCode::InvalidWeight,
                        std::string(subject_name(*subject)) + " weight " + (*it)[2].str() + " outside [0, 1]");
        }
        parsed[*subject] = w;
    }
    if (parsed.empty()) throw Error(ErrorCode::ParseFailure, "no <Subject weight> groups in reply");
    if (!(weight_sum(parsed) > 0.0)) throw Error(ErrorCode::ParseFailure, "all parsed weights are zero");
    return renormalized(parsed);
}

SubjectWeights consensus_merge(const std::array<SubjectWeights, kAnnotationRounds>& runs) {
    SubjectWeights merged;
    for (const auto& [subject, w0] : runs[0]) {
        double total = w0;
        bool everywhere = true;
        for (std::size_t r = 1; r < runs.size(); ++r) {
            auto it = runs[r].find(subject);
            if (it == runs[r].end()) {
                everywhere = false;
                break;
            }
            total += it->second;
        }
        if (everywhere) merged[subject] = total / static_cast<double>(runs.size());
    }
    if (merged.empty() || !(weight_sum(merged) > 0.0)) {
        throw Error(ErrorCode::NoConsensus, "no subject appears in all annotation rounds");
    }
    return renormalized(merged);
}

double CuratedDataset::avg_subjects_per_question() const noexcept {
    std::size_t count = 0;
    std::size_t total = 0;
    for (const auto& r : records) {
        if (r.split == Split::Profiling && r.id.ends_with(kProfilingCopySuffix)) continue;
        if (!r.subjects) continue;
        total += r.subjects->size();
        ++count;
    }
    return count == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(count);
}

namespace {

struct Annotated {
    std::vector<AnnotationRun> runs;
    std::optional<SubjectWeights> subjects;
    std::string skip_reason;
};

Annotated annotate(const QuestionRecord& q, BackendRegistry& backends, const CurationConfig& cfg) {
    Annotated out;
    std::array<SubjectWeights, kAnnotationRounds> parsed;
    const auto prompt = render_annotation_prompt(q);
    for (std::size_t round = 0; round < kAnnotationRounds; ++round) {
        AnnotationRun run{q.id, round, {}, std::nullopt};
        ChatRequest req;
        req.backend = cfg.annotator;
        req.user = prompt;
        req.metadata = {{"question_id", q.id}, {"round", std::to_string(round)}, {"role", "annotator"}};
        try {
            run.raw_reply = backends.complete(req).text;
            run.parsed = parse_annotation_reply(run.raw_reply);
            parsed[round] = *run.parsed;
        } catch (const Error& e) {
            out.skip_reason = "round " + std::to_string(round) + ": " + e.what();
        }
        out.runs.push_back(std::move(run));
        if (!out.skip_reason.empty()) return out;
    }

    try {
        auto merged = consensus_merge(parsed);
        if (merged.size() < 2) {
            out.skip_reason = "single-subject after consensus";
        } else if (merged.size() > kMaxDagNodes) {
            out.skip_reason = std::to_string(merged.size()) + " subjects after consensus";
        } else {
            out.subjects = std::move(merged);
        }
    } catch (const Error& e) {
        out.skip_reason = e.what();
    }
    return out;
}

} // namespace

CuratedDataset curate_dataset(const std::vector<QuestionRecord>& raw, BackendRegistry& backends,
                              const CurationConfig& cfg) {
    if (raw.empty()) throw Error(ErrorCode::InvalidArgument, "no questions to curate");
    if (!(cfg.train_ratio >= 0.0 && cfg.train_ratio <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "train ratio must lie in [0, 1]");
    }
    if (!backends.contains(cfg.annotator)) throw Error(ErrorCode::ConfigError, "unknown annotator " + cfg.annotator);

    std::vector<QuestionRecord> sorted = raw;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].id == sorted[i - 1].id) throw Error(ErrorCode::InvalidArgument, "duplicate id " + sorted[i].id);
    }

    std::vector<Annotated> results(sorted.size());
    parallel_for(sorted.size(), cfg.parallelism, [&](std::size_t i) {
        try {
            results[i] = annotate(sorted[i], backends, cfg);
        } catch (const std::exception& e) {
            results[i].skip_reason = e.what();
        }
    });

    CuratedDataset ds;
    std::vector<QuestionRecord> kept;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        auto& r = results[i];
        for (auto& run : r.runs) ds.runs.push_back(std::move(run));
        if (!r.subjects) {
            ds.skip_log.push_back({sorted[i].id, r.skip_reason});
            continue;
        }
        QuestionRecord rec = sorted[i];
        rec.subjects = std::move(r.subjects);
        rec.split.reset();
        kept.push_back(std::move(rec));
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(kept.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    std::size_t profiling = std::min(cfg.profiling_size, kept.size());
    if (profiling < cfg.profiling_size) {
        ds.warnings.push_back("profiling split truncated to " + std::to_string(profiling) + " of requested " +
                              std::to_string(cfg.profiling_size) + " questions");
    }

    std::vector<QuestionRecord> profiling_copies;
    if (!cfg.profiling_from_test) {
        for (std::size_t i = 0; i < profiling; ++i) kept[order[i]].split = Split::Profiling;
        const std::size_t rest = kept.size() - profiling;
        const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * static_cast<double>(rest)));
        for (std::size_t i = 0; i < rest; ++i) {
            kept[order[profiling + i]].split = i < n_train ? Split::Train : Split::Test;
        }
    } else {
        const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * static_cast<double>(kept.size())));
        for (std::size_t i = 0; i < kept.size(); ++i) kept[order[i]].split = i < n_train ? Split::Train : Split::Test;
        const std::size_t n_test = kept.size() - n_train;
        if (profiling > n_test) {
            ds.warnings.push_back("profiling split truncated to the " + std::to_string(n_test) + " test questions");
            profiling = n_test;
        }
        for (std::size_t i = 0; i < profiling; ++i) {
            QuestionRecord copy = kept[order[n_train + i]];
            copy.id += kProfilingCopySuffix;
            copy.split = Split::Profiling;
            profiling_copies.push_back(std::move(copy));
        }
    }

    for (const auto& r : kept) {
        if (r.split == Split::Train) ++ds.train_size;
        if (r.split == Split::Test) ++ds.test_size;
        if (r.split == Split::Profiling) ++ds.profiling_size;
    }
    ds.profiling_size += profiling_copies.size();

    ds.records = std::move(kept);
    for (auto& c : profiling_copies) ds.records.push_back(std::move(c));
    std::sort(ds.records.begin(), ds.records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return ds;
}

} // namespace sdag
