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

#include "sdag/synthetic.hpp"

#include "sdag/curation.hpp"
#include "sdag/error.hpp"
#include "sdag/random.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace sdag {

namespace {

constexpr std::array<const char*, 4> kOpeners = {
    "Consider the following problem involving",
    "Evaluate this scenario drawing on",
    "Analyze the case using",
    "Solve the task that requires",
};

std::string keyword(Subject s) {
    std::string k(subject_name(s));
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return k;
}

std::string weight_text(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", w);
    return buf;
}

} // namespace

Subject dominant_subject(const SubjectWeights& w) {
    Subject best = Subject::Other;
    double top = -1.0;
    for (const auto& [s, v] : w) {
        if (s != Subject::Other && v > top) {
            top = v;
            best = s;
        }
    }
    if (top < 0.0) throw Error(ErrorCode::InvalidArgument, "weights have no dominant subject");
    return best;
}

std::vector<QuestionRecord> generate_synthetic_questions(const SyntheticConfig& cfg) {
    if (cfg.min_subjects < 2 || cfg.max_subjects > 4 || cfg.min_subjects > cfg.max_subjects) {
        throw Error(ErrorCode::InvalidArgument, "synthetic questions plant between 2 and 4 subjects");
    }
    Rng rng(cfg.seed);
    std::vector<Subject> pool;
    for (auto s : all_subjects()) {
        if (s != Subject::Other) pool.push_back(s);
    }

    std::vector<QuestionRecord> out;
    for (std::size_t n = 0; n < cfg.count; ++n) {
        const std::size_t k = cfg.min_subjects + rng.below(cfg.max_subjects - cfg.min_subjects + 1);
        std::vector<Subject> picked = pool;
        rng.shuffle(picked);
        picked.resize(k);

        // Dominant weight above the 1/k average; supporting weights below it
        // and above the 0.1 drop threshold.
        const double dominant = k == 2 ? rng.uniform(0.6, 0.75) : rng.uniform(0.45, 0.6);
        std::vector<double> shares(k - 1);
        double share_total = 0.0;
        for (double& s : shares) {
            s = rng.uniform(0.9, 1.1);
            share_total += s;
        }
        SubjectWeights w;
        w[picked[0]] = dominant;
        for (std::size_t i = 1; i < k; ++i) w[picked[i]] = (1.0 - dominant) * shares[i - 1] / share_total;

        std::vector<std::string> mentions;
        for (std::size_t r = 0; r < cfg.dominant_repeats; ++r) mentions.push_back(keyword(picked[0]));
        for (std::size_t i = 1; i < k; ++i) mentions.push_back(keyword(picked[i]));
        rng.shuffle(mentions);

        std::string text = kOpeners[rng.below(kOpeners.size())];
        for (std::size_t i = 0; i < mentions.size(); ++i) text += (i == 0 ? " " : ", ") + mentions[i];
        text += ". Which option is correct?";

        QuestionRecord q;
        char id[64];
        std::snprintf(id, sizeof id, "%s-%05zu", cfg.id_prefix.c_str(), n);
        q.id = id;
        q.question = text;
        q.options = {"first option", "second option", "third option", "fourth option"};
        q.gold = option_label(rng.below(q.options.size()));
        q.subjects = w;
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<TrainingSample> training_samples(const std::vector<QuestionRecord>& records, double threshold) {
    std::vector<TrainingSample> out;
    for (const auto& r : records) {
        if (!r.subjects) throw Error(ErrorCode::InvalidArgument, "record " + r.id + " has no subject annotation");
        out.push_back({r.question, build_ground_truth_dag(*r.subjects, threshold)});
    }
    return out;
}

std::string specialist_id(Subject s) {
    std::string k = keyword(s);
    std::replace(k.begin(), k.end(), ' ', '-');
    return "expert-" + k;
}

OracleFixture make_oracle_fixture(const std::vector<QuestionRecord>& questions, std::uint64_t seed) {
    OracleFixture f;
    f.script.seed = seed;
    f.script.latency_min_ms = 200.0;
    f.script.latency_max_ms = 2000.0;
    for (auto s : all_subjects()) {
        if (s == Subject::Other) continue;
        f.pool.models.push_back({specialist_id(s), kOracleBackend, {s}});
        MockRule rule;
        rule.metadata["model"] = specialist_id(s);
        rule.oracle = true;
        rule.specialty = s;
        f.script.rules.push_back(std::move(rule));
    }
    MockRule fallback;
    fallback.reply = "I am not certain. <<A>>";
    f.script.rules.push_back(std::move(fallback));
    for (const auto& q : questions) {
        if (!q.subjects) continue;
        const OracleAnswer a{q.gold, dominant_subject(*q.subjects), {}};
        f.script.questions[q.id] = a;
        // Curation may copy test questions into the profiling split under a suffixed id.
        f.script.questions[q.id + kProfilingCopySuffix] = a;
    }
    return f;
}

MockScript make_annotator_script(const std::vector<QuestionRecord>& questions, std::uint64_t seed) {
    MockScript s;
    s.seed = seed;
    for (const auto& q : questions) {
        if (!q.subjects) continue;
        MockRule rule;
        rule.metadata["question_id"] = q.id;
        rule.reply = "Keywords: ";
        bool first = true;
        for (const auto& [subject, w] : *q.subjects) {
            rule.reply += (first ? "<" : ", <") + std::string(subject_name(subject)) + " " + weight_text(w) + ">";
            first = false;
        }
        s.rules.push_back(std::move(rule));
    }
    MockRule fallback;
    fallback.reply = "Keywords: <Other 1.0>";
    s.rules.push_back(std::move(fallback));
    return s;
}

} // namespace sdag
