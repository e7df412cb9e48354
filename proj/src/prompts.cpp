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

#include "sdag/prompts.hpp"

#include "sdag/error.hpp"

#include <algorithm>
#include <cctype>

namespace sdag {

std::string_view role_name(AgentRole r) noexcept {
    switch (r) {
    case AgentRole::SubjectExpert: return "subject_expert";
    case AgentRole::Supporting: return "supporting";
    case AgentRole::Dominant: return "dominant";
    }
    return "subject_expert";
}

namespace {

std::string joined_subjects(const std::vector<UpstreamReply>& upstream) {
    std::string out;
    for (std::size_t k = 0; k < upstream.size(); ++k) {
        if (k > 0) out += k + 1 == upstream.size() ? " and " : ", ";
        out += subject_name(upstream[k].subject);
    }
    return out;
}

} // namespace

std::string render_prompt(AgentRole role, Subject subject, std::string_view question,
                          std::vector<UpstreamReply> upstream, bool final_node) {
    const bool has_upstream = !upstream.empty();
    if ((role == AgentRole::SubjectExpert) == has_upstream) {
        throw Error(ErrorCode::RoleInputMismatch, std::string(role_name(role)) + " agent for " +
                                                      std::string(subject_name(subject)) +
                                                      (has_upstream ? " got upstream input" : " has no upstream input"));
    }
    std::stable_sort(upstream.begin(), upstream.end(),
                     [](const UpstreamReply& a, const UpstreamReply& b) { return a.subject < b.subject; });

    const std::string s(subject_name(subject));
    const std::string q(question);
    std::string out;
    switch (role) {
    case AgentRole::SubjectExpert:
        out = "You are an expert in " + s +
              ". Your task is to analyze the following question based on your domain knowledge.\n"
              "Question: " + q +
              "\nPlease provide a clear and concise explanation or answer strictly from the perspective of " + s +
              ".";
        break;
    case AgentRole::Supporting: {
        const auto from = joined_subjects(upstream);
        out = "You are an expert in " + s + ". Another agent has provided information from " + from +
              ", which may be relevant to your reasoning.\nQuestion: " + q;
        for (const auto& u : upstream) {
            out += "\nSupporting Information from " + std::string(subject_name(u.subject)) + ": " + u.content;
        }
        out += "\nPlease incorporate the above supporting information into your domain-specific reasoning, and "
               "produce a coherent, informed response from the perspective of " +
               s + ".";
        break;
    }
    case AgentRole::Dominant:
        out = "You are the lead " + s +
              " expert responsible for integrating multi-disciplinary information to answer the following complex "
              "question.\nQuestion: " +
              q + "\nYou have received input from other experts:";
        for (const auto& u : upstream) out += "\n- " + std::string(subject_name(u.subject)) + ": " + u.content;
        out += "\nPlease synthesize the provided information and generate a comprehensive final answer that reflects "
               "the reasoning across these domains.";
        break;
    }
    if (final_node) {
        out += "\n";
        out += kAnswerFormatInstruction;
    }
    return out;
}

std::string render_single_model_prompt(std::string_view question) {
    return "Can you solve the problem? " + std::string(question) +
           " Explain your reasoning. Your final answer should be with the format: <<answer>>, at the end of your "
           "response.";
}

std::optional<std::string> extract_answer(std::string_view reply) {
    const auto close = reply.rfind(">>");
    if (close != std::string_view::npos) {
        const auto open = reply.rfind("<<", close);
        if (open != std::string_view::npos) {
            auto inner = reply.substr(open + 2, close - open - 2);
            while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.front()))) inner.remove_prefix(1);
            while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.back()))) inner.remove_suffix(1);
            if (!inner.empty()) return std::string(inner);
        }
    }
    auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (std::size_t k = reply.size(); k-- > 0;) {
        const char c = reply[k];
        if (c < 'A' || c > 'J') continue;
        const bool left_ok = k == 0 || !alnum(reply[k - 1]);
        const bool right_ok = k + 1 == reply.size() || !alnum(reply[k + 1]);
        if (left_ok && right_ok) return std::string(1, c);
    }
    return std::nullopt;
}

} // namespace sdag
