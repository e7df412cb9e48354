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

#include "sdag/subject.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sdag {

/// Position of an agent in the routed graph.
enum class AgentRole { SubjectExpert, Supporting, Dominant };

std::string_view role_name(AgentRole r) noexcept;

struct UpstreamReply {
    Subject subject;
    std::string content;
};

/// Literal contributed by a node whose backend failed permanently.
inline constexpr std::string_view kUnavailable = "[unavailable]";

/// Instruction appended to the final agent's prompt so that its reply can be graded.
inline constexpr std::string_view kAnswerFormatInstruction =
    "Your final answer should be with the format: <<answer>>, at the end of your response.";

/// Role prompt with subject, question and upstream replies substituted. A
/// SubjectExpert takes no upstream input; the other roles need at least one
/// entry (RoleInputMismatch otherwise). Upstream replies are listed in
/// canonical subject order. `final_node` appends the answer-format line.
std::string render_prompt(AgentRole role, Subject subject, std::string_view question,
                          std::vector<UpstreamReply> upstream, bool final_node = false);

/// Single-model chain-of-thought prompt, also used for profiling.
std::string render_single_model_prompt(std::string_view question);

/// Contents of the last <<...>> group, else the last standalone option letter
/// A-J; nullopt when neither exists.
std::optional<std::string> extract_answer(std::string_view reply);

} // namespace sdag
