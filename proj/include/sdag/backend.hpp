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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdag {

inline constexpr double kDefaultTemperature = 0.7;
inline constexpr int kDefaultMaxTokens = 4096;

struct ChatRequest {
    std::string backend;
    std::string system;
    std::string user;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    /// Tracing keys: question_id, subject, role, model, node_index, mode.
    std::map<std::string, std::string> metadata;
};

/// Throws InvalidArgument on out-of-range temperature or max_tokens.
void check_request(const ChatRequest& req);

struct ChatResponse {
    std::string text;
    double latency_ms = 0.0;
    int attempts = 1;
    std::string backend;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual const std::string& name() const noexcept = 0;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

enum class BackendKind { Remote, Mock };

struct BackendConfig {
    std::string name;
    BackendKind kind = BackendKind::Mock;
    std::string url;      ///< base URL, e.g. http://host:8000/v1
    std::string model;    ///< remote model name sent in the request body
    std::string key_env;  ///< environment variable holding the bearer token; empty = no auth
    int max_in_flight = 4;
    int timeout_ms = 60000;
    int retries = 3;
    int backoff_ms = 250;
    std::filesystem::path script;  ///< mock only
    std::uint64_t seed = 0;        ///< mock only; overrides the script seed when non-zero
};

BackendConfig backend_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const BackendConfig& c);
/// Accepts either a JSON array of backend objects or an object with a "backends" array.
std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// OpenAI-compatible chat client

/// Request body {model, messages, temperature, max_tokens}.
nlohmann::json chat_request_body(const std::string& model, const ChatRequest& req);
/// Extracts choices[0].message.content; throws TransportError on a malformed body.
std::string chat_response_text(const nlohmann::json& body);

class RemoteBackend final : public ChatBackend {
public:
    explicit RemoteBackend(BackendConfig cfg);

    const std::string& name() const noexcept override { return cfg_.name; }
    ChatResponse complete(const ChatRequest& req) override;

private:
    BackendConfig cfg_;
    std::counting_semaphore<1024> in_flight_;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct OracleAnswer {
    std::string gold;
    Subject dominant = Subject::Other;
    std::string wrong;  ///< empty: the label after gold (A..J, wrapping)
};

struct MockRule {
    std::optional<std::string> contains;
    std::optional<std::string> regex_source;
    std::optional<std::regex> regex;
    std::map<std::string, std::string> metadata;
    bool oracle = false;
    std::optional<Subject> specialty;  ///< oracle rules: the subject this model is good at
    std::string reply;
    std::optional<std::string> error;  ///< "transport" | "auth" | "timeout"
};

struct MockScript {
    std::vector<MockRule> rules;
    std::uint64_t seed = 0;
    double latency_min_ms = 10.0;
    double latency_max_ms = 100.0;
    std::map<std::string, OracleAnswer> questions;  ///< keyed by question id
};

MockScript mock_script_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MockScript& s);
MockScript load_mock_script(const std::filesystem::path& path);

/// Pure function of (script, seed, request): first matching rule wins in file
/// order and the simulated latency is derived from a hash of the request.
ChatResponse mock_complete(const MockScript& script, const std::string& backend_name, const ChatRequest& req);

class MockBackend final : public ChatBackend {
public:
    MockBackend(std::string name, MockScript script);

    const std::string& name() const noexcept override { return name_; }
    ChatResponse complete(const ChatRequest& req) override { return mock_complete(script_, name_, req); }
    const MockScript& script() const noexcept { return script_; }

private:
    std::string name_;
    MockScript script_;
};

// ---------------------------------------------------------------------------

class CallCounter {
public:
    void record(const ChatRequest& req);
    std::uint64_t total() const noexcept { return total_.load(); }
    std::map<std::string, std::uint64_t> by_backend() const;
    void reset();

private:
    std::atomic<std::uint64_t> total_{0};
    mutable std::mutex mu_;
    std::map<std::string, std::uint64_t> by_backend_;
};

/// Name -> backend lookup plus per-run call accounting. Every logical call is
/// counted once, whatever its outcome or number of attempts.
class BackendRegistry {
public:
    BackendRegistry() = default;
    static std::shared_ptr<BackendRegistry> from_configs(const std::vector<BackendConfig>& configs);

    void add(std::shared_ptr<ChatBackend> backend);
    bool contains(const std::string& name) const noexcept;
    ChatBackend& get(const std::string& name) const;
    std::vector<std::string> names() const;

    ChatResponse complete(const ChatRequest& req);

    CallCounter& counter() noexcept { return counter_; }
    const CallCounter& counter() const noexcept { return counter_; }

private:
    std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
    CallCounter counter_;
};

} // namespace sdag
