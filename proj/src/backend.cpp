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

#include "sdag/backend.hpp"

#include "http_client.hpp"
#include "sdag/error.hpp"
#include "sdag/hash.hpp"
#include "sdag/question.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace sdag {

using nlohmann::json;

void check_request(const ChatRequest& req) {
    if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
    }
    if (req.max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

// ---------------------------------------------------------------------------
// Config

BackendConfig backend_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    try {
        BackendConfig c;
        c.name = j.at("name").get<std::string>();
        const auto kind = j.value("kind", std::string("mock"));
        if (kind == "remote") {
            c.kind = BackendKind::Remote;
        } else if (kind == "mock") {
            c.kind = BackendKind::Mock;
        } else {
            throw Error(ErrorCode::ConfigError, "backend " + c.name + ": unknown kind '" + kind + "'");
        }
        c.url = j.value("url", std::string{});
        c.model = j.value("model", c.name);
        c.key_env = j.value("key_env", std::string{});
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
        c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
        c.retries = j.value("retries", c.retries);
        c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("script")) {
            std::filesystem::path p = j["script"].get<std::string>();
            c.script = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        if (c.kind == BackendKind::Remote && c.url.empty()) {
            throw Error(ErrorCode::ConfigError, "remote backend " + c.name + " has no url");
        }
        if (c.kind == BackendKind::Mock && c.script.empty()) {
            throw Error(ErrorCode::ConfigError, "mock backend " + c.name + " has no script");
        }
        if (c.max_in_flight < 1 || c.max_in_flight > 1024 || c.retries < 0 || c.timeout_ms <= 0) {
            throw Error(ErrorCode::ConfigError, "backend " + c.name + ": limits out of range");
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed backend config: ") + e.what());
    }
}

json to_json(const BackendConfig& c) {
    json j;
    j["name"] = c.name;
    j["kind"] = c.kind == BackendKind::Remote ? "remote" : "mock";
    if (!c.url.empty()) j["url"] = c.url;
    j["model"] = c.model;
    if (!c.key_env.empty()) j["key_env"] = c.key_env;
    j["max_in_flight"] = c.max_in_flight;
    j["timeout_ms"] = c.timeout_ms;
    j["retries"] = c.retries;
    j["backoff_ms"] = c.backoff_ms;
    if (!c.script.empty()) j["script"] = c.script.generic_string();
    if (c.seed != 0) j["seed"] = c.seed;
    return j;
}

std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    const json& list = j.is_object() ? j.at("backends") : j;
    if (!list.is_array()) throw Error(ErrorCode::ConfigError, path.string() + ": expected a list of backends");
    std::vector<BackendConfig> out;
    for (const auto& item : list) out.push_back(backend_config_from_json(item, path.parent_path()));
    return out;
}

// ---------------------------------------------------------------------------
// Remote

json chat_request_body(const std::string& model, const ChatRequest& req) {
    json messages = json::array();
    if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    return {{"model", model}, {"messages", messages}, {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

std::string chat_response_text(const json& body) {
    try {
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TransportError, std::string("malformed chat completion response: ") + e.what());
    }
}

RemoteBackend::RemoteBackend(BackendConfig cfg) : cfg_(std::move(cfg)), in_flight_(cfg_.max_in_flight) {}

ChatResponse RemoteBackend::complete(const ChatRequest& req) {
    check_request(req);
    const auto token = detail::bearer_from_env(cfg_.key_env, cfg_.name);
    const auto target = detail::resolve_endpoint(cfg_.url, "/chat/completions");
    const auto body = chat_request_body(cfg_.model, req).dump();

    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    const auto started = std::chrono::steady_clock::now();
    const int max_attempts = cfg_.retries + 1;
    std::string last_error;
    bool last_timed_out = false;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms * (1 << (attempt - 2))));
        }
        const auto res = detail::post_json(target, body, token, cfg_.timeout_ms);
        if (res.transport_failed) {
            last_error = res.error;
            last_timed_out = res.timed_out;
            continue;
        }
        if (res.status == 401 || res.status == 403) {
            throw Error(ErrorCode::AuthError, cfg_.name + ": HTTP " + std::to_string(res.status));
        }
        if (res.status >= 500) {
            last_error = "HTTP " + std::to_string(res.status);
            last_timed_out = false;
            continue;
        }
        if (res.status != 200) {
            throw Error(ErrorCode::TransportError, cfg_.name + ": HTTP " + std::to_string(res.status));
        }
        json parsed;
        try {
            parsed = json::parse(res.body);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::TransportError, cfg_.name + ": response is not JSON");
        }
        ChatResponse out;
        out.text = chat_response_text(parsed);
        out.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        out.attempts = attempt;
        out.backend = cfg_.name;
        return out;
    }
    throw Error(last_timed_out ? ErrorCode::Timeout : ErrorCode::TransportError,
                cfg_.name + ": giving up after " + std::to_string(max_attempts) + " attempts (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Mock

namespace {

MockRule rule_from_json(const json& j) {
    MockRule r;
    const json match = j.value("match", json::object());
    if (match.is_string()) {
        const auto m = match.get<std::string>();
        if (m != "default" && m != "*") r.contains = m;
    } else if (match.is_object()) {
        if (match.contains("contains")) r.contains = match["contains"].get<std::string>();
        if (match.contains("regex")) {
            r.regex_source = match["regex"].get<std::string>();
            try {
                r.regex = std::regex(*r.regex_source);
            } catch (const std::regex_error& e) {
                throw Error(ErrorCode::ConfigError, "bad mock regex '" + *r.regex_source + "'");
            }
        }
        if (match.contains("metadata")) {
            for (const auto& [k, v] : match["metadata"].items()) r.metadata[k] = v.get<std::string>();
        }
        r.oracle = match.value("oracle", false);
    } else {
        throw Error(ErrorCode::ConfigError, "mock rule match must be a string or object");
    }
    r.reply = j.value("reply", std::string{});
    if (j.contains("specialty")) r.specialty = parse_subject(j["specialty"].get<std::string>());
    if (j.contains("error")) {
        r.error = j["error"].get<std::string>();
        if (*r.error != "transport" && *r.error != "auth" && *r.error != "timeout") {
            throw Error(ErrorCode::ConfigError, "unknown mock error kind '" + *r.error + "'");
        }
    }
    if (r.oracle && !r.specialty) throw Error(ErrorCode::ConfigError, "oracle rule without specialty");
    return r;
}

bool rule_matches(const MockRule& r, const MockScript& s, const ChatRequest& req) {
    const std::string text = req.system.empty() ? req.user : req.system + "\n" + req.user;
    if (r.contains && text.find(*r.contains) == std::string::npos) return false;
    if (r.regex && !std::regex_search(text, *r.regex)) return false;
    for (const auto& [k, v] : r.metadata) {
        auto it = req.metadata.find(k);
        if (it == req.metadata.end() || it->second != v) return false;
    }
    if (r.oracle) {
        auto it = req.metadata.find("question_id");
        if (it == req.metadata.end() || !s.questions.count(it->second)) return false;
    }
    return true;
}

std::string wrong_label(const OracleAnswer& a) {
    if (!a.wrong.empty()) return a.wrong;
    const char g = a.gold.empty() ? 'A' : a.gold.front();
    const int idx = (g >= 'A' && g <= 'J') ? g - 'A' : 0;
    return std::string(1, static_cast<char>('A' + (idx + 1) % 4));
}

} // namespace

MockScript mock_script_from_json(const json& j) {
    try {
        MockScript s;
        const json* rules = &j;
        if (j.is_object()) {
            rules = &j.at("rules");
            s.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("latency_ms")) {
                s.latency_min_ms = j["latency_ms"].at(0).get<double>();
                s.latency_max_ms = j["latency_ms"].at(1).get<double>();
            }
            if (j.contains("questions")) {
                for (const auto& [id, q] : j["questions"].items()) {
                    OracleAnswer a;
                    a.gold = q.at("gold").get<std::string>();
                    a.dominant = parse_subject(q.at("dominant").get<std::string>());
                    a.wrong = q.value("wrong", std::string{});
                    s.questions[id] = a;
                }
            }
        }
        if (!rules->is_array()) throw Error(ErrorCode::ConfigError, "mock rules must be a list");
        for (const auto& r : *rules) s.rules.push_back(rule_from_json(r));
        if (!(s.latency_min_ms >= 0.0 && s.latency_max_ms >= s.latency_min_ms)) {
            throw Error(ErrorCode::ConfigError, "mock latency range is invalid");
        }
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed mock script: ") + e.what());
    }
}

json to_json(const MockScript& s) {
    json rules = json::array();
    for (const auto& r : s.rules) {
        json match = json::object();
        if (r.contains) match["contains"] = *r.contains;
        if (r.regex_source) match["regex"] = *r.regex_source;
        if (!r.metadata.empty()) match["metadata"] = r.metadata;
        if (r.oracle) match["oracle"] = true;
        json rule = {{"match", match}};
        if (!r.reply.empty()) rule["reply"] = r.reply;
        if (r.specialty) rule["specialty"] = std::string(subject_name(*r.specialty));
        if (r.error) rule["error"] = *r.error;
        rules.push_back(std::move(rule));
    }
    json questions = json::object();
    for (const auto& [id, a] : s.questions) {
        json q = {{"gold", a.gold}, {"dominant", std::string(subject_name(a.dominant))}};
        if (!a.wrong.empty()) q["wrong"] = a.wrong;
        questions[id] = std::move(q);
    }
    return {{"seed", s.seed},
            {"latency_ms", {s.latency_min_ms, s.latency_max_ms}},
            {"rules", rules},
            {"questions", questions}};
}

MockScript load_mock_script(const std::filesystem::path& path) {
    try {
        return mock_script_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
}

ChatResponse mock_complete(const MockScript& script, const std::string& backend_name, const ChatRequest& req) {
    check_request(req);
    for (const auto& rule : script.rules) {
        if (!rule_matches(rule, script, req)) continue;
        if (rule.error) {
            const auto code = *rule.error == "auth"      ? ErrorCode::AuthError
                              : *rule.error == "timeout" ? ErrorCode::Timeout
                                                         : ErrorCode::TransportError;
            throw Error(code, backend_name + ": scripted failure");
        }

        ChatResponse out;
        out.backend = backend_name;
        out.attempts = 1;
        if (rule.oracle) {
            const auto& answer = script.questions.at(req.metadata.at("question_id"));
            const bool correct = *rule.specialty == answer.dominant;
            out.text = "Reasoning from the perspective of " + std::string(subject_name(*rule.specialty)) +
                       ". Final answer: <<" + (correct ? answer.gold : wrong_label(answer)) + ">>";
        } else {
            out.text = rule.reply;
        }

        std::uint64_t h = fnv1a64(backend_name, script.seed ^ kFnvOffsetBasis);
        h = fnv1a64(req.system, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(req.user, h);
        const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
        out.latency_ms = script.latency_min_ms + unit * (script.latency_max_ms - script.latency_min_ms);
        return out;
    }
    throw Error(ErrorCode::NoRuleMatched, backend_name + ": no mock rule matches the request");
}

MockBackend::MockBackend(std::string name, MockScript script) : name_(std::move(name)), script_(std::move(script)) {}

// ---------------------------------------------------------------------------
// Accounting and registry

void CallCounter::record(const ChatRequest& req) {
    total_.fetch_add(1);
    std::lock_guard lock(mu_);
    ++by_backend_[req.backend];
}

std::map<std::string, std::uint64_t> CallCounter::by_backend() const {
    std::lock_guard lock(mu_);
    return by_backend_;
}

void CallCounter::reset() {
    std::lock_guard lock(mu_);
    total_.store(0);
    by_backend_.clear();
}

std::shared_ptr<BackendRegistry> BackendRegistry::from_configs(const std::vector<BackendConfig>& configs) {
    auto reg = std::make_shared<BackendRegistry>();
    for (const auto& c : configs) {
        if (c.kind == BackendKind::Remote) {
            reg->add(std::make_shared<RemoteBackend>(c));
        } else {
            auto script = load_mock_script(c.script);
            if (c.seed != 0) script.seed = c.seed;
            reg->add(std::make_shared<MockBackend>(c.name, std::move(script)));
        }
    }
    return reg;
}

void BackendRegistry::add(std::shared_ptr<ChatBackend> backend) {
    const auto name = backend->name();
    if (!backends_.emplace(name, std::move(backend)).second) {
        throw Error(ErrorCode::ConfigError, "duplicate backend name " + name);
    }
}

bool BackendRegistry::contains(const std::string& name) const noexcept { return backends_.count(name) > 0; }

ChatBackend& BackendRegistry::get(const std::string& name) const {
    auto it = backends_.find(name);
    if (it == backends_.end()) throw Error(ErrorCode::ConfigError, "unknown backend " + name);
    return *it->second;
}

std::vector<std::string> BackendRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, b] : backends_) out.push_back(name);
    return out;
}

ChatResponse BackendRegistry::complete(const ChatRequest& req) {
    auto& backend = get(req.backend);
    counter_.record(req);
    return backend.complete(req);
}

} // namespace sdag
