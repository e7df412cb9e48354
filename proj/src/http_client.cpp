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

#include "http_client.hpp"

#include "sdag/error.hpp"

#include <cstdlib>

#include <httplib.h>

namespace sdag::detail {

HttpTarget resolve_endpoint(const std::string& url, std::string_view suffix) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "url without scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    HttpTarget t;
    t.origin = url.substr(0, path_start);
    t.path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!t.path.empty() && t.path.back() == '/') t.path.pop_back();
    const bool has_suffix = t.path.size() >= suffix.size() &&
                            t.path.compare(t.path.size() - suffix.size(), suffix.size(), suffix) == 0;
    if (!has_suffix) t.path += suffix;
    return t;
}

HttpResult post_json(const HttpTarget& target, const std::string& body, const std::string& bearer_token,
                     int timeout_ms) {
    HttpResult result;
    httplib::Client client(target.origin);
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) {
        result.transport_failed = true;
        const auto err = res.error();
        result.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        result.error = httplib::to_string(err);
        return result;
    }
    result.status = res->status;
    result.body = res->body;
    return result;
}

std::string bearer_from_env(const std::string& key_env, const std::string& who) {
    if (key_env.empty()) return {};
    const char* value = std::getenv(key_env.c_str());
    if (value == nullptr || *value == '\0') {
        throw Error(ErrorCode::AuthError, who + ": credential variable " + key_env + " is not set");
    }
    return value;
}

} // namespace sdag::detail
