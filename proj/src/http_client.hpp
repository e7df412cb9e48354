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

#include <string>
#include <string_view>

namespace sdag::detail {

struct HttpTarget {
    std::string origin;  ///< scheme://host[:port]
    std::string path;
};

/// Splits `url` into origin and path and appends `suffix` to the path unless
/// the URL already ends with it.
HttpTarget resolve_endpoint(const std::string& url, std::string_view suffix);

struct HttpResult {
    int status = 0;
    std::string body;
    bool transport_failed = false;
    bool timed_out = false;
    std::string error;
};

HttpResult post_json(const HttpTarget& target, const std::string& body, const std::string& bearer_token,
                     int timeout_ms);

/// Reads the bearer token named by `key_env`; throws AuthError when the
/// variable is named but unset. An empty `key_env` means no credential.
std::string bearer_from_env(const std::string& key_env, const std::string& who);

} // namespace sdag::detail
