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

#include "sdag/embedding.hpp"

#include "http_client.hpp"
#include "sdag/error.hpp"
#include "sdag/hash.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <thread>

namespace sdag {

using nlohmann::json;

Embedding embed_hashed(std::string_view text, std::size_t dim) {
    if (dim < 2) throw Error(ErrorCode::InvalidArgument, "hashed embedding needs dim >= 2");
    Embedding v(dim, 0.0);

    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t h = fnv1a64(token);
        const double sign = ((h >> 32) & 1u) == 0 ? 1.0 : -1.0;
        v[h % dim] += sign;
        token.clear();
    };
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if ((u >= '0' && u <= '9') || (u >= 'a' && u <= 'z')) {
            token.push_back(c);
        } else if (u >= 'A' && u <= 'Z') {
            token.push_back(static_cast<char>(u - 'A' + 'a'));
        } else {
            flush();
        }
    }
    flush();

    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        const double norm = std::sqrt(norm2);
        for (double& x : v) x /= norm;
    }
    return v;
}

HashedEmbedder::HashedEmbedder(std::size_t dim) : dim_(dim) {
    if (dim < 2) throw Error(ErrorCode::InvalidArgument, "hashed embedding needs dim >= 2");
}

json HashedEmbedder::describe() const { return {{"kind", "hashed"}, {"dim", dim_}}; }

RemoteEmbedderConfig remote_embedder_config_from_json(const json& j) {
    try {
        RemoteEmbedderConfig c;
        c.url = j.at("url").get<std::string>();
        c.model = j.at("model").get<std::string>();
        c.key_env = j.value("key_env", std::string{});
        c.dim = j.at("dim").get<std::size_t>();
        c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
        c.retries = j.value("retries", c.retries);
        c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed embedder config: ") + e.what());
    }
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.dim == 0) throw Error(ErrorCode::ConfigError, "remote embedder must declare its dimension");
}

json RemoteEmbedder::describe() const {
    return {{"kind", "remote"}, {"url", cfg_.url},           {"model", cfg_.model},
            {"dim", cfg_.dim},  {"key_env", cfg_.key_env},   {"timeout_ms", cfg_.timeout_ms},
            {"retries", cfg_.retries}, {"backoff_ms", cfg_.backoff_ms}};
}

Embedding RemoteEmbedder::embed(std::string_view text) const {
    const auto token = detail::bearer_from_env(cfg_.key_env, "embedder");
    const auto target = detail::resolve_endpoint(cfg_.url, "/embeddings");
    const auto body = json{{"model", cfg_.model}, {"input", std::string(text)}}.dump();

    std::string last_error;
    bool timed_out = false;
    const int max_attempts = cfg_.retries + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms * (1 << (attempt - 2))));
        }
        const auto res = detail::post_json(target, body, token, cfg_.timeout_ms);
        if (res.transport_failed || res.status >= 500) {
            last_error = res.transport_failed ? res.error : "HTTP " + std::to_string(res.status);
            timed_out = res.timed_out;
            continue;
        }
        if (res.status == 401 || res.status == 403) {
            throw Error(ErrorCode::AuthError, "embedder: HTTP " + std::to_string(res.status));
        }
        if (res.status != 200) throw Error(ErrorCode::TransportError, "embedder: HTTP " + std::to_string(res.status));
        Embedding v;
        try {
            v = json::parse(res.body).at("data").at(0).at("embedding").get<Embedding>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::TransportError, std::string("embedder: malformed response: ") + e.what());
        }
        if (v.size() != cfg_.dim) {
            throw Error(ErrorCode::DimensionMismatch, "embedder returned " + std::to_string(v.size()) +
                                                          " values, expected " + std::to_string(cfg_.dim));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw Error(ErrorCode::TransportError, "embedder returned a non-finite value");
        }
        return v;
    }
    throw Error(timed_out ? ErrorCode::Timeout : ErrorCode::TransportError,
                "embedder: giving up after " + std::to_string(max_attempts) + " attempts (" + last_error + ")");
}

std::unique_ptr<Embedder> make_embedder(const json& description) {
    const auto kind = description.value("kind", std::string("hashed"));
    if (kind == "hashed") {
        return std::make_unique<HashedEmbedder>(description.value("dim", kDefaultHashedDim));
    }
    if (kind == "remote") return std::make_unique<RemoteEmbedder>(remote_embedder_config_from_json(description));
    throw Error(ErrorCode::ConfigError, "unknown embedder kind '" + kind + "'");
}

} // namespace sdag
