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

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sdag {

using Embedding = std::vector<double>;

/// Question encoder contract: deterministic for identical text within one
/// configuration, always `dim()` finite entries. Implementations must be
/// safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const noexcept = 0;
    virtual Embedding embed(std::string_view text) const = 0;
    /// Serializable description ({"kind": ..., ...}) recorded in checkpoints.
    virtual nlohmann::json describe() const = 0;
};

inline constexpr std::size_t kDefaultHashedDim = 256;

/// Signed feature hashing over lowercase alphanumeric tokens, L2-normalized.
Embedding embed_hashed(std::string_view text, std::size_t dim = kDefaultHashedDim);

class HashedEmbedder final : public Embedder {
public:
    explicit HashedEmbedder(std::size_t dim = kDefaultHashedDim);
    std::size_t dim() const noexcept override { return dim_; }
    Embedding embed(std::string_view text) const override { return embed_hashed(text, dim_); }
    nlohmann::json describe() const override;

private:
    std::size_t dim_;
};

struct RemoteEmbedderConfig {
    std::string url;  ///< base URL; "/embeddings" is appended
    std::string model;
    std::string key_env;
    std::size_t dim = 0;
    int timeout_ms = 30000;
    int retries = 3;
    int backoff_ms = 250;
};

RemoteEmbedderConfig remote_embedder_config_from_json(const nlohmann::json& j);

/// OpenAI-compatible /v1/embeddings client.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig cfg);
    std::size_t dim() const noexcept override { return cfg_.dim; }
    Embedding embed(std::string_view text) const override;
    nlohmann::json describe() const override;

private:
    RemoteEmbedderConfig cfg_;
};

/// Builds an embedder from a description produced by describe().
std::unique_ptr<Embedder> make_embedder(const nlohmann::json& description);

} // namespace sdag
