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

#include "local_server.hpp"

#include "sdag/embedding.hpp"
#include "sdag/error.hpp"
#include "sdag/hash.hpp"
#include "sdag/random.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>

using namespace sdag;

namespace {

double norm(const Embedding& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Direct restatement of the hashing rule for a single token.
Embedding one_token(std::string_view token, std::size_t dim) {
    Embedding v(dim, 0.0);
    const auto h = fnv1a64(token);
    v[h % dim] = ((h >> 32) & 1) ? -1.0 : 1.0;
    return v;
}

} // namespace

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("hashed embedding examples") {
    const auto empty = embed_hashed("");
    CHECK(empty.size() == kDefaultHashedDim);
    CHECK(norm(empty) == 0.0);

    CHECK(embed_hashed("a a") == embed_hashed("a"));
    CHECK(embed_hashed("math physics") == embed_hashed("physics math"));
    CHECK(embed_hashed("Math, PHYSICS!") == embed_hashed("math physics"));
    CHECK(embed_hashed("math") == one_token("math", kDefaultHashedDim));
    CHECK(embed_hashed("math", 17) == one_token("math", 17));
    CHECK(embed_hashed("kinetic energy of a ball") != embed_hashed("supply and demand curves"));
}

TEST_CASE("hashed embedding properties over random texts") {
    Rng rng(17);
    const std::string alphabet = "abcdefghij0123 ,.!?XYZ";
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        const std::size_t len = rng.below(60);
        for (std::size_t k = 0; k < len; ++k) text += alphabet[rng.below(alphabet.size())];
        const auto v = embed_hashed(text, 64);
        CHECK(v == embed_hashed(text, 64));
        const double n = norm(v);
        if (n != 0.0) CHECK(std::abs(n - 1.0) <= 1e-12);

        // Token order does not matter.
        std::vector<std::string> tokens;
        std::string cur;
        for (char c : text + " ") {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur += c;
            } else if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        }
        rng.shuffle(tokens);
        std::string shuffled;
        for (const auto& t : tokens) shuffled += t + " ";
        CHECK(embed_hashed(shuffled, 64) == v);
    }
}

TEST_CASE("embedder descriptions round-trip") {
    HashedEmbedder e(128);
    const auto again = make_embedder(e.describe());
    CHECK(again->dim() == 128);
    CHECK(again->embed("law and order") == e.embed("law and order"));
}

TEST_CASE("remote embedder reads an OpenAI-style response") {
    testing::LocalServer srv;
    srv.server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        const double x = static_cast<double>(body.at("input").get<std::string>().size());
        res.set_content(nlohmann::json{{"data", {{{"embedding", {x, 1.0, 0.0}}}}}}.dump(), "application/json");
    });
    srv.start();
    RemoteEmbedderConfig cfg;
    cfg.url = srv.url();
    cfg.model = "enc";
    cfg.dim = 3;
    RemoteEmbedder e(cfg);
    CHECK(e.embed("abcd") == Embedding{4.0, 1.0, 0.0});
    CHECK(e.embed("abcd") == e.embed("abcd"));

    cfg.dim = 4;
    RemoteEmbedder wrong(cfg);
    CHECK_THROWS_AS(wrong.embed("x"), Error);
}

TEST_CASE("remote embedder gives up with TransportError when the endpoint is down") {
    testing::LocalServer srv;
    std::atomic<int> hits{0};
    srv.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    srv.start();
    RemoteEmbedderConfig cfg;
    cfg.url = srv.url();
    cfg.dim = 3;
    cfg.retries = 2;
    cfg.backoff_ms = 1;
    RemoteEmbedder e(cfg);
    try {
        e.embed("x");
        FAIL("expected failure");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::TransportError);
    }
    CHECK(hits.load() == 3);
}
