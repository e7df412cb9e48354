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

#include "sdag/error.hpp"
#include "sdag/question.hpp"
#include "sdag/router.hpp"

#include <cmath>

namespace sdag {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint& c) {
    const auto& d = c.params.dims;
    json tensors = json::object();
    c.params.for_each([&](const std::string& name, const Tensor& t) {
        for (double v : t.data) {
            if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "tensor " + name + " is not finite");
        }
        tensors[name] = t.data;
    });
    return {{"version", kCheckpointVersion},
            {"dims",
             {{"subject_dim", d.subject_dim},
              {"question_dim", d.question_dim},
              {"hidden", d.hidden},
              {"layers", d.layers},
              {"activation", std::string(activation_name(d.message_activation))}}},
            {"seed", c.seed},
            {"embedder", c.embedder},
            {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (!j.is_object() || !j.contains("version")) throw Error(ErrorCode::CorruptCheckpoint, "missing version");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                        ", this build reads version " +
                                                        std::to_string(kCheckpointVersion));
        }
        const auto& jd = j.at("dims");
        RouterDims d;
        d.subject_dim = jd.at("subject_dim").get<std::size_t>();
        d.question_dim = jd.at("question_dim").get<std::size_t>();
        d.hidden = jd.at("hidden").get<std::size_t>();
        d.layers = jd.at("layers").get<std::size_t>();
        d.message_activation = parse_activation(jd.value("activation", std::string("relu")));

        Checkpoint c;
        c.seed = j.value("seed", std::uint64_t{0});
        c.embedder = j.value("embedder", json::object());
        c.params = RouterParams::zeros(d);
        const auto& tensors = j.at("tensors");
        c.params.for_each([&](const std::string& name, Tensor& t) {
            if (!tensors.contains(name)) throw Error(ErrorCode::CorruptCheckpoint, "missing tensor " + name);
            const auto& arr = tensors[name];
            if (!arr.is_array() || arr.size() != t.size()) {
                throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " has the wrong size");
            }
            for (std::size_t k = 0; k < t.size(); ++k) {
                if (!arr[k].is_number()) throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " has a non-number");
                t.data[k] = arr[k].get<double>();
            }
        });
        std::size_t expected = 0;
        c.params.for_each([&](const std::string&, const Tensor&) { ++expected; });
        if (tensors.size() != expected) throw Error(ErrorCode::CorruptCheckpoint, "unexpected extra tensors");
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptCheckpoint) throw;
        throw Error(ErrorCode::CorruptCheckpoint, e.what());
    }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    write_text_file(path, checkpoint_to_json(c).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace sdag
