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

namespace sdag {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::EmptyAfterThreshold: return "EmptyAfterThreshold";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::InvalidWeight: return "InvalidWeight";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NoRuleMatched: return "NoRuleMatched";
    case ErrorCode::RoleInputMismatch: return "RoleInputMismatch";
    case ErrorCode::NoAnswer: return "NoAnswer";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

} // namespace sdag
