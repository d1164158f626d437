/*
 * Copyright 2026 The gpmeta Authors
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
 *
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpmeta {

enum class ErrorCode {
    NotPositiveDefinite,
    DimensionMismatch,
    InvalidArgument,
    Diverged,
    BadMagic,
    TruncatedStream,
    TrailingBytes,
    BadFormat,
    ParseError,
    OutOfSpan,
    MissingData,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. The code identifies the failure
/// class; the message carries the context (task index, file, line ...).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::DimensionMismatch, what);
}

} // namespace gpmeta
